//! `J_l(x)` for integer order in every regime, smooth windows, and the
//! order-averaged Bessel sums that drive the off-diagonal analysis.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::sync::LazyLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive, composite, tanh_sinh_unit, GaussLegendre};
use crate::special::ln_gamma;

/// Evaluation strategy for [`bessel_j_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BesselMethod {
    /// Ascending power series; no cancellation while `x² ≤ l + 1`.
    Series,
    /// Trapezoid rule on the periodic integral `(1/2π)∫ e^{i(x sin θ − lθ)} dθ`,
    /// with the contour shifted through the saddle point when `x < l`.
    Quadrature,
    /// Hankel's large-argument expansion.
    Hankel,
}

/// Largest `x` handled by the power series for order `l`.
pub fn series_limit(l: u32) -> f64 {
    (f64::from(l) + 1.0).sqrt()
}

/// Smallest `x` handled by the Hankel expansion for order `l`.
pub fn hankel_limit(l: u32) -> f64 {
    let lf = f64::from(l);
    (lf * lf / 6.0).max(30.0)
}

/// Method [`bessel_j`] picks for `(l, x)`.
pub fn select_method(l: u32, x: f64) -> BesselMethod {
    if x <= series_limit(l) {
        BesselMethod::Series
    } else if x >= hankel_limit(l) {
        BesselMethod::Hankel
    } else {
        BesselMethod::Quadrature
    }
}

/// `J_l(x)` for integer `l ≥ 0` and real `x ≥ 0`.
///
/// ```
/// let j = holomoment::besselx::bessel_j(1, 2.0).unwrap();
/// assert!((j - 0.5767248077568734).abs() < 1e-14);
/// ```
pub fn bessel_j(l: i64, x: f64) -> Result<f64> {
    let l = check_order(l, x)?;
    bessel_j_with(l as i64, x, select_method(l, x))
}

fn check_order(l: i64, x: f64) -> Result<u32> {
    if l < 0 {
        return Err(Error::domain(format!("Bessel order must be nonnegative, got {l}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("Bessel argument must be finite and nonnegative, got {x}")));
    }
    u32::try_from(l).map_err(|_| Error::domain(format!("Bessel order {l} too large")))
}

/// `J_l(x)` by an explicitly chosen method. Each method is valid everywhere
/// in principle, but only accurate in (and near) its own regime.
pub fn bessel_j_with(l: i64, x: f64, method: BesselMethod) -> Result<f64> {
    let l = check_order(l, x)?;
    if x == 0.0 {
        return Ok(if l == 0 { 1.0 } else { 0.0 });
    }
    match method {
        BesselMethod::Series => Ok(series(l, x)),
        BesselMethod::Quadrature => Ok(trapezoid(l, x)),
        BesselMethod::Hankel => hankel(l, x),
    }
}

fn series(l: u32, x: f64) -> f64 {
    let lf = f64::from(l);
    let half = 0.5 * x;
    let lead = (lf * half.ln() - ln_gamma(lf + 1.0)).exp();
    if lead == 0.0 {
        return 0.0;
    }
    let q = -half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..2000 {
        let mf = f64::from(m);
        term *= q / (mf * (mf + lf));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && mf * (mf + lf) > half * half {
            break;
        }
    }
    lead * sum
}

fn trapezoid(l: u32, x: f64) -> f64 {
    let lf = f64::from(l);
    let points = (2.0 * (lf + x) + 10.0 * (lf + x).cbrt() + 64.0).ceil() as usize;
    if x < lf {
        // shift θ ↦ θ − i a with cosh a = l/x; the integrand then peaks
        // without oscillation at θ = 0 and carries the decay e^{l(tanh a − a)}
        let a = (lf / x).acosh();
        let s = x * a.sinh();
        let log_peak = s - lf * a;
        let mut acc = 0.0;
        for j in 0..points {
            let th = TAU * j as f64 / points as f64;
            let mag = (s * (th.cos() - 1.0)).exp();
            if mag < 1e-30 {
                continue;
            }
            acc += mag * (lf * (th.sin() - th)).cos();
        }
        log_peak.exp() * acc / points as f64
    } else {
        let mut acc = 0.0;
        for j in 0..points {
            let th = TAU * j as f64 / points as f64;
            acc += (x * th.sin() - lf * th).cos();
        }
        acc / points as f64
    }
}

fn hankel(l: u32, x: f64) -> Result<f64> {
    let mu = 4.0 * f64::from(l) * f64::from(l);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut converged = false;
    for k in 1..400 {
        let kf = f64::from(k);
        let odd = 2.0 * kf - 1.0;
        let next = term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() > term.abs() && kf > f64::from(l) {
            break;
        }
        term = next;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 * (p.abs() + q.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::accuracy(
            format!("Hankel expansion of J_{l}({x})"),
            term.abs(),
            1e-17,
        ));
    }
    // χ = x − lπ/2 − π/4 with lπ/2 reduced exactly mod 2π
    let chi = x - f64::from(l % 4) * FRAC_PI_2 - FRAC_PI_4;
    Ok((2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin()))
}

/// Bound values for `|J_l(x)|` used as test oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeBounds {
    /// `e^{−l}`, meaningful for `x < l/10`.
    pub bound_small: f64,
    /// `min(l^{−1/3}, |x² − l²|^{−1/4})`, meaningful for `x ≥ l/10`.
    pub bound_osc: f64,
    /// `(2πl)^{−1/2} (e x/(2l))^l`, the bound for `|J_l(l·(x/l))|`.
    pub bound_exp: f64,
}

pub fn bessel_regime_bounds(l: u32, x: f64) -> Result<RegimeBounds> {
    if l == 0 {
        return Err(Error::domain("regime bounds need order l ≥ 1"));
    }
    let lf = f64::from(l);
    let gap = (x * x - lf * lf).abs();
    let bound_osc = if gap == 0.0 { lf.powf(-1.0 / 3.0) } else { lf.powf(-1.0 / 3.0).min(gap.powf(-0.25)) };
    let ratio = x / lf;
    let bound_exp = (-(0.5 * (TAU * lf).ln()) + lf * (std::f64::consts::E * ratio / 2.0).ln()).exp();
    Ok(RegimeBounds { bound_small: (-lf).exp(), bound_osc, bound_exp })
}

// ---------------------------------------------------------------------------
// Windows

/// Which support convention a [`SmoothWindow`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    /// `w((x − K)/H)`, supported on `(K, K + H)`.
    Bump01,
    /// `w((x − K)/K)`, supported on `[K, 2K]`.
    BumpK2K,
}

/// Normalizing constant `∫_0^1 exp(−1/(t(1−t))) dt`.
pub static BUMP_MASS: LazyLock<f64> = LazyLock::new(|| {
    adaptive(|t: f64| raw_bump(t), 0.0, 1.0, 1e-18).expect("bump mass quadrature")
});

fn raw_bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

/// The unit bump `w(t) = exp(−1/(t(1−t)))/Z` on `(0, 1)`, `∫ w = 1`.
pub fn bump(t: f64) -> f64 {
    raw_bump(t) / *BUMP_MASS
}

/// `sup |w^{(j)}|` for `j = 0..=6`.
pub static BUMP_DERIVATIVE_SUP: LazyLock<[f64; 7]> = LazyLock::new(|| {
    let mut sup = [0.0f64; 7];
    let n = 20_000;
    for i in 1..n {
        let jet = bump_jet(i as f64 / n as f64);
        for j in 0..7 {
            sup[j] = sup[j].max(jet[j].abs());
        }
    }
    let z = *BUMP_MASS;
    // grid maximum plus a small margin for the gaps between samples
    sup.map(|s| 1.02 * s / z)
});

/// Derivatives `0..=6` of `exp(−1/(t(1−t)))` at `t0`, via Taylor arithmetic.
fn bump_jet(t0: f64) -> [f64; 7] {
    // u = t(1−t) = u0 + u1 h + u2 h²
    let u0 = t0 * (1.0 - t0);
    let u1 = 1.0 - 2.0 * t0;
    let u2 = -1.0;
    let mut v = [0.0f64; 7];
    v[0] = 1.0 / u0;
    for nn in 1..7 {
        let prev2 = if nn >= 2 { v[nn - 2] } else { 0.0 };
        v[nn] = -(u1 * v[nn - 1] + u2 * prev2) / u0;
    }
    // exponent is −1/u
    let v = v.map(|c| -c);
    let mut e = [0.0f64; 7];
    e[0] = v[0].exp();
    for nn in 1..7 {
        let mut s = 0.0;
        for j in 1..=nn {
            s += j as f64 * v[j] * e[nn - j];
        }
        e[nn] = s / nn as f64;
    }
    let mut fact = 1.0;
    let mut out = [0.0; 7];
    for nn in 0..7 {
        if nn > 0 {
            fact *= nn as f64;
        }
        out[nn] = e[nn] * fact;
    }
    out
}

/// `ŵ(u) = ∫ w(t) e(ut) dt` along the path `t = s ± i s(1−s)` bent into the
/// half-plane where `e(ut)` decays, which avoids cancellation at large `u`.
pub fn bump_fourier(u: f64) -> Complex64 {
    bump_fourier_with_step(u, 1.0 / 32.0)
}

fn bump_fourier_with_step(u: f64, h: f64) -> Complex64 {
    let beta = if u >= 0.0 { 1.0 } else { -1.0 };
    let z = *BUMP_MASS;
    tanh_sinh_unit(
        |s: f64, s1: f64| -> Complex64 {
            let bend = beta * s * s1;
            let t = Complex64::new(s, bend);
            let t1 = Complex64::new(s1, -bend);
            let dt = Complex64::new(1.0, beta * (s1 - s));
            let expo = -(t * t1).inv() + Complex64::new(0.0, TAU * u) * t;
            if expo.re < -745.0 {
                return Complex64::new(0.0, 0.0);
            }
            expo.exp() * dt / z
        },
        h,
    )
}

/// `r(u) = e(−u/2) ŵ(u)`, real because `w` is symmetric about `1/2`.
fn bump_fourier_real(u: f64) -> f64 {
    (Complex64::from_polar(1.0, -PI * u) * bump_fourier(u)).re
}

/// Outcome of the `c₃(w) = ∫|ŵ(t) t³| dt` computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C3Certificate {
    pub value: f64,
    /// Truncation height `T`.
    pub truncation: f64,
    /// `|ŵ(T) T³|` at the truncation point.
    pub tail_integrand: f64,
    /// Change of the value under the last doubling of `T`.
    pub doubling_delta: f64,
}

/// `c₃` of the unit bump, integrated between the sign changes of `r(u)`.
pub static BUMP_C3: LazyLock<C3Certificate> = LazyLock::new(compute_bump_c3);

fn compute_bump_c3() -> C3Certificate {
    let step = 0.1;
    let rule = GaussLegendre::cached(8);
    let mut acc = 0.0;
    let mut u = 0.0;
    let mut prev_r = bump_fourier_real(0.0);
    let mut t_end = 50.0;
    let mut last_total = f64::NAN;
    loop {
        while u < t_end - 1e-12 {
            let hi = u + step;
            let r_hi = bump_fourier_real(hi);
            let mut cuts = vec![u];
            if prev_r.signum() != r_hi.signum() && prev_r != 0.0 && r_hi != 0.0 {
                let (mut a, mut b, mut ra) = (u, hi, prev_r);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    let rm = bump_fourier_real(m);
                    if rm.signum() == ra.signum() {
                        a = m;
                        ra = rm;
                    } else {
                        b = m;
                    }
                }
                cuts.push(0.5 * (a + b));
            }
            cuts.push(hi);
            for w in cuts.windows(2) {
                let mut g = |v: f64| bump_fourier_real(v).abs() * v.powi(3);
                acc += rule.integrate(&mut g, w[0], w[1]);
            }
            u = hi;
            prev_r = r_hi;
        }
        let total = 2.0 * acc;
        let tail = bump_fourier_real(t_end).abs() * t_end.powi(3);
        let delta = (total - last_total).abs();
        if tail < 1e-16 && delta <= 1e-12 * total {
            return C3Certificate { value: total, truncation: t_end, tail_integrand: tail, doubling_delta: delta };
        }
        if t_end > 5000.0 {
            return C3Certificate { value: total, truncation: t_end, tail_integrand: tail, doubling_delta: delta };
        }
        last_total = total;
        t_end *= 2.0;
    }
}

/// A smooth non-negative window with derivative certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothWindow {
    pub kind: WindowKind,
    #[serde(rename = "K")]
    pub big_k: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    /// `|g^{(j)}| ≤ B_j` for `j = 0..=6`.
    pub derivative_bounds: [f64; 7],
}

impl SmoothWindow {
    /// `w((x − K)/H)` on `(K, K + H)`.
    pub fn bump01(k: f64, h: f64) -> Result<Self> {
        Self::build(WindowKind::Bump01, k, h)
    }

    /// `w((x − K)/K)` on `[K, 2K]`.
    pub fn bump_k2k(k: f64) -> Result<Self> {
        Self::build(WindowKind::BumpK2K, k, k)
    }

    fn build(kind: WindowKind, k: f64, h: f64) -> Result<Self> {
        if !(k > 0.0 && h > 0.0) || !k.is_finite() || !h.is_finite() {
            return Err(Error::domain(format!("window needs K, H > 0, got K={k}, H={h}")));
        }
        let sup = *BUMP_DERIVATIVE_SUP;
        let mut derivative_bounds = [0.0; 7];
        for j in 0..7 {
            derivative_bounds[j] = sup[j] / h.powi(j as i32);
        }
        Ok(SmoothWindow { kind, big_k: k, big_h: h, derivative_bounds })
    }

    /// `g(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        bump((x - self.big_k) / self.big_h)
    }

    /// Open support `(K, K + H)`.
    pub fn support(&self) -> (f64, f64) {
        (self.big_k, self.big_k + self.big_h)
    }

    /// `c₃(g) = c₃(w)/H³`.
    pub fn c3(&self) -> f64 {
        BUMP_C3.value / self.big_h.powi(3)
    }

    /// `∫ g = H`.
    pub fn mass(&self) -> f64 {
        self.big_h
    }

    /// Integers strictly inside the support.
    pub fn integer_support(&self) -> std::ops::RangeInclusive<i64> {
        let (lo, hi) = self.support();
        let first = lo.floor() as i64 + 1;
        let last = hi.ceil() as i64 - 1;
        first..=last
    }
}

// ---------------------------------------------------------------------------
// Parity averages

/// Harness constant in the `O(x c₃(g))` error term of the parity identity.
pub const PARITY_ERROR_CONSTANT: f64 = 10.0;

fn check_parity_args(g: &SmoothWindow, a: i32, x: f64) -> Result<()> {
    if g.kind != WindowKind::BumpK2K {
        return Err(Error::domain("parity averages need a window supported away from 0 (kind bumpK2K)"));
    }
    if a != 1 && a != -1 {
        return Err(Error::domain(format!("parity class must be ±1, got {a}")));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("parity averages need x > 0, got {x}")));
    }
    Ok(())
}

/// `4 Σ_{l ≡ a (mod 4)} g(l) J_l(x)`. Real, since `g` is.
pub fn parity_average_lhs(g: &SmoothWindow, a: i32, x: f64) -> Result<f64> {
    check_parity_args(g, a, x)?;
    let mut acc = 0.0;
    for l in g.integer_support() {
        if l < 0 || (l - i64::from(a)).rem_euclid(4) != 0 {
            continue;
        }
        let w = g.eval(l as f64);
        if w == 0.0 {
            continue;
        }
        acc += w * bessel_j(l, x)?;
    }
    Ok(4.0 * acc)
}

/// Right-hand side `g(x) + i^{1−a} h(x)` of the parity identity and its
/// error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityRhs {
    pub main: f64,
    /// `i^{1−a} h(x)`; real because `i^{1−a} = ±1`.
    pub h_term: f64,
    pub err_budget: f64,
    pub c3: f64,
}

pub fn parity_average_rhs(g: &SmoothWindow, a: i32, x: f64) -> Result<ParityRhs> {
    check_parity_args(g, a, x)?;
    let h = h_transform(g, x)?;
    let sign = if a == 1 { 1.0 } else { -1.0 };
    let c3 = g.c3();
    Ok(ParityRhs {
        main: g.eval(x),
        h_term: sign * h,
        err_budget: PARITY_ERROR_CONSTANT * x * c3,
        c3,
    })
}

/// `h(x) = ∫_0^∞ g(√(2xy)) sin(x + y − π/4) (πy)^{−1/2} dy`, computed as
/// `(2/√π) ∫ g(√(2x) u) sin(x + u² − π/4) du`.
pub fn h_transform(g: &SmoothWindow, x: f64) -> Result<f64> {
    let (lo, hi) = g.support();
    let r = (2.0 * x).sqrt();
    let (u_lo, u_hi) = (lo.max(0.0) / r, hi / r);
    let f = |u: f64| g.eval(r * u) * (x + u * u - FRAC_PI_4).sin();
    // panels of at most one radian of phase
    let mut panels = ((u_hi * u_hi - u_lo * u_lo) + 8.0).ceil() as usize;
    let mut prev: f64 = composite(f, u_lo, u_hi, panels, 20);
    for _ in 0..6 {
        panels *= 2;
        let cur: f64 = composite(f, u_lo, u_hi, panels, 20);
        if (cur - prev).abs() < 1e-13 {
            return Ok(2.0 / PI.sqrt() * cur);
        }
        prev = cur;
    }
    Err(Error::accuracy(format!("h({x}) quadrature"), (prev).abs(), 1e-13))
}

// ---------------------------------------------------------------------------
// Pair averages

/// Parameters of `Σ_{k even} i^k h((k − K)/H) J_{k−1}(x) J_{2k−1}(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselPairQuery {
    #[serde(rename = "K")]
    pub big_k: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub x: f64,
    pub y: f64,
    pub window: SmoothWindow,
}

/// The pair average, summed over ascending even `k`. Only the window's
/// profile is used; its position comes from the query's `K` and `H`.
pub fn bessel_pair_average(q: &BesselPairQuery) -> Result<f64> {
    if !(q.big_h > 0.0 && q.big_h <= q.big_k) {
        return Err(Error::domain(format!("need 0 < H ≤ K, got K={}, H={}", q.big_k, q.big_h)));
    }
    if !(q.x > 0.0 && q.y > 0.0) {
        return Err(Error::domain("pair average needs x, y > 0"));
    }
    let first = (q.big_k.floor() as i64 + 1).max(2);
    let last = (q.big_k + q.big_h).ceil() as i64 - 1;
    let mut acc = 0.0;
    for k in first..=last {
        if k % 2 != 0 {
            continue;
        }
        let w = bump((k as f64 - q.big_k) / q.big_h);
        if w == 0.0 {
            continue;
        }
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * w * bessel_j(k - 1, q.x)? * bessel_j(2 * k - 1, q.y)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Transition asymptotic

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionValue {
    /// `√(2/(πD)) cos(D − π/4)` with `D = z(k/K) − (k−1)π/2`: the
    /// approximation to `J_{k−1}(x)`.
    pub value: f64,
    /// `h₂(k/K) = (sin z − cos z)/√D`.
    pub h2: f64,
    /// `i^k = (−1)^{k/2}`.
    pub i_pow_k: f64,
    /// `i^k h₂/√π`, which equals `−value`.
    pub h2_form: f64,
    pub z: f64,
}

/// Phase function `z(u)` at `u = k/K`.
pub fn transition_z(k: i64, big_k: f64, x: f64) -> Result<f64> {
    let nu = (k as f64 / big_k) * big_k - 1.0;
    if x <= nu {
        return Err(Error::domain(format!("transition asymptotic needs x > k − 1, got x={x}, k={k}")));
    }
    let r = nu / x;
    let root = (1.0 - r * r).sqrt();
    Ok(x * root + nu * (r / root).atan())
}

pub fn transition_asymptotic(k: i64, big_k: f64, x: f64) -> Result<TransitionValue> {
    if k <= 0 || k % 2 != 0 {
        return Err(Error::domain(format!("transition asymptotic needs even k > 0, got {k}")));
    }
    let z = transition_z(k, big_k, x)?;
    let nu = (k - 1) as f64;
    let d = z - nu * FRAC_PI_2;
    let amp = (2.0 / (PI * d)).sqrt();
    // reduce (k−1)π/2 mod 2π before forming the phase
    let phase = z - f64::from(((k - 1) % 4) as u8) * FRAC_PI_2 - FRAC_PI_4;
    let value = amp * phase.cos();
    let h2 = (z.sin() - z.cos()) / d.sqrt();
    let i_pow_k = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(TransitionValue { value, h2, i_pow_k, h2_form: i_pow_k * h2 / PI.sqrt(), z })
}
