//! Gamma factors, approximate-functional-equation weights `V_{k,j}`, central
//! values `L(1/2, g)` and `L(1/2, sym²f × g)`, and `L(1, sym²f)`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, LazyLock};

use dashmap::DashMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{kloosterman, moebius};
use crate::besselx::bessel_j;
use crate::error::{Error, Result};
use crate::forms::{cusp_dimension, gl3_coefficients, sym2_coefficients, EigenformRecord};
use crate::quad::GaussLegendre;
use crate::special::{ln_gamma_complex, Compensated};

/// `ln Γ_{k,j}(s)`, with
/// `Γ_{k,1}(s) = (2π)^{−s} Γ(s + k − 1/2)` and
/// `Γ_{k,2}(s) = 8 (2π)^{−3s−3k+3/2} Γ(s + 2k − 3/2) Γ(s + k − 1/2) Γ(s + 1/2)`.
///
/// The imaginary part is the argument, continuous along vertical lines; the
/// factor itself is `exp` of the result.
pub fn gamma_factor(k: u32, j: u32, s: Complex64) -> Result<Complex64> {
    gamma_factor_real(f64::from(k), j, s)
}

/// [`gamma_factor`] at a real weight parameter.
pub fn gamma_factor_real(kf: f64, j: u32, s: Complex64) -> Result<Complex64> {
    let ln2pi = TAU.ln();
    match j {
        1 => Ok(-s * ln2pi + ln_gamma_complex(s + (kf - 0.5))?),
        2 => Ok(Complex64::new(8f64.ln(), 0.0) + (-3.0 * s - 3.0 * kf + 1.5) * ln2pi
            + ln_gamma_complex(s + (2.0 * kf - 1.5))?
            + ln_gamma_complex(s + (kf - 0.5))?
            + ln_gamma_complex(s + 0.5)?),
        _ => Err(Error::domain(format!("gamma factor index must be 1 or 2, got {j}"))),
    }
}

/// Default target accuracy of [`AfeWeight`].
pub const AFE_TOL: f64 = 1e-10;

/// `V_{k,j}(ξ) = (1/2πi) ∫_(σ) Γ_{k,j}(1/2+s)/Γ_{k,j}(1/2) ξ^{−s} ds/s`.
///
/// The Gamma ratio over `s = σ + it` is tabulated once at Gauss–Legendre
/// nodes on `[0, T]`; evaluation at any `ξ` is then a single weighted sum.
#[derive(Debug, Clone)]
pub struct AfeWeight {
    /// Weight parameter; integral except for weights interpolated in `k`.
    pub k: f64,
    pub j: u32,
    pub sigma: f64,
    pub t_max: f64,
    /// Contribution of `[T, 2T]` at probe points, bounding the truncation error.
    pub achieved: f64,
    t: Vec<f64>,
    coef: Vec<Complex64>,
}

static AFE_CACHE: LazyLock<DashMap<(u32, u32), Arc<AfeWeight>>> = LazyLock::new(DashMap::new);

const AFE_PANEL: f64 = 0.25;
const AFE_ORDER: usize = 16;

impl AfeWeight {
    pub fn new(k: u32, j: u32, tol: f64) -> Result<Self> {
        Self::new_real(f64::from(k), j, tol)
    }

    /// `V_{κ,j}` for real `κ ≥ 1`; the Gamma factors make sense there and
    /// the weight enters smoothly.
    pub fn new_real(k: f64, j: u32, tol: f64) -> Result<Self> {
        if !(1..=2).contains(&j) {
            return Err(Error::domain(format!("AFE index must be 1 or 2, got {j}")));
        }
        if !(k >= 1.0) || !(tol > 0.0 && tol < 1.0) {
            return Err(Error::domain("AFE weight needs k ≥ 1 and 0 < tol < 1"));
        }
        let sigma = 1.0;
        let t_max = (8.0 * (f64::from(j) * k * (1.0 / tol).ln()).sqrt()).max(30.0);
        let base = gamma_factor_real(k, j, Complex64::new(0.5, 0.0))?;
        let rule = GaussLegendre::cached(AFE_ORDER);
        let node_values = |lo: f64, hi: f64| -> Result<Vec<(f64, Complex64)>> {
            let panels = ((hi - lo) / AFE_PANEL).ceil() as usize;
            let h = (hi - lo) / panels as f64;
            let mut out = Vec::with_capacity(panels * AFE_ORDER);
            for p in 0..panels {
                let a = lo + h * p as f64;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    let t = a + 0.5 * h * (1.0 + x);
                    let s = Complex64::new(sigma, t);
                    let ln_ratio = gamma_factor_real(k, j, s + 0.5)? - base;
                    // |Γ(a + it)| decreases in t, so once the ratio is this
                    // small it stays negligible for every ξ ≥ 1e-12
                    if ln_ratio.re < -100.0 {
                        return Ok(out);
                    }
                    out.push((t, ln_ratio.exp() / s * (0.5 * h * w / PI)));
                }
            }
            Ok(out)
        };
        let main = node_values(0.0, t_max)?;
        let extra = node_values(t_max, 2.0 * t_max)?;
        let kj = k.powi(j as i32);
        let probes = [1e-8, 1.0, kj, 100.0 * kj];
        let eval = |nodes: &[(f64, Complex64)], xi: f64| -> f64 {
            let l = xi.ln();
            xi.powf(-sigma) * nodes.iter().map(|(t, c)| (c * Complex64::from_polar(1.0, -t * l)).re).sum::<f64>()
        };
        let achieved = probes.iter().map(|&xi| eval(&extra, xi).abs()).fold(0.0, f64::max);
        if achieved > tol {
            return Err(Error::accuracy(format!("V_{{{k},{j}}} contour truncation at T = {t_max:.1}"), achieved, tol));
        }
        let (t, coef) = main.into_iter().unzip();
        Ok(AfeWeight { k, j, sigma, t_max, achieved, t, coef })
    }

    /// Process-wide instance at [`AFE_TOL`].
    pub fn shared(k: u32, j: u32) -> Result<Arc<AfeWeight>> {
        if let Some(w) = AFE_CACHE.get(&(k, j)) {
            return Ok(w.clone());
        }
        let w = Arc::new(AfeWeight::new(k, j, AFE_TOL)?);
        AFE_CACHE.insert((k, j), w.clone());
        Ok(w)
    }

    pub fn eval(&self, xi: f64) -> Result<f64> {
        if !(xi > 0.0) {
            return Err(Error::domain(format!("V_{{k,j}}(ξ) needs ξ > 0, got {xi}")));
        }
        let l = xi.ln();
        let mut acc = Compensated::default();
        for (t, c) in self.t.iter().zip(&self.coef) {
            acc.add((c * Complex64::from_polar(1.0, -t * l)).re);
        }
        Ok(xi.powf(-self.sigma) * acc.value())
    }

    /// Smallest integer `M ≥ k^j/10` with `|V(ξ)| < eps` for all integers
    /// `ξ ∈ [M, 2M]` (checked on that range, beyond which `V` keeps decaying).
    pub fn support(&self, eps: f64) -> Result<usize> {
        let mut m = (self.k.powi(self.j as i32) / 10.0).ceil().max(1.0) as usize;
        loop {
            if self.eval(m as f64)?.abs() < eps {
                let ok = (m..=2 * m).step_by((m / 16).max(1)).all(|x| self.eval(x as f64).map(|v| v.abs() < eps).unwrap_or(false));
                if ok {
                    return Ok(m);
                }
            }
            m = m + m / 8 + 1;
            if m > 100_000_000 {
                return Err(Error::accuracy("AFE weight support", f64::NAN, eps));
            }
        }
    }
}

/// `V_{k,1}(ξ) = Q(k, 2πξ)`, the regularized upper incomplete gamma
/// function; closed form for integer `k`, used as an oracle.
pub fn v1_closed_form(k: u32, xi: f64) -> f64 {
    let x = TAU * xi;
    let mut term = (-x).exp();
    let mut s = term;
    for i in 1..k {
        term *= x / f64::from(i);
        s += term;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LValueKind {
    CentralG,
    CentralSym2fg,
    Sym2At1,
}

impl LValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LValueKind::CentralG => "central_g",
            LValueKind::CentralSym2fg => "central_sym2fg",
            LValueKind::Sym2At1 => "sym2_at_1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sym2Method {
    Dirichlet,
    /// Damped triple sum for `1/L(1, sym²f)` with parameter `δ`.
    Mollified { delta: f64 },
    TraceInversion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormRef {
    pub weight: u32,
    pub index: usize,
}

impl From<&EigenformRecord> for FormRef {
    fn from(f: &EigenformRecord) -> Self {
        FormRef { weight: f.weight, index: f.index }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LValueRecord {
    pub kind: LValueKind,
    pub f: Option<FormRef>,
    pub g: Option<FormRef>,
    pub value: f64,
    pub truncation: BTreeMap<String, f64>,
    /// Change of the value under doubled truncation.
    pub stability_delta: f64,
    /// Set for central values below `1e-6` in size.
    pub suspicious: bool,
}

/// Flat CSV row for an [`LValueRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LValueRow {
    pub kind: String,
    pub k: u32,
    pub f_index: Option<usize>,
    pub g_index: Option<usize>,
    pub value: f64,
    pub stability_delta: f64,
    pub truncation: String,
}

impl LValueRecord {
    pub fn row(&self) -> LValueRow {
        let k = self.f.as_ref().map(|f| f.weight).or_else(|| self.g.as_ref().map(|g| g.weight / 2)).unwrap_or(0);
        LValueRow {
            kind: self.kind.as_str().to_string(),
            k,
            f_index: self.f.as_ref().map(|f| f.index),
            g_index: self.g.as_ref().map(|g| g.index),
            value: self.value,
            stability_delta: self.stability_delta,
            truncation: self.truncation.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
        }
    }
}

/// Cutoff below which a value of `V` is treated as zero when sizing sums.
const V_NEGLIGIBLE: f64 = 1e-15;

/// `L(1/2, g) = 2 Σ_m a_g(m) m^{−1/2} V_{k,1}(m)` for `g` of weight `2k`.
pub fn l_central_g(g: &EigenformRecord) -> Result<LValueRecord> {
    if g.weight % 4 != 0 {
        return Err(Error::domain(format!("g must have weight 2k with k even, got {}", g.weight)));
    }
    let k = g.weight / 2;
    let v = AfeWeight::shared(k, 1)?;
    let m = v.support(V_NEGLIGIBLE)?;
    let a = g.table(2 * m).map_err(|_| {
        Error::parameter(format!("L(1/2, g) at weight {} needs a_g(n) for n ≤ {}", g.weight, 2 * m))
    })?;
    let partial = |upto: usize| -> Result<f64> {
        let mut acc = Compensated::default();
        for (n, an) in a.iter().enumerate().take(upto + 1).skip(1) {
            acc.add(an / (n as f64).sqrt() * v.eval(n as f64)?);
        }
        Ok(2.0 * acc.value())
    };
    let value = partial(m)?;
    let delta = (partial(2 * m)? - value).abs();
    let mut truncation = BTreeMap::new();
    truncation.insert("M".to_string(), m as f64);
    Ok(LValueRecord {
        kind: LValueKind::CentralG,
        f: None,
        g: Some(g.into()),
        value,
        truncation,
        stability_delta: delta,
        suspicious: value.abs() < 1e-6,
    })
}

/// `L(1/2, sym²f × g) = 2 Σ_{n,r} A_f(n,r) a_g(n) (nr²)^{−1/2} V_{k,2}(nr²)`.
pub fn l_central_sym2fg(f: &EigenformRecord, g: &EigenformRecord) -> Result<LValueRecord> {
    if g.weight != 2 * f.weight {
        return Err(Error::domain("g must have twice the weight of f"));
    }
    let k = f.weight;
    let v = AfeWeight::shared(k, 2)?;
    let n2 = v.support(V_NEGLIGIBLE)?;
    let top = 2 * n2;
    let r_top = (top as f64).sqrt().floor() as usize;
    let gl3 = gl3_coefficients(f, top, r_top)
        .map_err(|e| Error::parameter(format!("L(1/2, sym²f × g) needs A_f(n, r) for nr² ≤ {top}: {e}")))?;
    let ag = g
        .table(top)
        .map_err(|_| Error::parameter(format!("L(1/2, sym²f × g) needs a_g(n) for n ≤ {top}")))?;
    let vv: Vec<f64> = (0..=top).map(|x| if x == 0 { Ok(0.0) } else { v.eval(x as f64) }).collect::<Result<_>>()?;
    let partial = |upto: usize| -> f64 {
        let mut acc = Compensated::default();
        for r in 1..=r_top {
            let r2 = r * r;
            if r2 > upto {
                break;
            }
            for n in 1..=upto / r2 {
                let x = n * r2;
                acc.add(gl3.values[n][r] * ag[n] / (x as f64).sqrt() * vv[x]);
            }
        }
        2.0 * acc.value()
    };
    let value = partial(n2);
    let delta = (partial(top) - value).abs();
    let mut truncation = BTreeMap::new();
    truncation.insert("N2".to_string(), n2 as f64);
    Ok(LValueRecord {
        kind: LValueKind::CentralSym2fg,
        f: Some(f.into()),
        g: Some(g.into()),
        value,
        truncation,
        stability_delta: delta,
        suspicious: value.abs() < 1e-6,
    })
}

/// Smoothed sums `Σ A_f(n,1) n^{−1} e^{−(n/N)²}` are cut at `n ≤ CUT·N`.
const DIRICHLET_CUT: f64 = 5.5;
/// Relative stability required between successive doublings of `N`.
const DIRICHLET_TOL: f64 = 1e-12;

/// Starting smoothing length for the Dirichlet route at weight `k`.
pub fn dirichlet_start(k: u32) -> usize {
    (2 * k as usize).max(16)
}

/// Coefficients needed for the Dirichlet route at weight `k` when two
/// doublings suffice, which covers every form tried up to weight 100.
pub fn dirichlet_coefficients_needed(k: u32) -> usize {
    (DIRICHLET_CUT * (4 * dirichlet_start(k)) as f64).ceil() as usize
}

/// Truncation for `f` of weight `k` in `L(1, sym²f)` and `L(1/2, sym²f × g)`.
pub fn f_truncation(k: u32) -> Result<usize> {
    Ok(dirichlet_coefficients_needed(k).max(2 * AfeWeight::shared(k, 2)?.support(V_NEGLIGIBLE)? + 1))
}

/// Truncation for `g` of weight `w = 2k` in `L(1, sym²g)`, `L(1/2, g)` and
/// `L(1/2, sym²f × g)`.
pub fn g_truncation(w: u32) -> Result<usize> {
    if w % 4 != 0 {
        return Err(Error::domain(format!("g must have weight 2k with k even, got {w}")));
    }
    let k = w / 2;
    Ok(dirichlet_coefficients_needed(w)
        .max(2 * AfeWeight::shared(k, 2)?.support(V_NEGLIGIBLE)? + 1)
        .max(2 * AfeWeight::shared(k, 1)?.support(V_NEGLIGIBLE)? + 1))
}

/// `L(1, sym²f)` by one of three independent routes.
pub fn l_sym2_at1(f: &EigenformRecord, method: Sym2Method) -> Result<LValueRecord> {
    let mut truncation = BTreeMap::new();
    let (value, delta) = match method {
        Sym2Method::Dirichlet => {
            let mut n = dirichlet_start(f.weight);
            let smoothed = |n: usize, a1: &[f64]| -> f64 {
                let cut = ((DIRICHLET_CUT * n as f64) as usize).min(a1.len() - 1);
                let nf = n as f64;
                let mut acc = Compensated::default();
                for (i, a) in a1.iter().enumerate().take(cut + 1).skip(1) {
                    let x = i as f64 / nf;
                    acc.add(a / i as f64 * (-x * x).exp());
                }
                acc.value()
            };
            let need = |n: usize| (DIRICHLET_CUT * n as f64).ceil() as usize;
            let mut have = need(2 * n).min(f.truncation);
            let mut a1 = sym2_coefficients(f, have)?;
            let mut prev = smoothed(n, &a1);
            loop {
                let next_n = 2 * n;
                if need(next_n) > have {
                    if need(next_n) > f.truncation {
                        return Err(Error::parameter(format!(
                            "L(1, sym²f) at weight {} needs a_f(n) for n ≤ {} (have {})",
                            f.weight,
                            need(next_n),
                            f.truncation
                        )));
                    }
                    have = need(next_n);
                    a1 = sym2_coefficients(f, have)?;
                }
                let cur = smoothed(next_n, &a1);
                let d = (cur - prev).abs();
                n = next_n;
                if d <= DIRICHLET_TOL * cur.abs() {
                    truncation.insert("N".to_string(), n as f64);
                    break (cur, d);
                }
                prev = cur;
            }
        }
        Sym2Method::Mollified { delta } => {
            if !(delta > 0.0 && delta < 0.1) {
                return Err(Error::domain(format!("mollifier δ must lie in (0, 1/10), got {delta}")));
            }
            let x = f64::from(f.weight).powf(delta);
            let inv = |cut: f64| -> Result<f64> {
                let limit = (cut * x).ceil() as u64;
                let mut acc = Compensated::default();
                for d3 in 1..=limit {
                    let c3 = d3 * d3 * d3;
                    if c3 > limit {
                        break;
                    }
                    for d2 in 1..=limit {
                        let c23 = c3 * d2 * d2;
                        if c23 > limit {
                            break;
                        }
                        let mu2 = moebius(d2);
                        if mu2 == 0 {
                            continue;
                        }
                        for d1 in 1..=limit / c23 {
                            let mu = moebius(d1 * d2 * d3);
                            if mu == 0 {
                                continue;
                            }
                            let q = (d1 * d2) * (d1 * d2);
                            let size = (d1 * c23) as f64;
                            acc.add(
                                (mu * mu2) as f64 * f.coefficient(q)? / size * (-size / x).exp(),
                            );
                        }
                    }
                }
                Ok(acc.value())
            };
            let a = inv(40.0)?;
            let b = inv(80.0)?;
            truncation.insert("delta".to_string(), delta);
            truncation.insert("cut".to_string(), 40.0 * x);
            (1.0 / a, (1.0 / b - 1.0 / a).abs())
        }
        Sym2Method::TraceInversion => {
            if cusp_dimension(f.weight) != 1 {
                return Err(Error::domain(format!(
                    "trace inversion needs a one-dimensional space; weight {} has dimension {}",
                    f.weight,
                    cusp_dimension(f.weight)
                )));
            }
            let series = |c_max: u64| -> Result<f64> {
                let sign = if (f.weight / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let mut acc = Compensated::default();
                for c in 1..=c_max {
                    let cf = c as f64;
                    acc.add(kloosterman(1, 1, c)?.value / cf * bessel_j(i64::from(f.weight) - 1, 4.0 * PI / cf)?);
                }
                Ok(1.0 + TAU * sign * acc.value())
            };
            let lead = 2.0 * PI * PI / (f64::from(f.weight) - 1.0);
            let a = lead / series(200)?;
            let b = lead / series(400)?;
            truncation.insert("c_max".to_string(), 200.0);
            (a, (a - b).abs())
        }
    };
    Ok(LValueRecord {
        kind: LValueKind::Sym2At1,
        f: Some(f.into()),
        g: None,
        value,
        truncation,
        stability_delta: delta,
        suspicious: false,
    })
}
