//! Fourth moments of `F = y^{k/2} f` under `||F||₂ = 1`: Watson's identity,
//! the spectral and direct evaluations, the main-term identity, the
//! weight-window average, and the error-term experiments.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::kloosterman;
use crate::besselx::{bessel_j, bessel_pair_average, BesselPairQuery, SmoothWindow, BUMP_C3, PARITY_ERROR_CONSTANT};
use crate::error::{Error, Result};
use crate::fit::FittedConstant;
use crate::forms::{
    cusp_dimension, fundamental_domain_integral, gl3_coefficients, EigenformRecord, EigenformStore, Integrand,
};
use crate::lfun::{
    f_truncation, g_truncation, l_central_g, l_central_sym2fg, l_sym2_at1, AfeWeight, LValueRecord, Sym2Method,
};

/// `6/π`, the limit of the window average.
pub const MAIN_TERM: f64 = 6.0 / PI;

/// Default relative tolerance of the fundamental-domain quadratures.
pub const QUAD_TOL: f64 = 1e-10;

/// `||F||₂²` by quadrature.
pub fn l2_norm_sq(f: &EigenformRecord, tol: f64) -> Result<f64> {
    Ok(fundamental_domain_integral(2 * f.weight, Integrand::Abs2(f), tol)?.value.re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatsonCheck {
    pub k: u32,
    pub f_index: usize,
    pub g_index: usize,
    /// `|⟨F², G⟩|²` with `||F||₂ = ||G||₂ = 1`, by quadrature.
    pub lhs: f64,
    /// `π³/(2(2k−1)) · L(1/2,g) L(1/2,sym²f×g) / (L(1,sym²f)² L(1,sym²g))`.
    pub rhs: f64,
    /// `None` when `rhs` is too small for the ratio to mean anything.
    pub ratio: Option<f64>,
    pub indeterminate: bool,
    pub l_values: Vec<LValueRecord>,
}

/// The right-hand side of Watson's identity and the L-values behind it.
fn watson_rhs(f: &EigenformRecord, g: &EigenformRecord, l1f: f64) -> Result<(f64, Vec<LValueRecord>)> {
    let k = f64::from(f.weight);
    let lg = l_central_g(g)?;
    let ls = l_central_sym2fg(f, g)?;
    let l1g = l_sym2_at1(g, Sym2Method::Dirichlet)?;
    let rhs = PI.powi(3) / (2.0 * (2.0 * k - 1.0)) * lg.value * ls.value / (l1f * l1f * l1g.value);
    Ok((rhs, vec![lg, ls, l1g]))
}

pub fn watson_check(f: &EigenformRecord, g: &EigenformRecord, tol: f64) -> Result<WatsonCheck> {
    if g.weight != 2 * f.weight {
        return Err(Error::domain("Watson's identity needs g of weight 2k"));
    }
    let nf = l2_norm_sq(f, tol)?;
    let ng = l2_norm_sq(g, tol)?;
    let ip = fundamental_domain_integral(2 * f.weight + g.weight, Integrand::ConjPair(f, g), tol)?.value;
    let lhs = ip.norm_sqr() / (nf * nf * ng);
    let l1f = l_sym2_at1(f, Sym2Method::Dirichlet)?;
    let (rhs, mut l_values) = watson_rhs(f, g, l1f.value)?;
    l_values.insert(0, l1f);
    let indeterminate = rhs.abs() < 1e-14;
    Ok(WatsonCheck {
        k: f.weight,
        f_index: f.index,
        g_index: g.index,
        lhs,
        rhs,
        ratio: (!indeterminate).then(|| lhs / rhs),
        indeterminate,
        l_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GContribution {
    pub g_index: usize,
    pub l_half_g: f64,
    pub l_half_sym2fg: f64,
    pub l1_sym2g: f64,
    pub contribution: f64,
    /// A negative product signals numerical trouble: each term is a square.
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub f_index: usize,
    pub normalization: String,
    pub l1_sym2f: f64,
    pub contributions: Vec<GContribution>,
    pub spectral_total: f64,
    pub direct: Option<f64>,
    pub main_term: f64,
    /// `|spectral − direct| / direct` when the direct value is present.
    pub discrepancy: Option<f64>,
    pub negative_count: usize,
}

/// `||F||₄⁴ = π³/(2(2k−1)L(1,sym²f)²) Σ_g L(1/2,g)L(1/2,sym²f×g)/L(1,sym²g)`.
pub fn fourth_moment_spectral(f: &EigenformRecord, store: &EigenformStore) -> Result<MomentReport> {
    let gs = store.get(2 * f.weight, g_truncation(2 * f.weight)?)?;
    let dep = |e: Error| Error::Dependency(format!("L-values for weight {} form {}: {e}", f.weight, f.index));
    let l1f = l_sym2_at1(f, Sym2Method::Dirichlet).map_err(dep)?.value;
    let contributions: Vec<GContribution> = gs
        .par_iter()
        .map(|g| {
            let (c, l) = watson_rhs(f, g, l1f).map_err(dep)?;
            Ok(GContribution {
                g_index: g.index,
                l_half_g: l[0].value,
                l_half_sym2fg: l[1].value,
                l1_sym2g: l[2].value,
                contribution: c,
                negative: c < 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let spectral_total = contributions.iter().map(|c| c.contribution).sum();
    Ok(MomentReport {
        k: f.weight,
        f_index: f.index,
        normalization: "||F||_2 = 1, ||G||_2 = 1".to_string(),
        l1_sym2f: l1f,
        negative_count: contributions.iter().filter(|c| c.negative).count(),
        contributions,
        spectral_total,
        direct: None,
        main_term: MAIN_TERM,
        discrepancy: None,
    })
}

/// `∫ |F|⁴ dμ / (∫ |F|² dμ)²`, both by quadrature.
pub fn fourth_moment_direct(f: &EigenformRecord, tol: f64) -> Result<f64> {
    let n2 = l2_norm_sq(f, tol)?;
    let n4 = fundamental_domain_integral(4 * f.weight, Integrand::Abs4(f), tol)?.value.re;
    Ok(n4 / (n2 * n2))
}

/// Spectral report with the direct value and the discrepancy filled in.
pub fn fourth_moment_report(f: &EigenformRecord, store: &EigenformStore, tol: f64) -> Result<MomentReport> {
    let mut r = fourth_moment_spectral(f, store)?;
    let d = fourth_moment_direct(f, tol)?;
    r.direct = Some(d);
    r.discrepancy = Some((r.spectral_total - d).abs() / d.abs());
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTermCheck {
    pub k: u32,
    pub f_index: usize,
    pub sum_value: f64,
    pub target: f64,
    pub defect: f64,
    /// The same sum restricted to `r = 1`.
    pub r1_only: f64,
    pub n_max: usize,
    pub nr2_max: usize,
}

/// `Σ_{n,r} A_f(n,r) V_{k,1}(n) V_{k,2}(nr²)/(nr)` against `(6/π²) L(1,sym²f)²`.
pub fn main_term_check(f: &EigenformRecord) -> Result<MainTermCheck> {
    let k = f.weight;
    let v1 = AfeWeight::shared(k, 1)?;
    let v2 = AfeWeight::shared(k, 2)?;
    let n_max = v1.support(1e-16)?;
    let nr2_max = v2.support(1e-16)?;
    let r_max = (nr2_max as f64).sqrt() as usize;
    let gl3 = gl3_coefficients(f, n_max, r_max)
        .map_err(|e| Error::accuracy(format!("main-term sum truncation: {e}"), f64::NAN, 1e-16))?;
    let mut sum = 0.0;
    let mut r1_only = 0.0;
    for n in 1..=n_max {
        let w1 = v1.eval(n as f64)?;
        for r in 1..=r_max {
            let x = n * r * r;
            if x > nr2_max {
                break;
            }
            let term = gl3.values[n][r] * w1 * v2.eval(x as f64)? / (n * r) as f64;
            sum += term;
            if r == 1 {
                r1_only += term;
            }
        }
    }
    let l1 = l_sym2_at1(f, Sym2Method::Dirichlet)?.value;
    let target = 6.0 / (PI * PI) * l1 * l1;
    Ok(MainTermCheck {
        k,
        f_index: f.index,
        sum_value: sum,
        target,
        defect: (sum - target).abs(),
        r1_only,
        n_max,
        nr2_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTerm {
    pub k: u32,
    pub weight: f64,
    pub dimension: usize,
    /// `Σ_{f ∈ B_k} ||F||₄⁴`.
    pub moment_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAverage {
    #[serde(rename = "K")]
    pub big_k: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub average: f64,
    pub main: f64,
    pub defect: f64,
    pub terms: Vec<WindowTerm>,
    /// Worst relative spectral/direct gap on the first nonempty weight.
    pub cross_check: Option<(u32, f64)>,
}

/// `(2/(HW)) Σ_{k even} w((k−K)/H) (12/k) Σ_{f ∈ B_k} ||F||₄⁴`, with the
/// normalized bump (`W = 1`).
pub fn weight_window_average(window: &SmoothWindow, store: &EigenformStore, tol: f64) -> Result<WindowAverage> {
    let (big_k, big_h) = (window.big_k, window.big_h);
    if !(big_h > 0.0 && big_h <= big_k) {
        return Err(Error::domain(format!("need 0 < H ≤ K, got K={big_k}, H={big_h}")));
    }
    let ks: Vec<u32> = window
        .integer_support()
        .filter(|&k| k >= 2 && k % 2 == 0 && window.eval(k as f64) > 0.0)
        .map(|k| k as u32)
        .collect();
    if ks.is_empty() {
        return Err(Error::domain(format!("window (K={big_k}, H={big_h}) contains no even weight")));
    }
    let mut terms = Vec::with_capacity(ks.len());
    let mut cross_check = None;
    for &k in &ks {
        let forms = if cusp_dimension(k) == 0 { None } else { Some(store.get(k, f_truncation(k)?)?) };
        let mut moment_sum = 0.0;
        if let Some(forms) = &forms {
            let reports: Vec<MomentReport> =
                forms.par_iter().map(|f| fourth_moment_spectral(f, store)).collect::<Result<_>>()?;
            moment_sum = reports.iter().map(|r| r.spectral_total).sum();
            if cross_check.is_none() {
                let mut worst = 0.0f64;
                for (f, r) in forms.iter().zip(&reports) {
                    let d = fourth_moment_direct(f, tol)?;
                    worst = worst.max((r.spectral_total - d).abs() / d);
                }
                cross_check = Some((k, worst));
            }
        }
        terms.push(WindowTerm { k, weight: window.eval(f64::from(k)), dimension: cusp_dimension(k), moment_sum });
    }
    let sum: f64 = terms.iter().map(|t| t.weight * 12.0 / f64::from(t.k) * t.moment_sum).sum();
    let average = 2.0 / big_h * sum;
    Ok(WindowAverage { big_k, big_h, average, main: MAIN_TERM, defect: (average - MAIN_TERM).abs(), terms, cross_check })
}

// ---------------------------------------------------------------------------
// Error terms

/// Default `ε` of the region definitions and summation ranges.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Shape parameters of the first error term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E1Params {
    pub r1: u64,
    pub r2: u64,
    pub alpha: u64,
    pub beta: u64,
    pub gamma: u64,
    /// Power of `γ` inside `V_{k,2}`.
    pub gamma_exponent: u32,
}

impl Default for E1Params {
    fn default() -> Self {
        E1Params { r1: 1, r2: 1, alpha: 1, beta: 1, gamma: 1, gamma_exponent: 4 }
    }
}

impl E1Params {
    fn v2_argument(&self) -> f64 {
        self.r1 as f64
            * (self.r2 * self.r2) as f64
            * (self.alpha as f64).powi(3)
            * (self.beta * self.beta) as f64
            * (self.gamma as f64).powi(self.gamma_exponent as i32)
    }

    fn kloosterman_n(&self) -> u64 {
        self.r1 * self.alpha * self.beta * self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum E1Mode {
    Direct,
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E1Config {
    pub epsilon: f64,
    /// Largest admissible value of each shape parameter.
    pub param_cap: u64,
}

impl Default for E1Config {
    fn default() -> Self {
        E1Config { epsilon: DEFAULT_EPSILON, param_cap: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E1Value {
    pub mode: E1Mode,
    pub value: f64,
    /// Parity-identity error budget (smoothed mode), else zero.
    pub budget: f64,
    pub m_max: u64,
    pub c_max: u64,
    pub params: E1Params,
}

/// The first error term
/// `(1/(2π²H)) Σ_{k even} w((k−K)/H) (k−1)/K Σ_{m,c} S(r₁αβ², m; c)/((m r₁)^{1/2} c)
/// · J_{2k−1}(4π√(r₁mαβ²)/c) V_{k,1}(m) V_{k,2}(r₁r₂²α³β²γ^e)`
/// over `m ≤ K^{1+ε}`, `c ≤ K^{1/2+ε}`.
///
/// The smoothed mode applies the parity identity to the `k`-sum for each
/// `(m, c)`: with `l = 2k − 1 ≡ 3 (mod 4)` the sum is `g(x)/4` up to the
/// budget, where `g` carries the window and the `k`-dependent factors at the
/// real weight `(l+1)/2`.
pub fn error_e1(window: &SmoothWindow, params: E1Params, mode: E1Mode, config: E1Config) -> Result<E1Value> {
    let (big_k, big_h) = (window.big_k, window.big_h);
    for (name, v) in [("r1", params.r1), ("r2", params.r2), ("alpha", params.alpha), ("beta", params.beta), ("gamma", params.gamma)] {
        if v == 0 || v > config.param_cap {
            return Err(Error::parameter(format!("{name} = {v} outside 1..={}", config.param_cap)));
        }
    }
    if big_k > 60.0 {
        return Err(Error::parameter(format!("K = {big_k} exceeds the desk cap 60")));
    }
    let eps = config.epsilon;
    let m_max = big_k.powf(1.0 + eps).floor() as u64;
    let c_max = big_k.powf(0.5 + eps).floor().max(1.0) as u64;
    let n_kl = params.kloosterman_n();
    let r1 = params.r1 as f64;
    let arg = |m: u64, c: u64| 4.0 * PI * ((n_kl * m) as f64).sqrt() / c as f64;
    let v2_arg = params.v2_argument();
    let pre = 1.0 / (2.0 * PI * PI * big_h);
    let pairs: Vec<(u64, u64)> = (1..=c_max).flat_map(|c| (1..=m_max).map(move |m| (m, c))).collect();
    let coeff = |m: u64, c: u64| -> Result<f64> {
        Ok(kloosterman(n_kl, m, c)?.value / ((m as f64 * r1).sqrt() * c as f64))
    };
    match mode {
        E1Mode::Direct => {
            let ks: Vec<u32> = window
                .integer_support()
                .filter(|&k| k >= 2 && k % 2 == 0)
                .map(|k| k as u32)
                .collect();
            let per_k: Vec<f64> = ks
                .par_iter()
                .map(|&k| {
                    let w = window.eval(f64::from(k));
                    if w == 0.0 {
                        return Ok(0.0);
                    }
                    let v1 = AfeWeight::shared(k, 1)?;
                    let v2 = AfeWeight::shared(k, 2)?.eval(v2_arg)?;
                    let mut acc = 0.0;
                    for &(m, c) in &pairs {
                        let s = coeff(m, c)?;
                        if s == 0.0 {
                            continue;
                        }
                        acc += s * bessel_j(2 * i64::from(k) - 1, arg(m, c))? * v1.eval(m as f64)?;
                    }
                    Ok(w * (f64::from(k) - 1.0) / big_k * v2 * acc)
                })
                .collect::<Result<_>>()?;
            Ok(E1Value { mode, value: pre * per_k.iter().sum::<f64>(), budget: 0.0, m_max, c_max, params })
        }
        E1Mode::Smoothed => {
            // g(l) = w(((l+1)/2 − K)/H) ((l+1)/2 − 1)/K V_{(l+1)/2,1}(m) V_{(l+1)/2,2}(·)
            let factor = |kappa: f64, m: u64| -> Result<f64> {
                let v1 = AfeWeight::new_real(kappa, 1, 1e-10)?.eval(m as f64)?;
                let v2 = AfeWeight::new_real(kappa, 2, 1e-10)?.eval(v2_arg)?;
                Ok((kappa - 1.0) / big_k * v1 * v2)
            };
            let (lo, hi) = window.support();
            let c3 = BUMP_C3.value / (2.0 * big_h).powi(3);
            let terms: Vec<(f64, f64)> = pairs
                .par_iter()
                .map(|&(m, c)| {
                    let s = coeff(m, c)?;
                    let x = arg(m, c);
                    let kappa = (x + 1.0) / 2.0;
                    let w = window.eval(kappa);
                    let main = if w > 0.0 && s != 0.0 { s * w * factor(kappa, m)? / 4.0 } else { 0.0 };
                    // sup of the smooth factor over the window, for the budget
                    let sup = [lo.max(1.0), 0.5 * (lo + hi), hi]
                        .iter()
                        .map(|&kk| factor(kk.max(1.0), m).map(f64::abs))
                        .collect::<Result<Vec<f64>>>()?
                        .into_iter()
                        .fold(0.0, f64::max);
                    let budget = s.abs() * PARITY_ERROR_CONSTANT * x * c3 * sup / 4.0;
                    Ok((main, budget))
                })
                .collect::<Result<_>>()?;
            let value = pre * terms.iter().map(|t| t.0).sum::<f64>();
            let budget = pre * terms.iter().map(|t| t.1).sum::<f64>();
            Ok(E1Value { mode, value, budget, m_max, c_max, params })
        }
    }
}

/// `K^{3/4+ε}/H`.
pub fn e1_bound(big_k: f64, big_h: f64, eps: f64) -> f64 {
    big_k.powf(0.75 + eps) / big_h
}

// ---------------------------------------------------------------------------
// Regions

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    E1,
    E2,
    E3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: u64,
    pub m: u64,
    pub c1: u64,
    pub c2: u64,
    pub r1: u64,
    pub alpha: u64,
    pub beta: u64,
    pub gamma: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    #[serde(flatten)]
    pub point: GridPoint,
    pub label: Region,
}

/// `E1` if `n r₁/c₂ > K^{2−ε}`; `E2` if `K^{4/3−ε} < n r₁/c₂ < K^{2−ε}` and
/// `√(nmαβ²)/c₁` lies within a factor `K^ε` of `n r₁/c₂`; `E3` otherwise.
pub fn classify(p: &GridPoint, big_k: f64, eps: f64) -> RegionLabel {
    let u = (p.n * p.r1) as f64 / p.c2 as f64;
    let v = ((p.n * p.m * p.alpha * p.beta * p.beta) as f64).sqrt() / p.c1 as f64;
    let ke = big_k.powf(eps);
    let label = if u > big_k.powf(2.0 - eps) {
        Region::E1
    } else if u > big_k.powf(4.0 / 3.0 - eps) && u / ke < v && v < u * ke {
        Region::E2
    } else {
        Region::E3
    };
    RegionLabel { point: *p, label }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `H/√(xy)`, or `min(H/√(xy), 1)` away from `E2`.
    HOverSqrtXy,
    /// `(x/K)(x²/(K²|4x − y|))^B`, where `|1 − y/4x| > K^{2+ε}/x²`.
    BPower,
    /// `K^{−1+ε} + H K^{−11/6}`.
    LargeX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub region: RegionLabel,
    pub x: f64,
    pub y: f64,
    pub measured: f64,
    pub bound_kind: BoundKind,
    /// `B` of the B-power bound.
    pub b_exponent: Option<u32>,
    pub bound: f64,
    /// `measured / bound`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub bound_kind: BoundKind,
    pub b_exponent: Option<u32>,
    pub fit: FittedConstant,
}

/// Default grid: `n r₁/c₂` from `K^{0.8}` to `K^{2.2}`, and `m` placed around
/// the balance point `√(nmαβ²)/c₁ = n r₁/c₂` and the transition `y = 4x`.
pub fn default_grid(big_k: f64) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for p in [0.8, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2] {
        let n = big_k.powf(p).round() as u64;
        for r1 in [1u64, 2] {
            for c2 in [1u64, 2] {
                for c1 in [1u64, 2] {
                    let m_eq = (n * r1 * r1 * c1 * c1) as f64 / (c2 * c2) as f64;
                    for s in [1.0 / 16.0, 0.5, 1.0, 4.0, 12.0] {
                        let m = (m_eq * s).round().max(1.0) as u64;
                        out.push(GridPoint { n, m, c1, c2, r1, alpha: 1, beta: 1, gamma: 1 });
                    }
                }
            }
        }
    }
    out
}

/// Exponents `B` at which the B-power bound is tested.
pub const DEFAULT_B_EXPONENTS: [u32; 3] = [0, 1, 2];

/// Classify each grid point and compare the pair average at
/// `x = 4π n r₁/c₂`, `y = 4π√(nmαβ²)/c₁` with the bounds that apply.
pub fn region_sweep(
    window: &SmoothWindow,
    grid: &[GridPoint],
    eps: f64,
    b_exponents: &[u32],
) -> Result<(Vec<SweepRow>, Vec<SweepSummary>)> {
    let (big_k, big_h) = (window.big_k, window.big_h);
    let rows: Vec<Vec<SweepRow>> = grid
        .par_iter()
        .map(|p| {
            let region = classify(p, big_k, eps);
            let x = 4.0 * PI * (p.n * p.r1) as f64 / p.c2 as f64;
            let y = 4.0 * PI * ((p.n * p.m * p.alpha * p.beta * p.beta) as f64).sqrt() / p.c1 as f64;
            let q = BesselPairQuery { big_k, big_h, x, y, window: *window };
            let measured = bessel_pair_average(&q)?.abs();
            let mut bounds = Vec::new();
            match region.label {
                Region::E1 => {
                    bounds.push((BoundKind::LargeX, None, big_k.powf(-1.0 + eps) + big_h * big_k.powf(-11.0 / 6.0)))
                }
                Region::E2 => {
                    bounds.push((BoundKind::HOverSqrtXy, None, big_h / (x * y).sqrt()));
                    if (1.0 - y / (4.0 * x)).abs() > big_k.powf(2.0 + eps) / (x * x) {
                        let base = x * x / (big_k * big_k * (4.0 * x - y).abs());
                        for &b in b_exponents {
                            bounds.push((BoundKind::BPower, Some(b), x / big_k * base.powi(b as i32)));
                        }
                    }
                }
                Region::E3 => bounds.push((BoundKind::HOverSqrtXy, None, (big_h / (x * y).sqrt()).min(1.0))),
            }
            Ok(bounds
                .into_iter()
                .map(|(bound_kind, b_exponent, bound)| SweepRow {
                    region,
                    x,
                    y,
                    measured,
                    bound_kind,
                    b_exponent,
                    bound,
                    ratio: measured / bound,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    let mut summaries = Vec::new();
    let families = std::iter::once((BoundKind::HOverSqrtXy, None))
        .chain(b_exponents.iter().map(|&b| (BoundKind::BPower, Some(b))))
        .chain(std::iter::once((BoundKind::LargeX, None)));
    for (kind, b) in families {
        // the pair average depends on (x, y) only; repeated pairs count once
        let mut seen = std::collections::BTreeSet::new();
        let ratios: Vec<f64> = rows
            .iter()
            .filter(|r| r.bound_kind == kind && r.b_exponent == b && seen.insert(((r.x * 1e6).round() as u64, (r.y * 1e6).round() as u64)))
            .map(|r| r.ratio)
            .collect();
        if !ratios.is_empty() {
            summaries.push(SweepSummary { bound_kind: kind, b_exponent: b, fit: FittedConstant::from_ratios(ratios) });
        }
    }
    Ok((rows, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifier_is_total_and_matches_definitions() {
        let k = 40.0;
        let p = GridPoint { n: 2000, m: 1, c1: 1, c2: 1, r1: 1, alpha: 1, beta: 1, gamma: 1 };
        assert_eq!(classify(&p, k, 0.05).label, Region::E1);
        let p = GridPoint { n: 300, m: 300, c1: 1, c2: 1, r1: 1, alpha: 1, beta: 1, gamma: 1 };
        assert_eq!(classify(&p, k, 0.05).label, Region::E2);
        let p = GridPoint { n: 300, m: 1, c1: 1, c2: 1, r1: 1, alpha: 1, beta: 1, gamma: 1 };
        assert_eq!(classify(&p, k, 0.05).label, Region::E3);
    }

    #[test]
    fn e1_rejects_large_parameters() {
        let w = SmoothWindow::bump01(40.0, 19.0).unwrap();
        let p = E1Params { beta: 100, ..E1Params::default() };
        assert!(matches!(error_e1(&w, p, E1Mode::Direct, E1Config::default()), Err(Error::Parameter(_))));
    }
}
