//! Gauss–Legendre quadrature: fixed rules, composite panels, and adaptive
//! bisection for real or complex integrands.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Values an integrand may return.
pub trait QuadValue: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * pn - pm) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                x = 0.0;
                dp = 1.0;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n == 1 {
            weights[0] = 2.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared rule from a process-wide table.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static TABLE: LazyLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> =
            LazyLock::new(|| Mutex::new(HashMap::new()));
        let mut t = TABLE.lock().unwrap_or_else(|e| e.into_inner());
        t.entry(n).or_insert_with(|| Arc::new(GaussLegendre::new(n))).clone()
    }

    pub fn integrate<T: QuadValue>(&self, f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }
}

/// Composite rule: `panels` equal panels of an `order`-point rule.
pub fn composite<T: QuadValue>(mut f: impl FnMut(f64) -> T, a: f64, b: f64, panels: usize, order: usize) -> T {
    let rule = GaussLegendre::cached(order);
    let h = (b - a) / panels as f64;
    let mut acc = T::zero();
    for i in 0..panels {
        let lo = a + h * i as f64;
        acc = acc + rule.integrate(&mut f, lo, lo + h);
    }
    acc
}

/// Adaptive bisection with a 15-point rule, comparing each interval against
/// the sum of its halves. `tol` is absolute.
pub fn adaptive<T: QuadValue>(mut f: impl FnMut(f64) -> T, a: f64, b: f64, tol: f64) -> Result<T> {
    let rule = GaussLegendre::cached(15);
    let whole = rule.integrate(&mut f, a, b);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = T::zero();
    let mut worst = 0.0f64;
    let width = (b - a).abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&mut f, lo, mid);
        let right = rule.integrate(&mut f, mid, hi);
        let refined = left + right;
        let err = (refined - est).magnitude();
        // share of the tolerance proportional to the interval length
        let budget = (tol * (hi - lo).abs() / width).max(1e-300);
        if err <= budget || err <= 1e-15 * refined.magnitude() {
            total = total + refined;
        } else if depth >= 48 {
            worst = worst.max(err);
            total = total + refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if worst > tol {
        return Err(Error::accuracy("adaptive quadrature", worst, tol));
    }
    Ok(total)
}

/// Tanh-sinh rule on `(0, 1)` with step `h`, nodes for `|t| ≤ 4.5`.
///
/// The integrand receives both `s` and `1 − s`, each computed without
/// cancellation, so endpoint singularities and endpoint-concentrated mass
/// are resolved.
pub fn tanh_sinh_unit<T: QuadValue>(mut f: impl FnMut(f64, f64) -> T, h: f64) -> T {
    let n = (4.5 / h).ceil() as i64;
    let mut acc = T::zero();
    for j in -n..=n {
        let t = j as f64 * h;
        let a = std::f64::consts::PI * t.sinh();
        let (s, s1) = if a >= 0.0 {
            let e = (-a).exp();
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            let e = a.exp();
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        if s == 0.0 || s1 == 0.0 {
            continue;
        }
        let w = std::f64::consts::PI * t.cosh() * s * s1 * h;
        acc = acc + f(s, s1) * w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        for n in [1, 2, 5, 16, 33] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let mut f = |x: f64| x.powi(deg as i32 - 1);
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((r.integrate(&mut f, -1.0, 1.0) - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 ln(s) ds = −1
        let v = tanh_sinh_unit(|s: f64, _| s.ln(), 1.0 / 32.0);
        assert!((v + 1.0).abs() < 1e-13);
        let v = tanh_sinh_unit(|s: f64, s1: f64| (s * s1).powf(-0.5), 1.0 / 32.0);
        assert!((v - std::f64::consts::PI).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-8);
        let c = adaptive(|x: f64| Complex64::new(0.0, x).exp(), 0.0, 3.0, 1e-12).unwrap();
        assert!((c - Complex64::new(3f64.sin(), 1.0 - 3f64.cos())).norm() < 1e-12);
    }
}
