//! Log-gamma on the complex plane and a few real helpers.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

// B_{2m} / (2m (2m-1)) for m = 1..=10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

const SHIFT: f64 = 16.0;

/// Principal branch of `ln Γ(z)`, continuous on `Re z > 0` and matching
/// the real `ln Γ` on the positive axis.
pub fn ln_gamma_complex(z: Complex64) -> Result<Complex64> {
    if z.re <= 0.0 && z.im == 0.0 && z.re == z.re.round() {
        return Err(Error::domain(format!("Γ has a pole at {}", z.re)));
    }
    if z.re < 0.5 {
        // reflection: ln Γ(z) = ln π − ln sin(πz) − ln Γ(1 − z)
        let s = (z * PI).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma_complex(Complex64::new(1.0, 0.0) - z)?);
    }
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.re < SHIFT {
        shift += w.ln();
        w += 1.0;
    }
    Ok(stirling(w) - shift)
}

fn stirling(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut corr = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        corr += p * c;
        p *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + corr
}

/// Real `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs x > 0");
    ln_gamma_complex(Complex64::new(x, 0.0)).map(|v| v.re).unwrap_or(f64::NAN)
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else if n < 30 {
        (2..=n).map(|j| (j as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `ζ(2) = π²/6`.
pub const ZETA2: f64 = PI * PI / 6.0;

/// Kahan–Babuška accumulator; used where summation order matters for
/// reproducibility across schedules.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-15);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
        let f20: f64 = (1..=20).map(|j| (j as f64).ln()).sum();
        assert!((ln_gamma(21.0) - f20).abs() < 1e-12);
        assert!((ln_factorial(40) - ln_gamma(41.0)).abs() < 1e-11);
    }

    #[test]
    fn complex_recurrence_and_modulus() {
        let z = Complex64::new(0.7, 3.2);
        let a = ln_gamma_complex(z + 1.0).unwrap();
        let b = ln_gamma_complex(z).unwrap() + z.ln();
        assert!((a - b).norm() < 1e-12);
        // |Γ(1/2 + it)|² = π / cosh(πt)
        let t = 2.5;
        let g = ln_gamma_complex(Complex64::new(0.5, t)).unwrap();
        assert!((2.0 * g.re - (PI / (PI * t).cosh()).ln()).abs() < 1e-12);
        assert!(ln_gamma_complex(Complex64::new(-2.0, 0.0)).is_err());
    }

    #[test]
    fn branch_is_continuous_along_vertical_line() {
        let mut prev = ln_gamma_complex(Complex64::new(12.5, 0.0)).unwrap();
        for i in 1..4000 {
            let cur = ln_gamma_complex(Complex64::new(12.5, i as f64 * 0.05)).unwrap();
            assert!((cur.im - prev.im).abs() < 1.0, "jump at t={}", i as f64 * 0.05);
            prev = cur;
        }
    }
}
