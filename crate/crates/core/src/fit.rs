//! Fitted constants for asymptotic `≪` claims.
//!
//! A claim `measured ≪ bound` is tested on a grid by forming the ratios
//! `measured / bound` and reporting their spread.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    /// Ratio `measured / bound` at each grid point, in grid order.
    pub ratios: Vec<f64>,
    /// Largest ratio: the smallest constant for which the claim holds on the grid.
    pub constant: f64,
    pub min_ratio: f64,
    pub median: f64,
}

impl FittedConstant {
    pub fn from_pairs(measured: &[f64], bound: &[f64]) -> Self {
        assert_eq!(measured.len(), bound.len());
        let ratios: Vec<f64> = measured.iter().zip(bound).map(|(m, b)| m.abs() / b).collect();
        Self::from_ratios(ratios)
    }

    pub fn from_ratios(ratios: Vec<f64>) -> Self {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (constant, min_ratio, median) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let med = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            (sorted[n - 1], sorted[0], med)
        };
        FittedConstant { ratios, constant, min_ratio, median }
    }

    /// `max / min` of the ratios.
    pub fn spread(&self) -> f64 {
        if self.min_ratio > 0.0 {
            self.constant / self.min_ratio
        } else {
            f64::INFINITY
        }
    }

    /// Largest ratio relative to the median.
    pub fn max_over_median(&self) -> f64 {
        if self.median > 0.0 {
            self.constant / self.median
        } else {
            f64::INFINITY
        }
    }

    /// Whether the constant fitted on the leading part of the grid still
    /// bounds the rest within `factor`: no upward drift along the grid.
    pub fn no_upward_drift(&self, factor: f64) -> bool {
        let mut running = 0.0f64;
        for (i, &r) in self.ratios.iter().enumerate() {
            if i > 0 && r > factor * running {
                return false;
            }
            running = running.max(r);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_and_drift() {
        let f = FittedConstant::from_pairs(&[2.0, 3.0, 1.0], &[1.0, 1.0, 1.0]);
        assert_eq!(f.constant, 3.0);
        assert_eq!(f.median, 2.0);
        assert_eq!(f.spread(), 3.0);
        assert!(f.no_upward_drift(2.0));
        assert!(!FittedConstant::from_ratios(vec![1.0, 5.0]).no_upward_drift(2.0));
    }
}
