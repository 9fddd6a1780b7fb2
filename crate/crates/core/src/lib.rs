//! Numerical workbench for holomorphic Hecke cusp forms of level one.
//!
//! The crate evaluates, at desk-scale weights (roughly 12 to 100), the
//! explicit objects that enter the fourth moment of cusp forms:
//!
//! * [`arith`]: divisor functions, Möbius, Kloosterman sums and the Weil bound;
//! * [`besselx`]: `J_l(x)` in all regimes, smooth windows, and the weighted
//!   Bessel averages over orders;
//! * [`forms`]: exact q-expansion bases, Hecke eigenforms, GL(3) coefficients
//!   of the symmetric-square lift, the Petersson formula and integration over
//!   the modular fundamental domain;
//! * [`lfun`]: gamma factors, approximate-functional-equation weights and
//!   the L-values at `s = 1/2` and `s = 1`;
//! * [`moments`]: Watson's identity, spectral and direct fourth moments, the
//!   main-term identity, window averages over weights and the off-diagonal
//!   error-term experiments.
//!
//! Every routine that truncates an infinite sum or integral records the
//! truncation it used, so results can be audited.
//!
//! ```
//! use holomoment::arith::kloosterman;
//!
//! let s = kloosterman(1, 1, 6).unwrap();
//! assert!((s.value + 1.0).abs() < 1e-12);
//! assert!(s.value.abs() <= s.weil);
//! ```

pub mod arith;
pub mod besselx;
pub mod error;
pub mod fit;
pub mod forms;
pub mod lfun;
pub mod moments;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
