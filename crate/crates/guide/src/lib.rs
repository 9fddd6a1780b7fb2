//! The listings of the book in `book/src`, compiled and run as doctests.
//!
//! mdbook cannot resolve workspace crates when it tests a book, so each
//! chapter is included here as the documentation of an empty module and
//! `cargo test` checks it like any other doc comment.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/kloosterman.md")]
pub mod kloosterman {}
#[doc = include_str!("../../../book/src/bessel.md")]
pub mod bessel {}
#[doc = include_str!("../../../book/src/forms.md")]
pub mod forms {}
#[doc = include_str!("../../../book/src/lfunctions.md")]
pub mod lfunctions {}
#[doc = include_str!("../../../book/src/moments.md")]
pub mod moments {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
