//! Convolutive inverses on `Z^d` with explicit decay bounds, and their use in
//! spline-type spaces: dual windows, Riesz bounds and nonuniform sampling.
//!
//! The guide in `book/` walks through the modules in order; its code
//! snippets run as doc-tests of this crate.

// NaN must fail every range check, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod constants;
pub mod error;
pub mod generator;
pub mod sampling;
pub mod sequence;
pub mod spline;
pub mod suite;
pub mod symbol;
pub mod util;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/deconvolution.md")]
    mod deconvolution {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/spline-spaces.md")]
    mod spline_spaces {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../FORMATS.md")]
    mod formats {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
