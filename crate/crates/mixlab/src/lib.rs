//! A numerical laboratory for quantitative multiple mixing on the modular
//! surface: exact Lie-group primitives, lattice geometry, Haar sampling,
//! compactly supported test functions with Sobolev norms, correlation
//! estimators, flow/coupling diagnostics, closed-form integral kernels,
//! and configuration searches.

pub mod configs;
pub mod correlation;
pub mod coupling;
pub mod error;
pub mod homspace;
pub mod hyperbolic;
pub mod kernels;
pub mod lie;
pub mod rng;
pub mod testfn;
pub mod util;

pub use error::{MixError, Result};
