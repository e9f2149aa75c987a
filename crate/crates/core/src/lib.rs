//! Vallée-Poussin approximation machinery and Monte-Carlo diagnostics for the
//! central limit theorem in the space of continuous periodic functions.
//!
//! Modules:
//! - [`approximation`]: grids, Fourier analysis, Vallée-Poussin sums, dyadic
//!   blocks, best-approximation bounds and the modulus of continuity.
//! - [`processes`]: random-process generators, normalized sums, covariance,
//!   the canonical `τ` distance and the factorization pair `(L, q)`.
//! - [`criterion`]: generating-functional block statistics `Ψ` and `U`, the
//!   block series check and its uniform version over normalized sums.
//! - [`entropy`]: covering numbers, entropy profiles and the Dudley integral.
//! - [`mc_bands`]: Gaussian-limit sampling, sup-norm tails, quantiles,
//!   uniform confidence bands and the empirical CLT test.
//! - [`io`]: CSV/JSON emission with round-trip float formatting.
//! - [`stats`]: least squares and sample moments.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod criterion;
pub mod entropy;
pub mod error;
pub mod io;
pub mod mc_bands;
pub mod processes;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
