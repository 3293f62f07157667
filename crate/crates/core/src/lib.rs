//! Galerkin isogeometric discretization of the 1D Dirichlet Laplace
//! eigenproblem on reparametrized domains, together with the GLT spectral
//! symbol machinery used to explain the resulting eigenfrequencies.
//!
//! The pipeline is
//!
//! 1. [`bspline`]: cardinal B-splines and the open uniform B-spline basis,
//! 2. [`reparam`]: admissible C² reparametrizations φ of `[0, 1]`,
//! 3. [`assembly`]: mass and stiffness matrices weighted by `φ'` and `1/φ'`,
//! 4. [`eigensolve`]: the generalized symmetric eigenproblem `K u = λ M u`,
//! 5. [`symbol`]: `f_p`, `g_p`, `e_p` and the full symbol `ω(x, θ) = e_p(θ) / φ'(x)²`,
//! 6. [`distribution`]: the counting function `Ψ`, its inverse `√ξ` and the slope at zero,
//! 7. [`analysis`]: Weyl counting, sampling estimates, ordering and pack counts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod bspline;
pub mod distribution;
pub mod eigensolve;
pub mod error;
pub mod pipeline;
pub mod quadrature;
pub mod reparam;
pub mod roots;
pub mod symbol;

pub use error::{Error, Result};
