//! Spectral-gap (Poincaré) constants of Gaussian-smoothed discrete
//! distributions.
//!
//! The central object is a [`SmoothedMixture`]: a finitely supported
//! distribution convolved with a centered Gaussian of variance `tau`. For
//! such a variable `Y` the Poincaré constant
//!
//! ```text
//! R_Y = sup_g  Var g(Y) / E g'(Y)^2
//! ```
//!
//! is finite, sits above `Var(Y)` (with equality exactly in the Gaussian
//! case), and is the reciprocal spectral gap of the diffusion operator
//! `D_Y g = rho_Y g' + g''` built from the score `rho_Y = f'/f`.
//!
//! The crate computes this constant three independent ways and makes the
//! routes check each other:
//!
//! * [`mixture`] — exact closed-form arithmetic: density/score, moments,
//!   convolution, standardization, tail moments, exponential moments,
//!   Fisher information.
//! * [`bounds`] — closed-form sandwich bounds: the variance and
//!   fourth-moment lower bounds, a mixture upper bound `tau (1 + s e^s)`,
//!   and the tail-ratio criterion scan.
//! * [`spectral`] — a finite-difference eigensolve of `-D_Y` for the gap
//!   itself, plus certified polynomial Rayleigh-quotient lower bounds.
//! * [`clt`] — an exact powers-of-2 self-convolution experiment measuring
//!   the convergence rate `R - 1 = O(1/n)`, and the scalar recursion
//!   `u(1+u) <= u_prev` that drives the rate proof.
//!
//! # Example
//!
//! ```
//! use poincare::mixture::{DiscreteAtoms, SmoothedMixture};
//! use poincare::bounds;
//!
//! // Rademacher atoms smoothed by a unit Gaussian.
//! let atoms = DiscreteAtoms::new([(1.0, 0.5), (-1.0, 0.5)]).unwrap();
//! let m = SmoothedMixture::new(atoms, 1.0).unwrap();
//!
//! assert_eq!(m.variance(), 2.0);
//! // Upper bound tau (1 + s e^s) with s = sigma^2 / (tau p_min) = 2:
//! let ub = bounds::thm13_bound(&m);
//! assert!((ub - (1.0 + 2.0 * (2.0f64).exp())).abs() < 1e-12);
//! ```

pub mod bounds;
pub mod clt;
pub mod gauss;
pub mod io;
pub mod mixture;
pub mod quad;
pub mod rng;
pub mod selftest;
pub mod spectral;

pub use mixture::{DiscreteAtoms, MixtureError, SmoothedMixture};
pub use spectral::{GapResult, PolyFn, SpectralProblem};
