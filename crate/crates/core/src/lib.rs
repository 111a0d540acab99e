//! Entropic quantities, channel kernels, and constrained minimum
//! output-entropy bounds for bosonic systems at truncated Fock-space scale.
//!
//! The crate verifies numerically that thermal/geometric inputs minimize
//! constrained output entropy in three settings:
//!
//! * the Wehrl (heterodyne) entropy of quantum states,
//! * the four one-mode Gaussian channel families (attenuator, amplifier,
//!   additive noise, phase-contravariant) restricted to occupation-diagonal
//!   states,
//! * the binomial thinning of distributions on ℕ,
//!
//! including the `n`-mode lifted bounds of the form `n f(s/n)`.
//!
//! Module map:
//!
//! * [`specfun`] — the thermal entropy function `g`, its inverse, and the
//!   bound compositions built from them;
//! * [`dist`] — truncated distributions on `{0..N}ⁿ` with tail accounting;
//! * [`kernels`] — row-stochastic channel kernels on truncated ℕ;
//! * [`wehrl`] — Husimi function and Wehrl entropy by quadrature;
//! * [`bounds`] — bound functions and the verification harness;
//! * [`optimizer`] — projected-descent search for constrained minimum
//!   output entropy.

pub mod bounds;
pub mod dist;
pub mod error;
pub mod kernels;
pub mod optimizer;
pub mod specfun;
pub mod wehrl;

pub use error::{Error, Result};
