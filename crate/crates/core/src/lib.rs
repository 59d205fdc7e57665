//! n-term trigonometric approximation of the weighted Fourier classes
//! `F^ψ_{q,r}` on the torus `T^d`.
//!
//! The crate is organized bottom-up:
//!
//! * [`lattice`] counts and enumerates `ℓ_r` balls of `Z^d` and fits their
//!   polynomial growth constants.
//! * [`weights`] holds the weight families `ψ`, evidence checks for their
//!   admissibility, and the decreasing rearrangement `ψ̄` laid out on shells.
//! * [`sequence`] describes nonincreasing sequences as runs of equal values.
//! * [`functionals`] evaluates the extremal functionals `H_n(Ψ, s)`.
//! * [`approx`] works with concrete coefficient sequences (greedy
//!   approximants, `S^p` errors) and with whole classes (exact best n-term
//!   errors in `S^p`, the extremal witness `f₁`).
//! * [`trig_lp`] evaluates trigonometric polynomials on uniform grids and
//!   computes `L_p(T^d)` norms by quadrature.
//! * [`rates`] tabulates computed quantities against predicted orders.

// negated float comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod error;
pub mod functionals;
pub mod lattice;
mod numeric;
pub mod rates;
pub mod sequence;
pub mod trig_lp;
pub mod weights;

pub use error::{Error, Result};
