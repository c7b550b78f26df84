//! Distortion bounds and a link-level simulator for distributed transmission
//! of a correlated analog sample over a non-coherent Gaussian multiple-access
//! channel with feedback.
//!
//! A network of `M` sensors observes a common unit-variance sample through
//! independent observation noise, quantizes each observation and signals it to
//! a common receiver with orthogonal modulation and square-law (non-coherent)
//! detection. A two-round retransmission protocol with an ACK/NACK control
//! phase and chase combining trades energy for reconstruction fidelity.
//!
//! The crate has four parts:
//!
//! - [`source`]: the correlated source model, the contaminated-uniform
//!   quantizer and the linear reconstruction estimator.
//! - [`bounds`]: closed-form information-theoretic lower bounds on the
//!   reconstruction error (finite and infinite channel dimension, per-source
//!   and product-distortion forms).
//! - [`protocol`]: closed-form error probabilities, distortion terms and the
//!   two-round upper bounds, including the L-threshold retransmission rule and
//!   the average-energy accounting.
//! - [`sim`]: an event-level Monte Carlo oracle that executes the actual
//!   protocol over the simulated channel and measures empirical distortion and
//!   energy.
//!
//! Monte Carlo trials run in parallel with `rayon` by default; build with
//! `--no-default-features` for a purely sequential core. Results are
//! bit-identical either way.

pub mod bounds;
mod error;
pub mod numerics;
pub mod protocol;
pub mod sim;
pub mod source;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
