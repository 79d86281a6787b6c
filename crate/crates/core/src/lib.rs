//! Logarithmic negativity of N-mode ensembles of disordered harmonic
//! oscillator lattices.
//!
//! The numerical core is generic over the scalar type. Routines that only
//! need field arithmetic ([`Scalar`]) also run in exact rationals; routines
//! that diagonalize matrices need [`Real`] (`f32` or `f64`). The aliases below
//! fix the common choices.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristic;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod mode;
pub mod negativity;
pub mod scalar;
pub mod special;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
pub use lattice::{DisorderSpec, LatticeBox, Region, SpringSource};
pub use mode::TruncationPolicy;
pub use negativity::{EnsembleSpec, NegativityReport};
pub use scalar::{Real, Scalar};

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

pub type SpectralFrame64 = spectral::SpectralFrame<f64>;
pub type SpectralFrame32 = spectral::SpectralFrame<f32>;
pub type CorrelationFrame64 = spectral::CorrelationFrame<f64>;
pub type SymplecticSpectrum64 = spectral::SymplecticSpectrum<f64>;
pub type Instance64 = spectral::Instance<f64>;
pub type Instance32 = spectral::Instance<f32>;
pub type TestFunction64 = characteristic::TestFunction<f64>;
pub type ModeOperator64 = mode::ScaledModeOperator<f64>;
/// Mode operator with exact rational eigenvalues.
pub type ExactModeOperator = mode::ScaledModeOperator<Rational>;
pub type TraceNormCertificate64 = negativity::TraceNormCertificate<f64>;
pub type ExactTraceNormCertificate = negativity::TraceNormCertificate<Rational>;
