//! Simulation core for degenerate intracavity triplet down conversion
//! (`3w -> w + w + w`) in a damped, driven two-mode cavity.
//!
//! * [`model`]: mean-field dynamics, threshold, closed-form and numeric fixed points.
//! * [`positivep`]: truncated positive-P stochastic ensembles.
//! * [`spectrum`]: linearized output spectra, squeezing and Duan–Simon witnesses.
//! * [`mcwf`]: quantum-trajectory reference simulation in a truncated number basis.
//! * [`kappa`]: physical estimates of the effective nonlinearity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kappa;
pub mod mcwf;
pub mod model;
pub mod moments;
pub mod positivep;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{
    pump_threshold, semiclassical_drift, Branch, DriveSchedule, SemiclassicalState, SteadyStateSolution, SystemParams,
};
pub use moments::{ComplexEstimate, MomentSeries, MomentSnapshot, Observable};
pub use positivep::{EnsembleConfig, InitialDistribution, PhaseSpacePoint, QuadratureStats};
pub use spectrum::{SpectrumResult, SpectrumRow};

pub use num_complex::Complex64;
