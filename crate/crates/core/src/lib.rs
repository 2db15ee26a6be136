//! Streaming estimation and online inference under local differential
//! privacy.
//!
//! Each observation's gradient is perturbed with Gaussian noise calibrated
//! to its global sensitivity before it updates the iterate, so the whole
//! SGD path is private. Two online confidence intervals are built on top of
//! the averaged iterate: a privatized plug-in sandwich estimator and the
//! random-scaling studentization.
//!
//! ```
//! use ldpsgd::{run_stream, LossModel, NoiseSource, Observation, PrivacyBudget, StepSchedule};
//! use nalgebra::DVector;
//!
//! let stream = (0..1000).map(|i| {
//!     let x = (i % 7) as f64 / 7.0 - 0.5;
//!     Observation::from_slice(&[1.0, x], 1.0 + 2.0 * x).unwrap()
//! });
//! let state = run_stream(
//!     LossModel::huber_linear(1.345).unwrap(),
//!     StepSchedule::default(),
//!     PrivacyBudget::infinite(),
//!     DVector::zeros(2),
//!     stream,
//!     NoiseSource::new(7, 0),
//! )
//! .unwrap();
//! assert_eq!(state.n(), 1000);
//! ```

pub mod error;
pub mod inference;
pub mod models;
pub mod privacy;
pub mod sgd;
pub mod sim;

pub use error::{Error, Result};
pub use inference::{
    critical_values, plugin_interval, rs_interval, ConfidenceInterval, CriticalValueTable,
    IntervalMethod, PluginCovarianceState, RandomScalingState,
};
pub use models::{mallow_weight, Family, HessianFactor, LossModel, Observation};
pub use privacy::{
    compose_parallel, gaussian_mechanism, matrix_gaussian_mechanism, plugin_release_budget, Mu,
    NoiseSource, PrivacyBudget, Sensitivity,
};
pub use sgd::{run_stream, SgdState, StepSchedule};
pub use sim::{
    aggregate, generate_stream, run_replication, run_simulation, Method, SigmaStructure, SimDesign,
    SimulationReport,
};
