//! Surface binding kinetics and the refractive-index trace seen by the sensor.

mod binding;
mod sensorgram;

use thiserror::Error;

use crate::optics::OpticsError;

pub use binding::{
    coverage_analytic, coverage_ode, coverage_sensitivities, BindingModel, ConcentrationSchedule,
    ConcentrationStep, DEFAULT_MAX_STEP_S, STABLE_STEP,
};
pub use sensorgram::{index_trace, sensorgram, IndexMap, Sensorgram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("invalid binding model: {0}")]
    InvalidModel(String),
    #[error("negative time {0} s")]
    NegativeTime(f64),
    #[error("time grid must be non-decreasing")]
    NonMonotoneGrid,
    #[error(transparent)]
    Optics(#[from] OpticsError),
}
