//! Intensity-difference noise of two-mode bright squeezed light.
//!
//! The squeezer is described by an effective gain `g = cosh^2 r` and a seed
//! photon number `N0` per analysis interval. Losses act as beamsplitters
//! mixing in vacuum. Production code uses bright-seed closed forms; the
//! [`gaussian`] module evaluates the exact Gaussian state for validation.

mod budget;
pub mod gaussian;

use thiserror::Error;

pub use budget::{
    apply_loss_chain, matched_conjugate_attenuation, propagate_moments,
    squeezing_after_symmetric_loss, twin_beam_moments, LossChain, LossStage, NoiseBudget,
    TwinBeamMoments, TwinBeamSource, CELL_WINDOW, DETECTOR_EFFICIENCY, PATH_OPTICS,
    SENSOR_REFLECTIVITY,
};
pub use gaussian::{covariance_oracle_variance, OracleMoments};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("gain {0} must be >= 1")]
    GainBelowUnity(f64),
    #[error("seed flux {0} must be positive")]
    InvalidSeedFlux(f64),
    #[error("stage '{label}' has transmission {value} outside [0, 1]")]
    InvalidTransmission { label: String, value: f64 },
    #[error("squeezing undefined at '{0}': no detected light")]
    UndefinedSqueezing(String),
    #[error("'{label}' cannot carry {squeezing_db} dB with its single-beam variances")]
    UnreachableSqueezing { label: String, squeezing_db: f64 },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

/// Squeeze parameter from the gain.
pub fn gain_to_squeeze_param(gain: f64) -> Result<f64, QuantumError> {
    if !(gain >= 1.0) {
        return Err(QuantumError::GainBelowUnity(gain));
    }
    Ok(gain.sqrt().acosh())
}

/// Noise reduction below the shot-noise limit in dB.
pub fn squeezing_db(variance: f64, shot_noise: f64) -> Result<f64, QuantumError> {
    if !(shot_noise > 0.0) {
        return Err(QuantumError::NonPositive {
            what: "shot-noise variance",
            value: shot_noise,
        });
    }
    if !(variance > 0.0) {
        return Err(QuantumError::NonPositive {
            what: "variance",
            value: variance,
        });
    }
    Ok(-10.0 * (variance / shot_noise).log10())
}

/// Squeezing of the lossless source, `10 log10(2g - 1)`.
pub fn lossless_squeezing_db(gain: f64) -> Result<f64, QuantumError> {
    if !(gain >= 1.0) {
        return Err(QuantumError::GainBelowUnity(gain));
    }
    Ok(10.0 * (2.0 * gain - 1.0).log10())
}

/// SNR improvement of the squeezed probe over the coherent one, in dB.
/// Both SNRs are power ratios.
pub fn quantum_advantage_db(snr_tmbss: f64, snr_coherent: f64) -> Result<f64, QuantumError> {
    for (what, value) in [("TMBSS SNR", snr_tmbss), ("coherent SNR", snr_coherent)] {
        if !(value > 0.0) {
            return Err(QuantumError::NonPositive { what, value });
        }
    }
    Ok(10.0 * (snr_tmbss / snr_coherent).log10())
}
