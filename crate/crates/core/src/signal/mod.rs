//! Synthetic balanced-detector traces and the FFT sideband pipeline that
//! turns them into signal, noise, SNR, squeezing and quantum advantage.

mod pipeline;
mod spectrum;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::KineticsError;
use crate::optics::OpticsError;
use crate::quantum::QuantumError;

pub use pipeline::{
    extract_signal_and_noise, measure_point, snr_comparison, snr_timeseries, DetectionMode,
    NoiseModel, PointMeasurement, SignalNoise, SnrComparison, SnrSeries, NOISE_FLOOR,
};
pub use spectrum::{power_spectrum, Spectrum, SpectrumAnalyzer, HANN_ENBW_BINS};
pub use synth::{add_common_mode, segment_rng, synthesize_traces, DetectorTrace, SegmentId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid modulation: {0}")]
    InvalidModulation(String),
    #[error("invalid acquisition: {0}")]
    InvalidAcquisition(String),
    #[error("segment length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("trace length {got} does not match segment length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("noise budget '{0}' has a covariance matrix that is not positive semi-definite")]
    BudgetInconsistent(String),
    #[error("sideband analysis band is empty after exclusions")]
    EmptyBand,
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// AOM intensity modulation on the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSpec {
    pub tone_frequency_hz: f64,
    /// Fraction of the probe DC level.
    pub modulation_depth: f64,
}

impl Default for ModulationSpec {
    fn default() -> Self {
        Self {
            tone_frequency_hz: 2e6,
            modulation_depth: 0.01,
        }
    }
}

impl ModulationSpec {
    pub fn validate(&self, acq: &AcquisitionSpec) -> Result<(), SignalError> {
        if !(self.modulation_depth > 0.0 && self.modulation_depth < 1.0) {
            return Err(SignalError::InvalidModulation(format!(
                "depth {} outside (0, 1)",
                self.modulation_depth
            )));
        }
        if !(self.tone_frequency_hz > 0.0) || 2.0 * self.tone_frequency_hz >= acq.sample_rate_hz {
            return Err(SignalError::InvalidModulation(format!(
                "tone {} Hz must lie below Nyquist for {} S/s",
                self.tone_frequency_hz, acq.sample_rate_hz
            )));
        }
        Ok(())
    }
}

/// Offsets from the tone over which sideband noise is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidebandBand {
    pub inner_offset_hz: f64,
    pub outer_offset_hz: f64,
    /// Bins on each side of the tone bin that are never counted as noise.
    pub exclusion_bins: usize,
}

impl Default for SidebandBand {
    fn default() -> Self {
        Self {
            inner_offset_hz: 50e3,
            outer_offset_hz: 500e3,
            exclusion_bins: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub sample_rate_hz: f64,
    pub segment_length: usize,
    pub segments_per_point: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub band: SidebandBand,
    /// Additive white detector noise per sample, in the trace units squared.
    #[serde(default)]
    pub dark_noise_variance: f64,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 50e6,
            segment_length: 1 << 14,
            segments_per_point: 400,
            rng_seed: 0,
            band: SidebandBand::default(),
            dark_noise_variance: 0.0,
        }
    }
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !self.segment_length.is_power_of_two() || self.segment_length < 4 {
            return Err(SignalError::NotPowerOfTwo(self.segment_length));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidAcquisition(format!(
                "sample rate {} must be positive",
                self.sample_rate_hz
            )));
        }
        if self.segments_per_point == 0 {
            return Err(SignalError::InvalidAcquisition("need at least one segment per point".into()));
        }
        let b = &self.band;
        if self.band.exclusion_bins == 0 || !(b.inner_offset_hz >= 0.0) || !(b.outer_offset_hz > b.inner_offset_hz) {
            return Err(SignalError::InvalidAcquisition(format!(
                "sideband band {}..{} Hz with exclusion {} bins",
                b.inner_offset_hz, b.outer_offset_hz, b.exclusion_bins
            )));
        }
        if !(self.dark_noise_variance >= 0.0) {
            return Err(SignalError::InvalidAcquisition("dark noise variance must be >= 0".into()));
        }
        Ok(())
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_length as f64
    }
}

/// Noise reduction of the squeezed probe relative to the coherent one.
pub fn squeezing_from_noise_powers(noise_tmbss: f64, noise_coherent: f64) -> Result<f64, SignalError> {
    for (what, value) in [("TMBSS noise power", noise_tmbss), ("coherent noise power", noise_coherent)] {
        if !(value > 0.0) {
            return Err(SignalError::NonPositive { what, value });
        }
    }
    Ok(-10.0 * (noise_tmbss / noise_coherent).log10())
}
