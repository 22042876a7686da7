use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AcquisitionSpec, ModulationSpec, SignalError};
use crate::quantum::NoiseBudget;

/// Probe and conjugate photocurrents for one FFT segment, in photons per
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorTrace {
    pub probe: Vec<f64>,
    pub conjugate: Vec<f64>,
    /// Sensorgram time of this acquisition.
    pub timestamp_s: f64,
}

impl DetectorTrace {
    /// Balanced-detector output, probe minus conjugate.
    pub fn difference(&self) -> Vec<f64> {
        self.probe
            .iter()
            .zip(&self.conjugate)
            .map(|(p, c)| p - c)
            .collect()
    }
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentId {
    pub point: u64,
    pub segment: u64,
    /// Separates otherwise identical acquisitions, e.g. squeezed and
    /// coherent runs of the same point.
    pub stream: u64,
}

/// ChaCha8 generator keyed by the run seed and the segment identity, so
/// each segment draws the same numbers whatever thread evaluates it.
pub fn segment_rng(seed: u64, id: SegmentId) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([seed, id.point, id.segment, id.stream])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Lower-triangular factor of the per-sample covariance
/// `[[var_p, cov], [cov, var_c]]`.
fn cholesky_2x2(var_p: f64, var_c: f64, cov: f64, label: &str) -> Result<[f64; 3], SignalError> {
    let bad = || SignalError::BudgetInconsistent(label.to_owned());
    if !(var_p >= 0.0) || !(var_c >= 0.0) || !cov.is_finite() {
        return Err(bad());
    }
    let l11 = var_p.sqrt();
    let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
    if l11 == 0.0 && cov != 0.0 {
        return Err(bad());
    }
    let rem = var_c - l21 * l21;
    if rem < -1e-9 * var_c.max(var_p) {
        return Err(bad());
    }
    Ok([l11, l21, rem.max(0.0).sqrt()])
}

/// One segment of detector samples whose noise reproduces `budget`.
///
/// The budget counts photons per segment, so per-sample means, variances
/// and covariance are the budget values divided by the segment length.
pub fn synthesize_traces(
    budget: &NoiseBudget,
    modulation: &ModulationSpec,
    acq: &AcquisitionSpec,
    timestamp_s: f64,
    id: SegmentId,
) -> Result<DetectorTrace, SignalError> {
    acq.validate()?;
    modulation.validate(acq)?;
    let n = acq.segment_length;
    let per = 1.0 / n as f64;
    let [l11, l21, l22] = cholesky_2x2(
        budget.var_probe * per,
        budget.var_conjugate * per,
        budget.covariance * per,
        &budget.point_label,
    )?;
    let dark = acq.dark_noise_variance.sqrt();
    let (dc_p, dc_c) = (budget.mean_probe * per, budget.mean_conjugate * per);
    let omega = 2.0 * PI * modulation.tone_frequency_hz / acq.sample_rate_hz;
    let mut rng = segment_rng(acq.rng_seed, id);
    let mut probe = Vec::with_capacity(n);
    let mut conjugate = Vec::with_capacity(n);
    for i in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let mut dp = l11 * z1;
        let mut dc = l21 * z1 + l22 * z2;
        if dark > 0.0 {
            dp += dark * rng.sample::<f64, _>(StandardNormal);
            dc += dark * rng.sample::<f64, _>(StandardNormal);
        }
        let tone = modulation.modulation_depth * (omega * i as f64).sin();
        probe.push(dc_p * (1.0 + tone) + dp);
        conjugate.push(dc_c + dc);
    }
    Ok(DetectorTrace {
        probe,
        conjugate,
        timestamp_s,
    })
}

/// Adds the same drift waveform to both beams.
pub fn add_common_mode(trace: &mut DetectorTrace, drift: &[f64]) {
    for ((p, c), d) in trace.probe.iter_mut().zip(trace.conjugate.iter_mut()).zip(drift) {
        *p += d;
        *c += d;
    }
}
