use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    squeezing_from_noise_powers, synthesize_traces, AcquisitionSpec, ModulationSpec, SegmentId,
    SidebandBand, SignalError, Spectrum, SpectrumAnalyzer,
};
use crate::kinetics::Sensorgram;
use crate::quantum::{
    apply_loss_chain, matched_conjugate_attenuation, quantum_advantage_db, LossChain, NoiseBudget,
    TwinBeamSource, SENSOR_REFLECTIVITY,
};

/// Sideband power below this is treated as no noise at all.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalNoise {
    pub signal_power: f64,
    pub noise_power: f64,
    /// Set when the sideband power fell below [`NOISE_FLOOR`].
    pub noise_floored: bool,
}

impl SignalNoise {
    /// Signal over noise, with the noise clamped to the floor.
    pub fn snr(&self) -> f64 {
        self.signal_power / self.noise_power.max(NOISE_FLOOR)
    }
}

/// Peak power within one bin of the tone and the mean sideband power
/// inside the analysis band.
pub fn extract_signal_and_noise(
    spectrum: &Spectrum,
    modulation: &ModulationSpec,
    band: &SidebandBand,
) -> Result<SignalNoise, SignalError> {
    let df = spectrum.bin_width_hz;
    let last = spectrum.power.len() - 1;
    let tone = (modulation.tone_frequency_hz / df).round() as usize;
    if tone == 0 || tone >= last {
        return Err(SignalError::InvalidModulation(format!(
            "tone at {} Hz falls outside the spectrum",
            modulation.tone_frequency_hz
        )));
    }
    let signal_power = spectrum.power[tone - 1..=tone + 1]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let excl = band.exclusion_bins;
    let (mut sum, mut count) = (0.0, 0usize);
    for (k, p) in spectrum.power.iter().enumerate() {
        let offset = (spectrum.frequency_hz(k) - modulation.tone_frequency_hz).abs();
        if k <= excl || k.abs_diff(tone) <= excl {
            continue;
        }
        if offset >= band.inner_offset_hz && offset <= band.outer_offset_hz {
            sum += p;
            count += 1;
        }
    }
    if count == 0 {
        return Err(SignalError::EmptyBand);
    }
    let noise_power = sum / count as f64;
    let noise_floored = noise_power < NOISE_FLOOR;
    if noise_floored {
        log::warn!("sideband noise {noise_power:e} below floor; SNR capped");
    }
    Ok(SignalNoise {
        signal_power,
        noise_power,
        noise_floored,
    })
}

/// Segment-averaged signal and noise of the balanced difference trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMeasurement {
    pub signal_power: f64,
    pub noise_power: f64,
    pub segments: usize,
}

impl PointMeasurement {
    pub fn snr(&self) -> f64 {
        self.signal_power / self.noise_power.max(NOISE_FLOOR)
    }
}

/// Synthesizes `segments_per_point` segments for `budget` and averages the
/// extracted signal and noise. Segments run in parallel but are summed in
/// order, so the result does not depend on the thread count.
pub fn measure_point(
    budget: &NoiseBudget,
    modulation: &ModulationSpec,
    acq: &AcquisitionSpec,
    analyzer: &SpectrumAnalyzer,
    timestamp_s: f64,
    point: u64,
    stream: u64,
) -> Result<PointMeasurement, SignalError> {
    let per_segment: Vec<SignalNoise> = (0..acq.segments_per_point as u64)
        .into_par_iter()
        .map(|segment| {
            let id = SegmentId { point, segment, stream };
            let trace = synthesize_traces(budget, modulation, acq, timestamp_s, id)?;
            let spectrum = analyzer.analyze(&trace.difference())?;
            extract_signal_and_noise(&spectrum, modulation, &acq.band)
        })
        .collect::<Result<_, _>>()?;
    let n = per_segment.len() as f64;
    Ok(PointMeasurement {
        signal_power: per_segment.iter().map(|s| s.signal_power).sum::<f64>() / n,
        noise_power: per_segment.iter().map(|s| s.noise_power).sum::<f64>() / n,
        segments: per_segment.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    Tmbss,
    Coherent,
}

impl DetectionMode {
    fn stream(self) -> u64 {
        match self {
            DetectionMode::Tmbss => 0,
            DetectionMode::Coherent => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSeries {
    pub mode: DetectionMode,
    pub times_s: Vec<f64>,
    pub reflectivity: Vec<f64>,
    pub signal_power: Vec<f64>,
    pub noise_power: Vec<f64>,
    pub snr: Vec<f64>,
    /// Measured from the squeezed and coherent noise powers.
    pub squeezing_db: Vec<f64>,
    pub qa_db: Vec<f64>,
    /// Squeezing predicted by the noise budget at each point.
    pub model_squeezing_db: Vec<f64>,
}

impl SnrSeries {
    fn with_capacity(mode: DetectionMode, n: usize) -> Self {
        Self {
            mode,
            times_s: Vec::with_capacity(n),
            reflectivity: Vec::with_capacity(n),
            signal_power: Vec::with_capacity(n),
            noise_power: Vec::with_capacity(n),
            snr: Vec::with_capacity(n),
            squeezing_db: Vec::with_capacity(n),
            qa_db: Vec::with_capacity(n),
            model_squeezing_db: Vec::with_capacity(n),
        }
    }

    pub fn snr_db(&self) -> Vec<f64> {
        self.snr.iter().map(|s| 10.0 * s.log10()).collect()
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }
}

/// Squeezed and coherent SNR series measured on the same sensorgram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrComparison {
    pub tmbss: SnrSeries,
    pub coherent: SnrSeries,
}

impl SnrComparison {
    pub fn select(self, mode: DetectionMode) -> SnrSeries {
        match mode {
            DetectionMode::Tmbss => self.tmbss,
            DetectionMode::Coherent => self.coherent,
        }
    }
}

/// How the squeezed-probe noise is obtained at each point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Propagate the source through the loss chain.
    #[default]
    LossChain,
    /// Keep the loss-chain means but fix the detected squeezing.
    FixedSqueezing { squeezing_db: f64 },
}

struct PointResult {
    model_squeezing_db: f64,
    tmbss: PointMeasurement,
    coherent: PointMeasurement,
}

/// For each sensorgram sample the probe's sensor-reflectivity stage is set
/// to the instantaneous reflectivity, the conjugate is attenuated to match,
/// and both the squeezed probe and a coherent probe of equal detected power
/// are measured through the sideband pipeline.
pub fn snr_comparison(
    sensorgram: &Sensorgram,
    source: &TwinBeamSource,
    chain: &LossChain,
    modulation: &ModulationSpec,
    acq: &AcquisitionSpec,
    noise: NoiseModel,
) -> Result<SnrComparison, SignalError> {
    acq.validate()?;
    modulation.validate(acq)?;
    let analyzer = SpectrumAnalyzer::for_acquisition(acq)?;
    let points: Vec<PointResult> = sensorgram
        .times_s
        .par_iter()
        .zip(&sensorgram.reflectivity)
        .enumerate()
        .map(|(i, (&t, &r))| {
            let mut probe_chain = chain.clone();
            probe_chain.set_probe_stage(SENSOR_REFLECTIVITY, r)?;
            let matched = matched_conjugate_attenuation(&probe_chain);
            let mut budget = apply_loss_chain(source, &matched, &format!("t={t}"))?;
            if let NoiseModel::FixedSqueezing { squeezing_db } = noise {
                budget = budget.with_detected_squeezing(squeezing_db)?;
            }
            let measure = |b: &NoiseBudget, mode: DetectionMode| {
                measure_point(b, modulation, acq, &analyzer, t, i as u64, mode.stream())
            };
            Ok(PointResult {
                model_squeezing_db: budget.squeezing_db,
                tmbss: measure(&budget, DetectionMode::Tmbss)?,
                coherent: measure(&budget.coherent_reference(), DetectionMode::Coherent)?,
            })
        })
        .collect::<Result<_, SignalError>>()?;

    let n = points.len();
    let mut tmbss = SnrSeries::with_capacity(DetectionMode::Tmbss, n);
    let mut coherent = SnrSeries::with_capacity(DetectionMode::Coherent, n);
    for (i, p) in points.iter().enumerate() {
        let squeezing = squeezing_from_noise_powers(p.tmbss.noise_power, p.coherent.noise_power)?;
        let qa = quantum_advantage_db(p.tmbss.snr(), p.coherent.snr())?;
        for (series, m) in [(&mut tmbss, &p.tmbss), (&mut coherent, &p.coherent)] {
            series.times_s.push(sensorgram.times_s[i]);
            series.reflectivity.push(sensorgram.reflectivity[i]);
            series.signal_power.push(m.signal_power);
            series.noise_power.push(m.noise_power);
            series.snr.push(m.snr());
            series.squeezing_db.push(squeezing);
            series.qa_db.push(qa);
            series.model_squeezing_db.push(p.model_squeezing_db);
        }
    }
    Ok(SnrComparison { tmbss, coherent })
}

/// One detection mode of [`snr_comparison`].
pub fn snr_timeseries(
    sensorgram: &Sensorgram,
    source: &TwinBeamSource,
    chain: &LossChain,
    modulation: &ModulationSpec,
    acq: &AcquisitionSpec,
    noise: NoiseModel,
    mode: DetectionMode,
) -> Result<SnrSeries, SignalError> {
    Ok(snr_comparison(sensorgram, source, chain, modulation, acq, noise)?.select(mode))
}
