use serde::{Deserialize, Serialize};

use super::{squeezing_db, QuantumError};

pub const CELL_WINDOW: &str = "cell_window";
pub const PATH_OPTICS: &str = "path_optics";
pub const SENSOR_REFLECTIVITY: &str = "sensor_reflectivity";
pub const DETECTOR_EFFICIENCY: &str = "detector_efficiency";

/// Seeded two-mode squeezer described by its effective gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinBeamSource {
    /// Probe intensity gain `g = cosh^2 r`.
    pub gain: f64,
    /// Seed photons per analysis interval.
    pub seed_flux: f64,
}

impl TwinBeamSource {
    pub fn new(gain: f64, seed_flux: f64) -> Result<Self, QuantumError> {
        if !(gain >= 1.0) || !gain.is_finite() {
            return Err(QuantumError::GainBelowUnity(gain));
        }
        if !(seed_flux > 0.0) || !seed_flux.is_finite() {
            return Err(QuantumError::InvalidSeedFlux(seed_flux));
        }
        Ok(Self { gain, seed_flux })
    }

    /// Squeeze parameter `r = acosh(sqrt(g))`.
    pub fn squeeze_param(&self) -> f64 {
        self.gain.sqrt().acosh()
    }

    /// Spontaneous photons per mode, `sinh^2 r = g - 1`.
    pub fn spontaneous_photons(&self) -> f64 {
        self.gain - 1.0
    }
}

/// Photon-number statistics of the two beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinBeamMoments {
    pub mean_probe: f64,
    pub mean_conjugate: f64,
    pub var_probe: f64,
    pub var_conjugate: f64,
    pub covariance: f64,
}

impl TwinBeamMoments {
    pub fn variance_diff(&self) -> f64 {
        self.var_probe + self.var_conjugate - 2.0 * self.covariance
    }
}

/// Bright-seed moments at the squeezer output. Terms independent of the
/// seed (spontaneous emission from vacuum) are dropped.
pub fn twin_beam_moments(source: &TwinBeamSource) -> TwinBeamMoments {
    let g = source.gain;
    let n0 = source.seed_flux;
    if n0 < 100.0 * source.spontaneous_photons() {
        log::warn!(
            "seed flux {n0} is not bright compared with sinh^2 r = {}",
            source.spontaneous_photons()
        );
    }
    TwinBeamMoments {
        mean_probe: g * n0,
        mean_conjugate: (g - 1.0) * n0,
        var_probe: g * (2.0 * g - 1.0) * n0,
        var_conjugate: (g - 1.0) * (2.0 * g - 1.0) * n0,
        covariance: 2.0 * g * (g - 1.0) * n0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossStage {
    pub label: String,
    pub transmission: f64,
}

impl LossStage {
    pub fn new(label: impl Into<String>, transmission: f64) -> Self {
        Self {
            label: label.into(),
            transmission,
        }
    }
}

/// Ordered transmissions seen by each beam between the source and the
/// detectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossChain {
    pub probe: Vec<LossStage>,
    pub conjugate: Vec<LossStage>,
}

impl LossChain {
    pub fn new(probe: Vec<LossStage>, conjugate: Vec<LossStage>) -> Result<Self, QuantumError> {
        let c = Self { probe, conjugate };
        c.validate()?;
        Ok(c)
    }

    pub fn lossless() -> Self {
        Self::default()
    }

    /// Same transmission on both arms.
    pub fn symmetric(stages: Vec<LossStage>) -> Result<Self, QuantumError> {
        Self::new(stages.clone(), stages)
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        for s in self.probe.iter().chain(&self.conjugate) {
            if !(0.0..=1.0).contains(&s.transmission) {
                return Err(QuantumError::InvalidTransmission {
                    label: s.label.clone(),
                    value: s.transmission,
                });
            }
        }
        Ok(())
    }

    pub fn probe_transmission(&self) -> f64 {
        self.probe.iter().map(|s| s.transmission).product()
    }

    pub fn conjugate_transmission(&self) -> f64 {
        self.conjugate.iter().map(|s| s.transmission).product()
    }

    /// Sets (or appends) the probe stage called `label`.
    pub fn set_probe_stage(&mut self, label: &str, transmission: f64) -> Result<(), QuantumError> {
        if !(0.0..=1.0).contains(&transmission) {
            return Err(QuantumError::InvalidTransmission {
                label: label.to_owned(),
                value: transmission,
            });
        }
        match self.probe.iter_mut().find(|s| s.label == label) {
            Some(s) => s.transmission = transmission,
            None => self.probe.push(LossStage::new(label, transmission)),
        }
        Ok(())
    }

    /// Chain truncated after the first `n` stages on each arm.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            probe: self.probe.iter().take(n).cloned().collect(),
            conjugate: self.conjugate.iter().take(n).cloned().collect(),
        }
    }
}

/// Attenuates the conjugate exactly like the probe.
pub fn matched_conjugate_attenuation(chain: &LossChain) -> LossChain {
    LossChain {
        probe: chain.probe.clone(),
        conjugate: chain.probe.clone(),
    }
}

/// Detected intensity-difference noise at one point of the setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub point_label: String,
    pub eta_probe: f64,
    pub eta_conjugate: f64,
    pub mean_probe: f64,
    pub mean_conjugate: f64,
    pub var_probe: f64,
    pub var_conjugate: f64,
    pub covariance: f64,
    pub variance_diff: f64,
    /// Shot-noise limit: difference variance of coherent beams with the same
    /// detected means.
    pub snl: f64,
    pub squeezing_db: f64,
}

impl NoiseBudget {
    /// Coherent beams with the same detected means (the classical reference).
    pub fn coherent_reference(&self) -> NoiseBudget {
        NoiseBudget {
            point_label: self.point_label.clone(),
            var_probe: self.mean_probe,
            var_conjugate: self.mean_conjugate,
            covariance: 0.0,
            variance_diff: self.snl,
            squeezing_db: 0.0,
            ..self.clone()
        }
    }

    /// Same means and single-beam variances, with the beam correlation
    /// adjusted so the detected squeezing equals `squeezing_db`.
    pub fn with_detected_squeezing(&self, squeezing_db: f64) -> Result<NoiseBudget, QuantumError> {
        let variance_diff = self.snl * 10f64.powf(-squeezing_db / 10.0);
        let covariance = 0.5 * (self.var_probe + self.var_conjugate - variance_diff);
        if !(covariance * covariance <= self.var_probe * self.var_conjugate) || !(variance_diff > 0.0) {
            return Err(QuantumError::UnreachableSqueezing {
                label: self.point_label.clone(),
                squeezing_db,
            });
        }
        Ok(NoiseBudget {
            covariance,
            variance_diff,
            squeezing_db,
            ..self.clone()
        })
    }

    /// Budget with every photon number multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NoiseBudget {
        NoiseBudget {
            mean_probe: self.mean_probe * factor,
            mean_conjugate: self.mean_conjugate * factor,
            var_probe: self.var_probe * factor,
            var_conjugate: self.var_conjugate * factor,
            covariance: self.covariance * factor,
            variance_diff: self.variance_diff * factor,
            snl: self.snl * factor,
            ..self.clone()
        }
    }
}

/// Binomial thinning of each beam by its effective transmission. Exact
/// for any input state given its first and second moments.
pub fn propagate_moments(
    moments: &TwinBeamMoments,
    eta_probe: f64,
    eta_conjugate: f64,
    point_label: &str,
) -> Result<NoiseBudget, QuantumError> {
    let (ep, ec) = (eta_probe, eta_conjugate);
    let m = moments;
    let var_probe = ep * ep * m.var_probe + ep * (1.0 - ep) * m.mean_probe;
    let var_conjugate = ec * ec * m.var_conjugate + ec * (1.0 - ec) * m.mean_conjugate;
    let covariance = ep * ec * m.covariance;
    let variance_diff = ep * ep * m.var_probe + ec * ec * m.var_conjugate
        - 2.0 * ep * ec * m.covariance
        + ep * (1.0 - ep) * m.mean_probe
        + ec * (1.0 - ec) * m.mean_conjugate;
    let mean_probe = ep * m.mean_probe;
    let mean_conjugate = ec * m.mean_conjugate;
    let snl = mean_probe + mean_conjugate;
    if !(snl > 0.0) {
        return Err(QuantumError::UndefinedSqueezing(point_label.to_owned()));
    }
    Ok(NoiseBudget {
        point_label: point_label.to_owned(),
        eta_probe: ep,
        eta_conjugate: ec,
        mean_probe,
        mean_conjugate,
        var_probe,
        var_conjugate,
        covariance,
        variance_diff,
        snl,
        squeezing_db: squeezing_db(variance_diff, snl)?,
    })
}

/// Noise budget after the full loss chain.
pub fn apply_loss_chain(
    source: &TwinBeamSource,
    chain: &LossChain,
    point_label: &str,
) -> Result<NoiseBudget, QuantumError> {
    chain.validate()?;
    propagate_moments(
        &twin_beam_moments(source),
        chain.probe_transmission(),
        chain.conjugate_transmission(),
        point_label,
    )
}

/// Squeezing after symmetric loss `eta` given the lossless value.
pub fn squeezing_after_symmetric_loss(lossless_db: f64, eta: f64) -> f64 {
    -10.0 * (eta * 10f64.powf(-lossless_db / 10.0) + (1.0 - eta)).log10()
}
