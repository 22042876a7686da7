//! JSON run configuration. Every block rejects unknown keys.

use plasmon_squeeze::fitting::{fit_gain, fit_gain_after_loss, FitOptions, KineticGuess};
use plasmon_squeeze::kinetics::{
    BindingModel, ConcentrationSchedule, ConcentrationStep, IndexMap, DEFAULT_MAX_STEP_S,
};
use plasmon_squeeze::optics::{
    Kretschmann, LayerStack, PrismGeometry, BK7_INDEX, GOLD_PERMITTIVITY_795NM, WATER_INDEX,
};
use plasmon_squeeze::quantum::{LossChain, LossStage, TwinBeamSource};
use plasmon_squeeze::signal::{AcquisitionSpec, ModulationSpec, NoiseModel, SidebandBand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub rng_seed: u64,
    pub optics: Option<OpticsConfig>,
    pub sweep: Option<SweepConfig>,
    pub lock: Option<LockConfig>,
    pub source: Option<SourceConfig>,
    pub losses: Option<LossConfig>,
    pub budget: Option<BudgetConfig>,
    pub kinetics: Option<KineticsConfig>,
    pub acquisition: Option<AcquisitionConfig>,
    pub modulation: Option<ModulationSpec>,
    pub snr: Option<SnrConfig>,
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<ComplexValue> for Complex64 {
    fn from(c: ComplexValue) -> Self {
        Complex64::new(c.re, c.im)
    }
}

fn default_prism_index() -> f64 {
    BK7_INDEX
}
fn default_face_angle() -> f64 {
    45.0
}
fn default_gold() -> ComplexValue {
    ComplexValue {
        re: GOLD_PERMITTIVITY_795NM.re,
        im: GOLD_PERMITTIVITY_795NM.im,
    }
}
fn default_thickness() -> f64 {
    50.0
}
fn default_analyte() -> f64 {
    WATER_INDEX
}
fn default_wavelength() -> f64 {
    795.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    #[serde(default = "default_prism_index")]
    pub prism_index: f64,
    #[serde(default = "default_face_angle")]
    pub face_angle_deg: f64,
    #[serde(default = "default_gold")]
    pub gold_permittivity: ComplexValue,
    #[serde(default = "default_thickness")]
    pub gold_thickness_nm: f64,
    #[serde(default = "default_analyte")]
    pub analyte_index: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    /// Include the TM Fresnel losses of the prism faces.
    #[serde(default = "yes")]
    pub prism_correction: bool,
}

impl OpticsConfig {
    pub fn sensor(&self) -> Result<Kretschmann, CliError> {
        let stack = LayerStack::kretschmann(
            self.prism_index,
            self.gold_permittivity.into(),
            self.gold_thickness_nm,
            self.analyte_index,
            self.wavelength_nm,
        )
        .map_err(CliError::config)?;
        let geometry = PrismGeometry::new(self.face_angle_deg, self.prism_index).map_err(CliError::config)?;
        Ok(Kretschmann::new(stack, geometry, self.prism_correction))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub min_deg: f64,
    pub max_deg: f64,
    pub step_deg: f64,
}

/// Interrogation angle: explicit, or on the low-angle flank where the
/// reflectivity equals a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockConfig {
    pub angle_deg: Option<f64>,
    pub target_reflectivity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub gain: Option<f64>,
    pub squeezing_db: Option<f64>,
    /// Symmetric transmission at which `squeezing_db` was observed; the
    /// gain is calibrated to reproduce it there.
    pub squeezing_measured_after_transmission: Option<f64>,
    /// Seed photons per analysis interval.
    pub seed_photons: f64,
}

impl SourceConfig {
    pub fn source(&self) -> Result<TwinBeamSource, CliError> {
        let gain = match (self.gain, self.squeezing_db) {
            (Some(g), None) => {
                if self.squeezing_measured_after_transmission.is_some() {
                    return Err(CliError::Config(
                        "source.squeezing_measured_after_transmission needs squeezing_db, not gain".into(),
                    ));
                }
                g
            }
            (None, Some(s)) => match self.squeezing_measured_after_transmission {
                Some(eta) => fit_gain_after_loss(s, eta),
                None => fit_gain(s),
            }
            .map_err(CliError::config)?,
            _ => {
                return Err(CliError::Config(
                    "source needs exactly one of 'gain' and 'squeezing_db'".into(),
                ))
            }
        };
        TwinBeamSource::new(gain, self.seed_photons).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub label: String,
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub probe: Vec<StageConfig>,
    #[serde(default)]
    pub conjugate: Vec<StageConfig>,
    /// Attenuate the conjugate exactly like the probe, ignoring `conjugate`.
    #[serde(default = "yes")]
    pub matched: bool,
}

impl LossConfig {
    pub fn chain(&self) -> Result<LossChain, CliError> {
        let stages = |v: &[StageConfig]| -> Vec<LossStage> {
            v.iter().map(|s| LossStage::new(s.label.clone(), s.transmission)).collect()
        };
        let conjugate = if self.matched { stages(&self.probe) } else { stages(&self.conjugate) };
        LossChain::new(stages(&self.probe), conjugate).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetPoint {
    pub label: String,
    /// Number of leading loss stages on each arm before this point.
    pub stages: usize,
    /// Reference squeezing reported for this point, shown next to the model.
    pub reference_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub points: Vec<BudgetPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStep {
    pub start_s: f64,
    pub concentration_m: f64,
}

fn one() -> f64 {
    1.0
}
fn default_max_step() -> f64 {
    DEFAULT_MAX_STEP_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexMapConfig {
    pub n_buffer: f64,
    pub delta_n_max: f64,
    #[serde(default)]
    pub bulk_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsConfig {
    pub ka: f64,
    pub kd: f64,
    #[serde(default = "one")]
    pub gamma_max: f64,
    #[serde(default)]
    pub gamma0: f64,
    pub schedule: Vec<ScheduleStep>,
    pub map: IndexMapConfig,
    pub duration_s: f64,
    pub sample_interval_s: f64,
    #[serde(default = "default_max_step")]
    pub max_step_s: f64,
}

impl KineticsConfig {
    pub fn model(&self) -> Result<BindingModel, CliError> {
        let m = BindingModel {
            ka: self.ka,
            kd: self.kd,
            gamma_max: self.gamma_max,
            gamma0: self.gamma0,
            schedule: ConcentrationSchedule {
                steps: self
                    .schedule
                    .iter()
                    .map(|s| ConcentrationStep {
                        start_s: s.start_s,
                        concentration_m: s.concentration_m,
                    })
                    .collect(),
            },
        };
        m.validate().map_err(CliError::config)?;
        Ok(m)
    }

    pub fn index_map(&self) -> Result<IndexMap, CliError> {
        let map = IndexMap {
            n_buffer: self.map.n_buffer,
            delta_n_max: self.map.delta_n_max,
            bulk_step: self.map.bulk_step,
        };
        map.validate().map_err(CliError::config)?;
        Ok(map)
    }

    pub fn time_grid(&self) -> Result<Vec<f64>, CliError> {
        if !(self.duration_s > 0.0) || !(self.sample_interval_s > 0.0) {
            return Err(CliError::Config(
                "kinetics.duration_s and sample_interval_s must be positive".into(),
            ));
        }
        let n = (self.duration_s / self.sample_interval_s + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| i as f64 * self.sample_interval_s).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub sample_rate_hz: f64,
    pub segment_length: usize,
    pub segments_per_point: usize,
    #[serde(default)]
    pub band: SidebandBand,
    #[serde(default)]
    pub dark_noise_variance: f64,
}

impl AcquisitionConfig {
    pub fn spec(&self, seed: u64) -> Result<AcquisitionSpec, CliError> {
        let a = AcquisitionSpec {
            sample_rate_hz: self.sample_rate_hz,
            segment_length: self.segment_length,
            segments_per_point: self.segments_per_point,
            rng_seed: seed,
            band: self.band,
            dark_noise_variance: self.dark_noise_variance,
        };
        a.validate().map_err(CliError::config)?;
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrConfig {
    /// Sensorgram samples analysed, evenly spaced including both ends.
    pub points: usize,
    #[serde(default)]
    pub noise_model: NoiseModel,
    /// Also write the first squeezed segment's spectrum.
    #[serde(default = "yes")]
    pub dump_spectrum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub initial_guess: KineticGuess,
    /// CSV with `t_s,reflectivity` columns; synthetic data when absent.
    pub data_csv: Option<String>,
    /// Detected photons per sample setting the synthetic shot noise.
    pub photons_per_sample: f64,
    #[serde(default)]
    pub squeezing_db: f64,
    #[serde(default)]
    pub options: Option<FitOptions>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        match path {
            None => Self::parse(DEFAULT_CONFIG),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("reading {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Canonical JSON: object keys sorted, defaults filled in.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        block
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing '{name}' block")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses_and_builds() {
        let c = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        c.optics.as_ref().unwrap().sensor().unwrap();
        c.source.as_ref().unwrap().source().unwrap();
        c.losses.as_ref().unwrap().chain().unwrap();
        let k = c.kinetics.as_ref().unwrap();
        k.model().unwrap();
        k.index_map().unwrap();
        assert!(k.time_grid().unwrap().len() > 10);
        c.acquisition.unwrap().spec(c.rng_seed).unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse(r#"{"rng_seed": 1, "colour": 3}"#).is_err());
        assert!(RunConfig::parse(r#"{"optics": {"prism_index": 1.5, "prism_idx": 1.5}}"#).is_err());
    }

    #[test]
    fn hash_ignores_key_order_and_whitespace() {
        let a = RunConfig::parse(r#"{"rng_seed": 3, "sweep": {"min_deg": 60, "max_deg": 70, "step_deg": 0.1}}"#).unwrap();
        let b = RunConfig::parse(
            r#"{ "sweep": {"step_deg": 0.1, "max_deg": 70, "min_deg": 60},
                 "rng_seed": 3 }"#,
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { rng_seed: 4, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn round_trip_is_hash_stable() {
        let c = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        let again = RunConfig::parse(&c.canonical_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
    }

    #[test]
    fn source_needs_exactly_one_strength() {
        let s = SourceConfig {
            gain: Some(2.0),
            squeezing_db: Some(3.0),
            squeezing_measured_after_transmission: None,
            seed_photons: 1e6,
        };
        assert!(s.source().is_err());
        let s = SourceConfig { gain: None, ..s };
        assert!((s.source().unwrap().gain - fit_gain(3.0).unwrap()).abs() < 1e-15);
    }
}
