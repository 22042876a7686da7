//! Parameter recovery: binding rates from sensorgrams, source gain from
//! squeezing, and the index resolution gained by squeezed light.

mod kinetics_fit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::KineticsError;
use crate::optics::{DipCurve, OpticsError};

pub use kinetics_fit::{
    fit_kinetics, FitOptions, FitParameter, FitResult, KineticGuess, KineticsProblem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("reflectivity is insensitive to index at {angle_deg} deg (slope {slope})")]
    DegenerateSensitivity { angle_deg: f64, slope: f64 },
    #[error("squeezing {0} dB must be >= 0")]
    NegativeSqueezing(f64),
    #[error("{measured_db} dB cannot be observed after transmission {eta}")]
    UnreachableSqueezing { measured_db: f64, eta: f64 },
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

/// Gain whose lossless squeezing `10 log10(2g - 1)` equals `squeezing_db`.
pub fn fit_gain(squeezing_db: f64) -> Result<f64, FitError> {
    if !(squeezing_db >= 0.0) {
        return Err(FitError::NegativeSqueezing(squeezing_db));
    }
    Ok((10f64.powf(squeezing_db / 10.0) + 1.0) / 2.0)
}

/// Gain that produces `measured_db` after a symmetric transmission `eta`.
pub fn fit_gain_after_loss(measured_db: f64, eta: f64) -> Result<f64, FitError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(FitError::InvalidInput(format!("transmission {eta} outside (0, 1]")));
    }
    if !(measured_db >= 0.0) {
        return Err(FitError::NegativeSqueezing(measured_db));
    }
    let source_ratio = (10f64.powf(-measured_db / 10.0) - (1.0 - eta)) / eta;
    if !(source_ratio > 0.0) {
        return Err(FitError::UnreachableSqueezing { measured_db, eta });
    }
    fit_gain(-10.0 * source_ratio.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexResolution {
    /// `dR/dn` at the lock point.
    pub slope_per_riu: f64,
    pub delta_n_classical: f64,
    pub delta_n_quantum: f64,
}

/// Step used for the central-difference index slope.
const SLOPE_STEP_RIU: f64 = 1e-5;

/// Smallest index change resolvable at `locked_angle_deg` for a reflectivity
/// noise `noise_sigma`, with and without squeezing.
pub fn index_resolution(
    dip: &DipCurve,
    locked_angle_deg: f64,
    noise_sigma: f64,
    squeezing_db: f64,
) -> Result<IndexResolution, FitError> {
    if !(noise_sigma >= 0.0) {
        return Err(FitError::InvalidInput(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let sensor = &dip.sensor;
    let n3 = sensor.stack.exit.refractive_index().re;
    let up = sensor.reflectivity_at_index(locked_angle_deg, n3 + SLOPE_STEP_RIU)?;
    let down = sensor.reflectivity_at_index(locked_angle_deg, n3 - SLOPE_STEP_RIU)?;
    let slope = (up - down) / (2.0 * SLOPE_STEP_RIU);
    // a flank lock gives |dR/dn| of order 100 per RIU
    if !(slope.abs() > 1.0) {
        return Err(FitError::DegenerateSensitivity {
            angle_deg: locked_angle_deg,
            slope,
        });
    }
    let delta_n_classical = noise_sigma / slope.abs();
    Ok(IndexResolution {
        slope_per_riu: slope,
        delta_n_classical,
        delta_n_quantum: delta_n_classical * 10f64.powf(-squeezing_db / 20.0),
    })
}

/// Reflectivity noise for `photons` detected per sample,
/// `sqrt(R / N) 10^(-S/20)`.
pub fn reflectivity_noise_sigma(reflectivity: f64, photons: f64, squeezing_db: f64) -> f64 {
    (reflectivity.max(0.0) / photons).sqrt() * 10f64.powf(-squeezing_db / 20.0)
}

/// Adds shot-limited (optionally squeezed) Gaussian noise to a clean
/// reflectivity trace. The same seed gives the same normal draws at any
/// squeezing level.
pub fn add_reflectivity_noise(clean: &[f64], photons: f64, squeezing_db: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clean
        .iter()
        .map(|&r| {
            let z: f64 = rng.sample(StandardNormal);
            r + z * reflectivity_noise_sigma(r, photons, squeezing_db)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{reflectivity_sweep, Kretschmann, LayerStack, PrismGeometry, GOLD_PERMITTIVITY_795NM};
    use crate::quantum::{lossless_squeezing_db, squeezing_after_symmetric_loss};

    fn dip() -> DipCurve {
        let stack = LayerStack::kretschmann(1.51, GOLD_PERMITTIVITY_795NM, 50.0, 1.33, 795.0).unwrap();
        let s = Kretschmann::new(stack, PrismGeometry::right_angle(1.51).unwrap(), false);
        reflectivity_sweep(&s, 62.0, 70.0, 0.01).unwrap()
    }

    #[test]
    fn gain_inversion() {
        assert_eq!(fit_gain(0.0).unwrap(), 1.0);
        assert!((fit_gain(7.8).unwrap() - 3.51).abs() < 0.01);
        assert!((fit_gain(3.0103).unwrap() - 1.5).abs() < 1e-4);
        assert!(matches!(fit_gain(-1.0), Err(FitError::NegativeSqueezing(_))));
        for i in 0..=90 {
            let g = 1.0 + i as f64 * 0.1;
            assert!((fit_gain(lossless_squeezing_db(g).unwrap()).unwrap() - g).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_after_loss_inverts_symmetric_loss() {
        let g = fit_gain_after_loss(squeezing_after_symmetric_loss(7.8, 0.5), 0.5).unwrap();
        assert!((lossless_squeezing_db(g).unwrap() - 7.8).abs() < 1e-9);
        // loss caps what can be observed: at 26% transmission S < 1.31 dB
        assert!(matches!(
            fit_gain_after_loss(4.0, 0.26),
            Err(FitError::UnreachableSqueezing { .. })
        ));
    }

    #[test]
    fn resolution_scaling() {
        let d = dip();
        let lock = d.resonance_angle_deg - 0.5;
        let a = index_resolution(&d, lock, 1e-3, 0.0).unwrap();
        assert_eq!(a.delta_n_classical, a.delta_n_quantum);
        assert!(a.slope_per_riu > 0.0);
        let b = index_resolution(&d, lock, 1e-3, 4.0).unwrap();
        assert!((b.delta_n_quantum / b.delta_n_classical - 10f64.powf(-0.2)).abs() < 1e-12);
        let c = index_resolution(&d, lock, 2e-3, 4.0).unwrap();
        assert!((c.delta_n_classical / b.delta_n_classical - 2.0).abs() < 1e-12);
        assert!((c.delta_n_quantum / b.delta_n_quantum - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_helper() {
        assert!((reflectivity_noise_sigma(0.25, 1e6, 0.0) - 5e-4).abs() < 1e-15);
        let clean = vec![0.4; 100];
        let a = add_reflectivity_noise(&clean, 1e6, 0.0, 9);
        let b = add_reflectivity_noise(&clean, 1e6, 4.0, 9);
        for ((x, y), c) in a.iter().zip(&b).zip(&clean) {
            assert!(((y - c) / (x - c) - 10f64.powf(-0.2)).abs() < 1e-9);
        }
    }
}
