use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{stack_reflectivity, stack_reflectivity_and_index_slope};
use super::{LayerStack, OpticsError, PrismGeometry};

/// A layer stack mounted on a prism, optionally including the TM Fresnel
/// losses at the entrance and exit faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kretschmann {
    pub stack: LayerStack,
    pub geometry: PrismGeometry,
    pub prism_correction: bool,
}

impl Kretschmann {
    pub fn new(stack: LayerStack, geometry: PrismGeometry, prism_correction: bool) -> Self {
        Self {
            stack,
            geometry,
            prism_correction,
        }
    }

    fn face_factor(&self, theta_deg: f64) -> f64 {
        if self.prism_correction {
            self.geometry.face_transmission(theta_deg)
        } else {
            1.0
        }
    }

    /// Measured reflectivity at internal angle `theta_deg`.
    pub fn reflectivity(&self, theta_deg: f64) -> Result<f64, OpticsError> {
        Ok(stack_reflectivity(&self.stack, theta_deg)? * self.face_factor(theta_deg))
    }

    /// Reflectivity with a different analyte index.
    pub fn reflectivity_at_index(&self, theta_deg: f64, n3: f64) -> Result<f64, OpticsError> {
        let stack = self.stack.with_analyte_index(n3);
        Ok(stack_reflectivity(&stack, theta_deg)? * self.face_factor(theta_deg))
    }

    /// Reflectivity and `dR/dn3` with a different analyte index.
    pub fn reflectivity_and_slope(&self, theta_deg: f64, n3: f64) -> Result<(f64, f64), OpticsError> {
        let stack = self.stack.with_analyte_index(n3);
        let (r, s) = stack_reflectivity_and_index_slope(&stack, theta_deg)?;
        let f = self.face_factor(theta_deg);
        Ok((r * f, s * f))
    }

    pub fn with_analyte_index(&self, n3: f64) -> Self {
        Self {
            stack: self.stack.with_analyte_index(n3),
            ..self.clone()
        }
    }

    /// Internal angle on the low-angle flank of the dip where the
    /// reflectivity equals `target`, found by bisection between
    /// `search_start_deg` and the resonance angle.
    pub fn left_flank_angle(
        &self,
        target: f64,
        search_start_deg: f64,
        resonance_deg: f64,
    ) -> Result<f64, OpticsError> {
        let f = |t: f64| self.reflectivity(t).map(|r| r - target);
        let (mut lo, mut hi) = (search_start_deg, resonance_deg);
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if !(flo > 0.0 && fhi < 0.0) {
            return Err(OpticsError::NotBracketed {
                target,
                lo: search_start_deg,
                hi: resonance_deg,
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Reflectivity versus internal angle with the located resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCurve {
    pub angles_deg: Vec<f64>,
    pub reflectivity: Vec<f64>,
    pub resonance_angle_deg: f64,
    pub min_reflectivity: f64,
    /// Set when the minimum sits on the sweep boundary.
    pub no_dip: bool,
    pub sensor: Kretschmann,
}

/// Angular sweep of the sensor reflectivity and location of the dip
/// minimum by a parabola through the three lowest neighbouring samples.
pub fn reflectivity_sweep(
    sensor: &Kretschmann,
    theta_min_deg: f64,
    theta_max_deg: f64,
    step_deg: f64,
) -> Result<DipCurve, OpticsError> {
    if !(theta_min_deg < theta_max_deg) || !(step_deg > 0.0) {
        return Err(OpticsError::InvalidSweep {
            min: theta_min_deg,
            max: theta_max_deg,
            step: step_deg,
        });
    }
    let n = ((theta_max_deg - theta_min_deg) / step_deg + 1e-9).floor() as usize + 1;
    let angles: Vec<f64> = (0..n).map(|i| theta_min_deg + i as f64 * step_deg).collect();
    let reflectivity = angles
        .par_iter()
        .map(|&t| sensor.reflectivity(t))
        .collect::<Result<Vec<_>, _>>()?;

    let (imin, &rmin) = reflectivity
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("sweep has at least one point");

    let (resonance, min_r, no_dip) = if imin == 0 || imin + 1 == n {
        (angles[imin], rmin, true)
    } else {
        let (y0, y1, y2) = (reflectivity[imin - 1], rmin, reflectivity[imin + 1]);
        let curvature = y0 - 2.0 * y1 + y2;
        if curvature > 0.0 {
            let offset = 0.5 * (y0 - y2) / curvature;
            let vertex = y1 - 0.25 * (y0 - y2) * offset;
            (angles[imin] + offset * step_deg, vertex.max(0.0), false)
        } else {
            (angles[imin], y1, false)
        }
    };

    if no_dip {
        log::warn!(
            "no interior reflectivity minimum in {theta_min_deg}..{theta_max_deg} deg"
        );
    }

    Ok(DipCurve {
        angles_deg: angles,
        reflectivity,
        resonance_angle_deg: resonance,
        min_reflectivity: min_r,
        no_dip,
        sensor: sensor.clone(),
    })
}

/// Lossless estimate of the resonance angle from the surface-plasmon
/// dispersion relation, using only the real parts of the permittivities.
pub fn resonance_angle_closed_form(
    eps_metal: Complex64,
    eps_analyte: Complex64,
    prism_index: f64,
) -> Result<f64, OpticsError> {
    let (em, ed) = (eps_metal.re, eps_analyte.re);
    if !(em < 0.0 && -em > ed && ed > 0.0) {
        return Err(OpticsError::NoBoundMode {
            eps_metal: em,
            eps_analyte: ed,
        });
    }
    let s = (em * ed / (em + ed)).sqrt() / prism_index;
    if s > 1.0 {
        return Err(OpticsError::NoResonance { sin_theta: s });
    }
    Ok(s.asin().to_degrees())
}
