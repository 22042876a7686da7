//! Prism geometry: mapping between the external (air-side) angle and the
//! internal angle at the metal film, plus TM Fresnel losses at the prism faces.

use serde::{Deserialize, Serialize};

use super::OpticsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrismGeometry {
    /// Angle between the entrance-face normal and the hypotenuse normal.
    /// 45° for a right-angle prism.
    pub face_angle_deg: f64,
    pub prism_index: f64,
}

impl PrismGeometry {
    pub fn new(face_angle_deg: f64, prism_index: f64) -> Result<Self, OpticsError> {
        let g = Self {
            face_angle_deg,
            prism_index,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn right_angle(prism_index: f64) -> Result<Self, OpticsError> {
        Self::new(45.0, prism_index)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.face_angle_deg > 0.0 && self.face_angle_deg < 90.0) {
            return Err(OpticsError::InvalidGeometry(format!(
                "face angle {} outside (0, 90)",
                self.face_angle_deg
            )));
        }
        if !(self.prism_index > 1.0) {
            return Err(OpticsError::InvalidGeometry(format!(
                "prism index {} must exceed 1",
                self.prism_index
            )));
        }
        Ok(())
    }

    /// Internal angle at the hypotenuse for an external angle measured from
    /// the entrance-face normal.
    pub fn external_to_internal(&self, phi_external_deg: f64) -> Result<f64, OpticsError> {
        if !(phi_external_deg.abs() < 90.0) {
            return Err(OpticsError::AngleOutOfRange(phi_external_deg));
        }
        let refracted = (phi_external_deg.to_radians().sin() / self.prism_index).asin();
        Ok(self.face_angle_deg + refracted.to_degrees())
    }

    pub fn internal_to_external(&self, theta_internal_deg: f64) -> Result<f64, OpticsError> {
        let s = self.prism_index * (theta_internal_deg - self.face_angle_deg).to_radians().sin();
        if s.abs() >= 1.0 {
            return Err(OpticsError::AngleOutOfRange(theta_internal_deg));
        }
        Ok(s.asin().to_degrees())
    }

    /// TM power transmission through entrance and exit faces for a given
    /// internal angle. The exit face is the mirror image of the entrance face,
    /// so both crossings see the same angle pair and the factor is `T_p^2`.
    /// Zero when the beam would be totally reflected at a face.
    pub fn face_transmission(&self, theta_internal_deg: f64) -> f64 {
        let inside = (theta_internal_deg - self.face_angle_deg).to_radians();
        let s = self.prism_index * inside.sin();
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let outside = s.asin();
        let n = self.prism_index;
        // air (n = 1) at `outside`, glass at `inside`
        let rp = (n * outside.cos() - inside.cos()) / (n * outside.cos() + inside.cos());
        let tp = 1.0 - rp * rp;
        tp * tp
    }
}
