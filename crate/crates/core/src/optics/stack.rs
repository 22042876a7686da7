use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::OpticsError;

/// A homogeneous, isotropic, non-magnetic medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub label: String,
    /// Relative permittivity. `n²` for transparent media.
    pub permittivity: Complex64,
}

impl Medium {
    pub fn new(label: impl Into<String>, permittivity: Complex64) -> Self {
        Self {
            label: label.into(),
            permittivity,
        }
    }

    /// Transparent medium from its real refractive index.
    pub fn from_index(label: impl Into<String>, index: f64) -> Self {
        Self::new(label, Complex64::new(index * index, 0.0))
    }

    /// Relative permeability; optical-frequency media here are non-magnetic.
    pub fn permeability(&self) -> f64 {
        1.0
    }

    /// Refractive index with non-negative extinction coefficient.
    pub fn refractive_index(&self) -> Complex64 {
        let n = self.permittivity.sqrt();
        if n.re < 0.0 {
            -n
        } else {
            n
        }
    }
}

/// A film of finite thickness inside the stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Film {
    pub medium: Medium,
    pub thickness_nm: f64,
}

/// Stratified medium: semi-infinite incidence medium (the prism), a
/// sequence of films, and a semi-infinite exit medium (the analyte).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub incidence: Medium,
    pub films: Vec<Film>,
    pub exit: Medium,
    pub vacuum_wavelength_nm: f64,
}

impl LayerStack {
    pub fn new(
        incidence: Medium,
        films: Vec<Film>,
        exit: Medium,
        vacuum_wavelength_nm: f64,
    ) -> Result<Self, OpticsError> {
        let stack = Self {
            incidence,
            films,
            exit,
            vacuum_wavelength_nm,
        };
        stack.validate()?;
        Ok(stack)
    }

    /// Prism / single gold film / analyte, the Kretschmann arrangement.
    pub fn kretschmann(
        prism_index: f64,
        metal_permittivity: Complex64,
        metal_thickness_nm: f64,
        analyte_index: f64,
        vacuum_wavelength_nm: f64,
    ) -> Result<Self, OpticsError> {
        Self::new(
            Medium::from_index("prism", prism_index),
            vec![Film {
                medium: Medium::new("gold", metal_permittivity),
                thickness_nm: metal_thickness_nm,
            }],
            Medium::from_index("analyte", analyte_index),
            vacuum_wavelength_nm,
        )
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.vacuum_wavelength_nm > 0.0) || !self.vacuum_wavelength_nm.is_finite() {
            return Err(OpticsError::InvalidStack(format!(
                "vacuum wavelength must be positive, got {}",
                self.vacuum_wavelength_nm
            )));
        }
        if let Some(f) = self
            .films
            .iter()
            .find(|f| !(f.thickness_nm >= 0.0) || !f.thickness_nm.is_finite())
        {
            return Err(OpticsError::InvalidStack(format!(
                "film '{}' has invalid thickness {}",
                f.medium.label, f.thickness_nm
            )));
        }
        let eps1 = self.incidence.permittivity;
        if eps1.im != 0.0 || eps1.re <= 0.0 {
            return Err(OpticsError::InvalidStack(
                "incidence medium must be transparent with positive permittivity".into(),
            ));
        }
        Ok(())
    }

    /// Vacuum wavenumber ω/c in nm⁻¹.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.vacuum_wavelength_nm
    }

    /// Number of addressable layers: incidence, films, exit.
    pub fn layer_count(&self) -> usize {
        self.films.len() + 2
    }

    pub fn layer_medium(&self, index: usize) -> Option<&Medium> {
        match index {
            0 => Some(&self.incidence),
            i if i <= self.films.len() => Some(&self.films[i - 1].medium),
            i if i == self.films.len() + 1 => Some(&self.exit),
            _ => None,
        }
    }

    pub fn layer_thickness_nm(&self, index: usize) -> Option<f64> {
        if index >= 1 && index <= self.films.len() {
            Some(self.films[index - 1].thickness_nm)
        } else {
            None
        }
    }

    /// Copy of the stack with a different transparent analyte index.
    pub fn with_analyte_index(&self, index: f64) -> Self {
        let mut s = self.clone();
        s.exit.permittivity = Complex64::new(index * index, 0.0);
        s
    }

    pub fn prism_index(&self) -> f64 {
        self.incidence.permittivity.re.sqrt()
    }
}
