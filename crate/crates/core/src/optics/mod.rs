//! Reflectivity of a prism / metal film / analyte stack for TM-polarized
//! light, computed with the characteristic-matrix method.
//!
//! Angles are degrees at every public interface and radians internally.
//! Film thicknesses and wavelengths are in nanometres.

mod matrix;
mod prism;
mod stack;
mod sweep;

use num_complex::Complex64;
use thiserror::Error;

pub use matrix::{
    characteristic_matrix, reflection_coefficient, stack_reflectivity,
    stack_reflectivity_and_index_slope, tm_layer_params, CharacteristicMatrix, TmLayerParams,
};
pub use prism::PrismGeometry;
pub use stack::{Film, LayerStack, Medium};
pub use sweep::{reflectivity_sweep, resonance_angle_closed_form, DipCurve, Kretschmann};

/// Gold permittivity near 795 nm, close to the Johnson & Christy tabulation
/// (n ≈ 0.15, k ≈ 4.9).
pub const GOLD_PERMITTIVITY_795NM: Complex64 = Complex64::new(-23.6, 1.5);

/// BK7 at 795 nm.
pub const BK7_INDEX: f64 = 1.51;

pub const WATER_INDEX: f64 = 1.33;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("invalid prism geometry: {0}")]
    InvalidGeometry(String),
    #[error("angle {0} deg outside the valid range")]
    AngleOutOfRange(f64),
    #[error("layer index {0} does not exist in the stack")]
    NoSuchLayer(usize),
    #[error("medium '{0}' has zero permittivity")]
    DegenerateMedium(String),
    #[error("longitudinal wavevector vanishes in medium '{0}' (branch point)")]
    BranchPoint(String),
    #[error("film admittance is zero")]
    DegenerateAdmittance,
    #[error("reflection denominator vanishes at {0} deg")]
    ResonanceSingularity(f64),
    #[error("invalid sweep {min}..{max} step {step}")]
    InvalidSweep { min: f64, max: f64, step: f64 },
    #[error("no bound surface mode: Re(eps_metal) = {eps_metal}, Re(eps_analyte) = {eps_analyte}")]
    NoBoundMode { eps_metal: f64, eps_analyte: f64 },
    #[error("no resonance: sin(theta) = {sin_theta} exceeds 1 (prism index too low)")]
    NoResonance { sin_theta: f64 },
    #[error("reflectivity {target} not bracketed between {lo} and {hi} deg")]
    NotBracketed { target: f64, lo: f64, hi: f64 },
}
