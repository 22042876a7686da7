//! Characteristic-matrix treatment of TM (p-polarized) waves in a
//! stratified medium.
//!
//! All transverse wavevectors are expressed in units of the vacuum
//! wavenumber, so `kz_l = sqrt(eps_l - eps_1 sin^2 theta_1)` and the TM
//! admittance is `q_l = cos(theta_l) / sqrt(eps_l) = kz_l / eps_l`.

use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LayerStack, OpticsError};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Phase thickness and TM admittance of one layer at a given angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmLayerParams {
    /// Phase thickness `h k0 kz`; zero for the semi-infinite media.
    pub beta: Complex64,
    /// TM admittance `q = kz / eps`.
    pub q: Complex64,
}

/// 2×2 complex matrix relating tangential fields across a film.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicMatrix(pub [[Complex64; 2]; 2]);

impl CharacteristicMatrix {
    pub fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    /// Single homogeneous film.
    pub fn film(beta: Complex64, q: Complex64) -> Result<Self, OpticsError> {
        if q == ZERO {
            return Err(OpticsError::DegenerateAdmittance);
        }
        let (c, s) = (beta.cos(), beta.sin());
        Ok(Self([[c, -I / q * s], [-I * q * s, c]]))
    }

    pub fn determinant(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn m11(&self) -> Complex64 {
        self.0[0][0]
    }
    pub fn m12(&self) -> Complex64 {
        self.0[0][1]
    }
    pub fn m21(&self) -> Complex64 {
        self.0[1][0]
    }
    pub fn m22(&self) -> Complex64 {
        self.0[1][1]
    }
}

impl Mul for CharacteristicMatrix {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self(out)
    }
}

/// Normalized longitudinal wavevector with `Im >= 0` (fields decay away from
/// the interfaces). For a lossless propagating wave `Re >= 0`.
pub(crate) fn longitudinal_wavevector(eps: Complex64, tangential_sq: f64) -> Complex64 {
    let kz = (eps - tangential_sq).sqrt();
    if kz.im < 0.0 || (kz.im == 0.0 && kz.re < 0.0) {
        -kz
    } else {
        kz
    }
}

fn check_angle(theta1_deg: f64) -> Result<f64, OpticsError> {
    if !(theta1_deg >= 0.0 && theta1_deg < 90.0) {
        return Err(OpticsError::AngleOutOfRange(theta1_deg));
    }
    Ok(theta1_deg.to_radians())
}

/// `eps_1 sin^2 theta_1`, the squared tangential wavevector.
fn tangential_sq(stack: &LayerStack, theta1: f64) -> f64 {
    stack.incidence.permittivity.re * theta1.sin().powi(2)
}

fn layer_params(
    stack: &LayerStack,
    layer_index: usize,
    kx2: f64,
) -> Result<TmLayerParams, OpticsError> {
    let medium = stack
        .layer_medium(layer_index)
        .ok_or(OpticsError::NoSuchLayer(layer_index))?;
    let eps = medium.permittivity;
    if eps == ZERO {
        return Err(OpticsError::DegenerateMedium(medium.label.clone()));
    }
    let kz_sq = eps - kx2;
    if kz_sq.norm() == 0.0 {
        return Err(OpticsError::BranchPoint(medium.label.clone()));
    }
    let kz = longitudinal_wavevector(eps, kx2);
    let beta = match stack.layer_thickness_nm(layer_index) {
        Some(h) => kz * (h * stack.wavenumber()),
        None => ZERO,
    };
    // q = sqrt(mu) cos(theta) / sqrt(eps) with cos(theta) = kz / sqrt(eps)
    let q = kz / eps * medium.permeability().sqrt();
    Ok(TmLayerParams { beta, q })
}

/// Phase thickness and TM admittance of layer `layer_index`
/// (0 = incidence medium, 1..=films, films+1 = exit medium).
pub fn tm_layer_params(
    stack: &LayerStack,
    layer_index: usize,
    theta1_deg: f64,
) -> Result<TmLayerParams, OpticsError> {
    let theta1 = check_angle(theta1_deg)?;
    layer_params(stack, layer_index, tangential_sq(stack, theta1))
}

fn matrix_at(stack: &LayerStack, kx2: f64) -> Result<CharacteristicMatrix, OpticsError> {
    (1..=stack.films.len()).try_fold(CharacteristicMatrix::identity(), |acc, l| {
        let p = layer_params(stack, l, kx2)?;
        Ok(acc * CharacteristicMatrix::film(p.beta, p.q)?)
    })
}

/// Ordered product of the film matrices, incidence side first.
pub fn characteristic_matrix(
    stack: &LayerStack,
    theta1_deg: f64,
) -> Result<CharacteristicMatrix, OpticsError> {
    let theta1 = check_angle(theta1_deg)?;
    matrix_at(stack, tangential_sq(stack, theta1))
}

struct Evaluation {
    r: Complex64,
    q1: Complex64,
    denominator: Complex64,
    matrix: CharacteristicMatrix,
}

fn evaluate(stack: &LayerStack, theta1_deg: f64) -> Result<Evaluation, OpticsError> {
    let theta1 = check_angle(theta1_deg)?;
    let kx2 = tangential_sq(stack, theta1);
    let m = matrix_at(stack, kx2)?;
    let q1 = layer_params(stack, 0, kx2)?.q;
    let q3 = layer_params(stack, stack.layer_count() - 1, kx2)?.q;
    let a = (m.m11() + m.m12() * q3) * q1;
    let b = m.m21() + m.m22() * q3;
    let denominator = a + b;
    if denominator.norm() == 0.0 {
        return Err(OpticsError::ResonanceSingularity(theta1_deg));
    }
    Ok(Evaluation {
        r: (a - b) / denominator,
        q1,
        denominator,
        matrix: m,
    })
}

/// TM amplitude reflection coefficient of the stack.
pub fn reflection_coefficient(stack: &LayerStack, theta1_deg: f64) -> Result<Complex64, OpticsError> {
    evaluate(stack, theta1_deg).map(|e| e.r)
}

/// `|r|^2` of the bare stack (no prism-face losses).
pub fn stack_reflectivity(stack: &LayerStack, theta1_deg: f64) -> Result<f64, OpticsError> {
    reflection_coefficient(stack, theta1_deg).map(|r| r.norm_sqr())
}

/// `|r|^2` and its derivative with respect to a real analyte index `n3`.
///
/// `dr/dq3 = -2 q1 det(M) / D^2` and `dq3/deps3 = 1/(2 kz3 eps3) - kz3/eps3^2`.
pub fn stack_reflectivity_and_index_slope(
    stack: &LayerStack,
    theta1_deg: f64,
) -> Result<(f64, f64), OpticsError> {
    let e = evaluate(stack, theta1_deg)?;
    let theta1 = theta1_deg.to_radians();
    let kx2 = tangential_sq(stack, theta1);
    let eps3 = stack.exit.permittivity;
    let kz3 = longitudinal_wavevector(eps3, kx2);
    if kz3.norm() == 0.0 {
        return Err(OpticsError::BranchPoint(stack.exit.label.clone()));
    }
    let dq3_deps3 = 0.5 / (kz3 * eps3) - kz3 / (eps3 * eps3);
    let n3 = stack.exit.refractive_index();
    let dr_dq3 = -2.0 * e.q1 * e.matrix.determinant() / (e.denominator * e.denominator);
    let dr_dn3 = dr_dq3 * dq3_deps3 * (2.0 * n3);
    let slope = 2.0 * (e.r.conj() * dr_dn3).re;
    Ok((e.r.norm_sqr(), slope))
}
