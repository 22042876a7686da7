//! Exact Gaussian-state description of the seeded two-mode squeezer,
//! used as an independent check on the bright-seed closed forms.
//!
//! Quadratures are ordered `(x_0, p_0, x_1, p_1, ...)` with
//! `a = (x + i p) / sqrt(2)`, so the vacuum covariance is `I / 2`.
//! For `Q = sum_k w_k n_k` the Wigner moment formulas give
//!
//! ```text
//! <Q>    = ½ dᵀ W d + ½ (Tr(W V) - Σ w_k)
//! Var(Q) = dᵀ W V W d + ½ Tr((W V)²) + ⅛ Tr((W Ω)²)
//! ```
//!
//! where `W` repeats each `w_k` on both quadratures of mode `k`. The first
//! term of each line is driven by the coherent seed and scales with the
//! seed photon number; the rest is the spontaneous (vacuum-seeded) part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LossChain, TwinBeamSource};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// A moment split into its seed-driven and vacuum-driven contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMoment {
    pub seeded: f64,
    pub vacuum: f64,
}

impl SplitMoment {
    pub fn total(&self) -> f64 {
        self.seeded + self.vacuum
    }
}

impl GaussianState {
    pub fn vacuum(modes: usize) -> Self {
        Self {
            mean: DVector::zeros(2 * modes),
            covariance: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    /// Displaces `mode` by a real coherent amplitude `alpha`.
    pub fn displace(mut self, mode: usize, alpha: f64) -> Self {
        self.mean[2 * mode] += std::f64::consts::SQRT_2 * alpha;
        self
    }

    pub fn apply_symplectic(mut self, s: &DMatrix<f64>) -> Self {
        self.mean = s * &self.mean;
        self.covariance = s * &self.covariance * s.transpose();
        self
    }

    /// `a -> a cosh r + b† sinh r`, `b -> b cosh r + a† sinh r`.
    pub fn two_mode_squeeze(self, a: usize, b: usize, r: f64) -> Self {
        let n = 2 * self.modes();
        let (c, s) = (r.cosh(), r.sinh());
        let mut sym = DMatrix::identity(n, n);
        let (xa, pa, xb, pb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        sym[(xa, xa)] = c;
        sym[(xa, xb)] = s;
        sym[(pa, pa)] = c;
        sym[(pa, pb)] = -s;
        sym[(xb, xb)] = c;
        sym[(xb, xa)] = s;
        sym[(pb, pb)] = c;
        sym[(pb, pa)] = -s;
        self.apply_symplectic(&sym)
    }

    /// Mixes `mode` with a fresh vacuum ancilla on a beamsplitter of
    /// transmission `eta`, then traces the ancilla out.
    pub fn attenuate(self, mode: usize, eta: f64) -> Self {
        let n = self.mean.len();
        let mut mean = DVector::zeros(n + 2);
        mean.rows_mut(0, n).copy_from(&self.mean);
        let mut cov = DMatrix::identity(n + 2, n + 2) * 0.5;
        cov.view_mut((0, 0), (n, n)).copy_from(&self.covariance);
        let (t, r) = (eta.sqrt(), (1.0 - eta).sqrt());
        let mut bs = DMatrix::identity(n + 2, n + 2);
        for q in 0..2 {
            let (m, anc) = (2 * mode + q, n + q);
            bs[(m, m)] = t;
            bs[(m, anc)] = r;
            bs[(anc, m)] = -r;
            bs[(anc, anc)] = t;
        }
        let mean = &bs * mean;
        let cov = &bs * cov * bs.transpose();
        Self {
            mean: mean.rows(0, n).into_owned(),
            covariance: cov.view((0, 0), (n, n)).into_owned(),
        }
    }

    fn weight_matrix(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut diag = DVector::zeros(self.mean.len());
        for (k, w) in weights.iter().enumerate() {
            diag[2 * k] = *w;
            diag[2 * k + 1] = *w;
        }
        DMatrix::from_diagonal(&diag)
    }

    fn symplectic_form(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        let mut omega = DMatrix::zeros(n, n);
        for k in 0..n / 2 {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        omega
    }

    /// Mean of `sum_k w_k n_k`.
    pub fn number_mean(&self, weights: &[f64]) -> SplitMoment {
        let w = self.weight_matrix(weights);
        let seeded = 0.5 * self.mean.dot(&(&w * &self.mean));
        let vacuum = 0.5 * ((&w * &self.covariance).trace() - weights.iter().sum::<f64>());
        SplitMoment { seeded, vacuum }
    }

    /// Variance of `sum_k w_k n_k`.
    pub fn number_variance(&self, weights: &[f64]) -> SplitMoment {
        let w = self.weight_matrix(weights);
        let wv = &w * &self.covariance;
        let seeded = self.mean.dot(&(&wv * &w * &self.mean));
        let wo = &w * self.symplectic_form();
        let vacuum = 0.5 * (&wv * &wv).trace() + 0.125 * (&wo * &wo).trace();
        SplitMoment { seeded, vacuum }
    }
}

/// Photon-number statistics of the detected twin beams from the exact
/// Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleMoments {
    pub mean_probe: SplitMoment,
    pub mean_conjugate: SplitMoment,
    pub var_probe: SplitMoment,
    pub var_conjugate: SplitMoment,
    pub variance_diff: SplitMoment,
}

impl OracleMoments {
    pub fn covariance(&self) -> SplitMoment {
        let half = |a: f64, b: f64, d: f64| 0.5 * (a + b - d);
        SplitMoment {
            seeded: half(self.var_probe.seeded, self.var_conjugate.seeded, self.variance_diff.seeded),
            vacuum: half(self.var_probe.vacuum, self.var_conjugate.vacuum, self.variance_diff.vacuum),
        }
    }
}

/// Builds the seeded squeezer output, applies every loss stage as its own
/// beamsplitter, and evaluates the photon-number moments.
pub fn covariance_oracle_variance(source: &TwinBeamSource, chain: &LossChain) -> OracleMoments {
    const PROBE: usize = 0;
    const CONJ: usize = 1;
    let mut state = GaussianState::vacuum(2)
        .displace(PROBE, source.seed_flux.sqrt())
        .two_mode_squeeze(PROBE, CONJ, source.squeeze_param());
    for stage in &chain.probe {
        state = state.attenuate(PROBE, stage.transmission);
    }
    for stage in &chain.conjugate {
        state = state.attenuate(CONJ, stage.transmission);
    }
    OracleMoments {
        mean_probe: state.number_mean(&[1.0, 0.0]),
        mean_conjugate: state.number_mean(&[0.0, 1.0]),
        var_probe: state.number_variance(&[1.0, 0.0]),
        var_conjugate: state.number_variance(&[0.0, 1.0]),
        variance_diff: state.number_variance(&[1.0, -1.0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::LossStage;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn vacuum_has_no_photons() {
        let v = GaussianState::vacuum(2);
        assert_eq!(v.number_mean(&[1.0, 1.0]).total(), 0.0);
        assert!(v.number_variance(&[1.0, -1.0]).total().abs() < 1e-15);
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let s = GaussianState::vacuum(1).displace(0, 100.0);
        assert!(close(s.number_mean(&[1.0]).total(), 1e4, 1e-14));
        assert!(close(s.number_variance(&[1.0]).total(), 1e4, 1e-14));
    }

    #[test]
    fn two_mode_squeezed_vacuum_is_thermal_per_mode() {
        let r = 0.8f64;
        let s = GaussianState::vacuum(2).two_mode_squeeze(0, 1, r);
        let nbar = r.sinh().powi(2);
        assert!(close(s.number_mean(&[1.0, 0.0]).total(), nbar, 1e-13));
        assert!(close(s.number_variance(&[1.0, 0.0]).total(), nbar * (nbar + 1.0), 1e-13));
        assert!(s.number_variance(&[1.0, -1.0]).total().abs() < 1e-12);
    }

    #[test]
    fn attenuated_coherent_state_stays_poissonian() {
        let s = GaussianState::vacuum(1).displace(0, 30.0).attenuate(0, 0.3);
        assert!(close(s.number_mean(&[1.0]).total(), 270.0, 1e-13));
        assert!(close(s.number_variance(&[1.0]).total(), 270.0, 1e-13));
    }

    #[test]
    fn squeezing_is_symplectic() {
        let s = GaussianState::vacuum(2).two_mode_squeeze(0, 1, 0.7);
        // det of a pure two-mode state covariance is (1/2)^4
        assert!((s.covariance.determinant() - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn lossless_difference_is_exactly_seed_number() {
        for g in [1.0, 2.0, 3.51, 5.0] {
            let src = TwinBeamSource::new(g, 1e6).unwrap();
            let m = covariance_oracle_variance(&src, &LossChain::lossless());
            assert!(close(m.variance_diff.total(), 1e6, 1e-10), "g {g}");
            assert!(m.variance_diff.vacuum.abs() < 1e-6);
        }
    }

    #[test]
    fn coherent_seed_without_gain() {
        let src = TwinBeamSource::new(1.0, 1e4).unwrap();
        let m = covariance_oracle_variance(&src, &LossChain::lossless());
        assert!(close(m.variance_diff.total(), 1e4, 1e-13));
        assert_eq!(m.mean_conjugate.total(), 0.0);
    }

    #[test]
    fn vacuum_part_matches_spontaneous_emission() {
        // lossless: each mode carries sinh^2 r spontaneous photons with
        // thermal variance g(g-1) and perfect correlation
        let g = 3.51;
        let src = TwinBeamSource::new(g, 1e6).unwrap();
        let chain = LossChain::symmetric(vec![LossStage::new("x", 1.0)]).unwrap();
        let m = covariance_oracle_variance(&src, &chain);
        assert!(close(m.mean_probe.vacuum, g - 1.0, 1e-9));
        assert!(close(m.var_probe.vacuum, g * (g - 1.0), 1e-9));
        assert!(close(m.covariance().vacuum, g * (g - 1.0), 1e-9));
    }
}
