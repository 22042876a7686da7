use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::FitError;
use crate::kinetics::{coverage_sensitivities, BindingModel, IndexMap, DEFAULT_MAX_STEP_S};
use crate::optics::Kretschmann;

const PARAM_NAMES: [&str; 3] = ["ka", "kd", "delta_n_max"];
const PARAM_UNITS: [&str; 3] = ["1/(M s)", "1/s", "RIU"];

/// Everything about a sensorgram except the three fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticsProblem {
    /// Schedule, saturation and initial coverage; its rates are ignored.
    pub model: BindingModel,
    /// Buffer index and bulk step; its `delta_n_max` is ignored.
    pub map: IndexMap,
    pub sensor: Kretschmann,
    pub locked_angle_deg: f64,
    pub times_s: Vec<f64>,
    pub max_step_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticGuess {
    pub ka: f64,
    pub kd: f64,
    pub delta_n_max: f64,
}

impl KineticGuess {
    fn to_log(self) -> Vector3<f64> {
        Vector3::new(self.ka.ln(), self.kd.ln(), self.delta_n_max.ln())
    }

    fn from_log(p: &Vector3<f64>) -> Self {
        Self {
            ka: p[0].exp(),
            kd: p[1].exp(),
            delta_n_max: p[2].exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Extra starts from scaled guesses when a run fails to converge.
    pub restarts: usize,
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            restarts: 3,
            step_tolerance: 1e-8,
            gradient_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Linearized covariance in natural units, ordered as `parameters`.
    pub covariance: [[f64; 3]; 3],
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub starts: usize,
    pub message: String,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.std_error)
    }
}

impl KineticsProblem {
    fn validate(&self) -> Result<(), FitError> {
        self.model.validate()?;
        self.map.validate()?;
        if self.times_s.len() < 10 {
            return Err(FitError::InvalidInput(format!(
                "need at least 10 samples, got {}",
                self.times_s.len()
            )));
        }
        Ok(())
    }

    fn model_with(&self, p: &KineticGuess) -> BindingModel {
        BindingModel {
            ka: p.ka,
            kd: p.kd,
            ..self.model.clone()
        }
    }

    fn index_at(&self, i: usize, coverage: f64, delta_n: f64) -> f64 {
        let map = IndexMap { delta_n_max: delta_n, ..self.map };
        let flowing = self.model.schedule.at(self.times_s[i]) > 0.0;
        map.index(coverage, self.model.gamma_max, flowing)
    }

    /// Reflectivity trace predicted for the given parameters.
    pub fn forward(&self, p: &KineticGuess) -> Result<Vec<f64>, FitError> {
        Ok(self.forward_with_jacobian(p)?.0)
    }

    /// Predicted reflectivity and its Jacobian with respect to
    /// `(ln ka, ln kd, ln delta_n_max)`.
    pub fn forward_with_jacobian(&self, p: &KineticGuess) -> Result<(Vec<f64>, Vec<[f64; 3]>), FitError> {
        let sens = coverage_sensitivities(&self.model_with(p), &self.times_s, self.max_step_s)?;
        let gmax = self.model.gamma_max;
        let mut r = Vec::with_capacity(sens.len());
        let mut jac = Vec::with_capacity(sens.len());
        for (i, &[g, dg_dka, dg_dkd]) in sens.iter().enumerate() {
            let g = g.clamp(0.0, gmax);
            let n = self.index_at(i, g, p.delta_n_max);
            let (refl, dr_dn) = self.sensor.reflectivity_and_slope(self.locked_angle_deg, n)?;
            let scale = dr_dn * p.delta_n_max / gmax;
            r.push(refl);
            jac.push([scale * dg_dka * p.ka, scale * dg_dkd * p.kd, scale * g]);
        }
        Ok((r, jac))
    }
}

struct Run {
    params: Vector3<f64>,
    cost: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    message: String,
}

fn normal_equations(res: &[f64], jac: &[[f64; 3]]) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (r, row) in res.iter().zip(jac) {
        let v = Vector3::from(*row);
        jtj += v * v.transpose();
        jtr += v * *r;
    }
    (jtj, jtr)
}

fn residuals(problem: &KineticsProblem, data: &[f64], p: &Vector3<f64>) -> Result<(Vec<f64>, Vec<[f64; 3]>), FitError> {
    let (model, jac) = problem.forward_with_jacobian(&KineticGuess::from_log(p))?;
    Ok((model.iter().zip(data).map(|(m, d)| m - d).collect(), jac))
}

fn cost_of(res: &[f64]) -> f64 {
    0.5 * res.iter().map(|r| r * r).sum::<f64>()
}

fn levenberg_marquardt(
    problem: &KineticsProblem,
    data: &[f64],
    start: Vector3<f64>,
    opts: &FitOptions,
) -> Result<Run, FitError> {
    let mut p = start;
    let (mut res, mut jac) = residuals(problem, data, &p)?;
    let mut cost = cost_of(&res);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut message = String::from("maximum iterations reached");
    let mut converged = false;
    let (mut jtj, mut jtr) = normal_equations(&res, &jac);
    for k in 0..3 {
        if jtj[(k, k)] == 0.0 {
            return Err(FitError::DegenerateFit(format!(
                "reflectivity does not depend on {}",
                PARAM_NAMES[k]
            )));
        }
    }
    while iterations < opts.max_iterations {
        if jtr.amax() < opts.gradient_tolerance {
            converged = true;
            message = "gradient below tolerance".into();
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)];
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-jtr));
            let trial = p + step;
            let (tres, tjac) = residuals(problem, data, &trial)?;
            let tcost = cost_of(&tres);
            if tcost.is_finite() && tcost <= cost {
                let rel = step.amax() / (1.0 + p.amax());
                p = trial;
                res = tres;
                jac = tjac;
                cost = tcost;
                (jtj, jtr) = normal_equations(&res, &jac);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < opts.step_tolerance {
                    converged = true;
                    message = "parameter step below tolerance".into();
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: a numerically exact minimum
            // when the gradient is already negligible relative to curvature
            let newton = jtj.cholesky().map(|c| c.solve(&jtr));
            let tiny = newton.is_some_and(|s| s.amax() / (1.0 + p.amax()) < opts.step_tolerance);
            converged = tiny;
            message = if tiny {
                "no further decrease; Newton step below tolerance".into()
            } else {
                "stalled: no decrease at maximum damping".into()
            };
            break;
        }
    }
    Ok(Run {
        params: p,
        cost,
        gradient_norm: jtr.norm(),
        iterations,
        converged,
        message,
    })
}

/// Levenberg-Marquardt fit of `(ka, kd, delta_n_max)` to a measured
/// reflectivity trace through the full binding and optics model. Rates are
/// fitted in log space, so the guess must be positive.
pub fn fit_kinetics(
    problem: &KineticsProblem,
    data: &[f64],
    guess: KineticGuess,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    problem.validate()?;
    if data.len() != problem.times_s.len() {
        return Err(FitError::InvalidInput(format!(
            "{} reflectivity samples for {} times",
            data.len(),
            problem.times_s.len()
        )));
    }
    if !(guess.ka > 0.0 && guess.kd > 0.0 && guess.delta_n_max > 0.0) {
        return Err(FitError::InvalidInput(format!("initial guess must be positive: {guess:?}")));
    }
    const SCALES: [f64; 4] = [1.0, 3.0, 1.0 / 3.0, 10.0];
    let base = guess.to_log();
    let mut best: Option<Run> = None;
    let mut starts = 0;
    for attempt in 0..=opts.restarts {
        let s = SCALES[attempt % SCALES.len()].powi(1 + (attempt / SCALES.len()) as i32).ln();
        let start = base + Vector3::new(s, s, 0.0);
        starts += 1;
        let run = levenberg_marquardt(problem, data, start, opts)?;
        let better = best.as_ref().is_none_or(|b| run.cost < b.cost);
        let done = run.converged;
        if better {
            best = Some(run);
        }
        if done {
            break;
        }
        log::warn!("fit start {attempt} did not converge; restarting");
    }
    let run = best.expect("at least one start");

    let (res, jac) = residuals(problem, data, &run.params)?;
    let (jtj, _) = normal_equations(&res, &jac);
    let inv = jtj
        .try_inverse()
        .ok_or_else(|| FitError::DegenerateFit("singular Jacobian at the optimum".into()))?;
    let dof = (data.len() - 3) as f64;
    let s2 = 2.0 * run.cost / dof;
    let values = KineticGuess::from_log(&run.params);
    let v = [values.ka, values.kd, values.delta_n_max];
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = s2 * inv[(i, j)] * v[i] * v[j];
        }
    }
    let parameters = (0..3)
        .map(|i| FitParameter {
            name: PARAM_NAMES[i].into(),
            unit: PARAM_UNITS[i].into(),
            value: v[i],
            std_error: covariance[i][i].max(0.0).sqrt(),
        })
        .collect();
    Ok(FitResult {
        parameters,
        covariance,
        residual_norm: (2.0 * run.cost).sqrt(),
        gradient_norm: run.gradient_norm,
        iterations: run.iterations,
        converged: run.converged,
        starts,
        message: run.message,
    })
}

impl KineticsProblem {
    pub fn new(
        model: BindingModel,
        map: IndexMap,
        sensor: Kretschmann,
        locked_angle_deg: f64,
        times_s: Vec<f64>,
    ) -> Self {
        Self {
            model,
            map,
            sensor,
            locked_angle_deg,
            times_s,
            max_step_s: DEFAULT_MAX_STEP_S,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::ConcentrationSchedule;
    use crate::optics::{LayerStack, PrismGeometry, GOLD_PERMITTIVITY_795NM};

    fn problem() -> (KineticsProblem, KineticGuess) {
        let stack = LayerStack::kretschmann(1.51, GOLD_PERMITTIVITY_795NM, 50.0, 1.33, 795.0).unwrap();
        let sensor = Kretschmann::new(stack, PrismGeometry::right_angle(1.51).unwrap(), false);
        let lock = sensor.left_flank_angle(0.41, 60.0, 66.43).unwrap();
        let model = BindingModel {
            ka: 0.0,
            kd: 0.0,
            gamma_max: 1.0,
            gamma0: 0.0,
            schedule: ConcentrationSchedule::association_dissociation(1e-6, 300.0),
        };
        let times = (0..=120).map(|i| i as f64 * 5.0).collect();
        let truth = KineticGuess { ka: 1e4, kd: 1e-3, delta_n_max: 3e-3 };
        (KineticsProblem::new(model, IndexMap::new(1.33, 0.0), sensor, lock, times), truth)
    }

    #[test]
    fn noise_free_recovery() {
        let (p, truth) = problem();
        let data = p.forward(&truth).unwrap();
        let guess = KineticGuess { ka: 3e4, kd: 4e-3, delta_n_max: 1e-3 };
        let fit = fit_kinetics(&p, &data, guess, &FitOptions::default()).unwrap();
        assert!(fit.converged, "{}", fit.message);
        for (name, t) in [("ka", truth.ka), ("kd", truth.kd), ("delta_n_max", truth.delta_n_max)] {
            let v = fit.value(name).unwrap();
            assert!((v / t - 1.0).abs() < 1e-3, "{name}: {v} vs {t}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (p, truth) = problem();
        let (_, jac) = p.forward_with_jacobian(&truth).unwrap();
        let base = truth.to_log();
        let h = 1e-6;
        for k in 0..3 {
            let mut up = base;
            let mut dn = base;
            up[k] += h;
            dn[k] -= h;
            let ru = p.forward(&KineticGuess::from_log(&up)).unwrap();
            let rd = p.forward(&KineticGuess::from_log(&dn)).unwrap();
            let scale = jac.iter().map(|j| j[k].abs()).fold(0.0, f64::max);
            for i in 0..jac.len() {
                let fd = (ru[i] - rd[i]) / (2.0 * h);
                assert!((jac[i][k] - fd).abs() < 1e-5 * scale, "param {k} sample {i}: {} vs {fd}", jac[i][k]);
            }
        }
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let (mut p, truth) = problem();
        let data = p.forward(&truth).unwrap();
        let guess = truth;
        assert!(matches!(
            fit_kinetics(&p, &data[..5], guess, &FitOptions::default()),
            Err(FitError::InvalidInput(_))
        ));
        assert!(fit_kinetics(&p, &data, KineticGuess { ka: -1.0, ..guess }, &FitOptions::default()).is_err());
        // no analyte ever flows: coverage stays zero and the rates are unidentifiable
        p.model.schedule = ConcentrationSchedule::default();
        let flat = p.forward(&truth).unwrap();
        assert!(matches!(
            fit_kinetics(&p, &flat, guess, &FitOptions::default()),
            Err(FitError::DegenerateFit(_))
        ));
    }
}
