use serde::{Deserialize, Serialize};

use super::KineticsError;

/// Grid spacing above which the integrator warns and subdivides,
/// expressed as `(ka C + kd) dt`.
pub const STABLE_STEP: f64 = 0.1;

/// Default upper bound on the RK4 substep, seconds.
pub const DEFAULT_MAX_STEP_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationStep {
    pub start_s: f64,
    pub concentration_m: f64,
}

/// Piecewise-constant analyte concentration. Zero before the first step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSchedule {
    pub steps: Vec<ConcentrationStep>,
}

impl ConcentrationSchedule {
    pub fn constant(concentration_m: f64) -> Self {
        Self {
            steps: vec![ConcentrationStep {
                start_s: 0.0,
                concentration_m,
            }],
        }
    }

    /// Association at `concentration_m` until `switch_s`, then buffer only.
    pub fn association_dissociation(concentration_m: f64, switch_s: f64) -> Self {
        Self {
            steps: vec![
                ConcentrationStep {
                    start_s: 0.0,
                    concentration_m,
                },
                ConcentrationStep {
                    start_s: switch_s,
                    concentration_m: 0.0,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        let mut prev = f64::NEG_INFINITY;
        for s in &self.steps {
            if !(s.start_s >= 0.0) || !(s.start_s > prev) {
                return Err(KineticsError::InvalidModel(
                    "schedule start times must be non-negative and strictly increasing".into(),
                ));
            }
            if !(s.concentration_m >= 0.0) || !s.concentration_m.is_finite() {
                return Err(KineticsError::InvalidModel(format!(
                    "negative or non-finite concentration {}",
                    s.concentration_m
                )));
            }
            prev = s.start_s;
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.start_s <= t)
            .last()
            .map_or(0.0, |s| s.concentration_m)
    }

    /// Change points strictly inside `(a, b)`.
    fn breakpoints_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.steps
            .iter()
            .map(|s| s.start_s)
            .filter(move |&t| t > a && t < b)
    }
}

/// 1:1 Langmuir binding: `dΓ/dt = ka C(t) (Γmax - Γ) - kd Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingModel {
    /// Association rate, M⁻¹ s⁻¹.
    pub ka: f64,
    /// Dissociation rate, s⁻¹.
    pub kd: f64,
    pub gamma_max: f64,
    pub gamma0: f64,
    pub schedule: ConcentrationSchedule,
}

impl BindingModel {
    pub fn validate(&self) -> Result<(), KineticsError> {
        if !(self.ka >= 0.0) || !(self.kd >= 0.0) || !self.ka.is_finite() || !self.kd.is_finite() {
            return Err(KineticsError::InvalidModel(format!(
                "rates must be non-negative, got ka = {}, kd = {}",
                self.ka, self.kd
            )));
        }
        if !(self.gamma_max > 0.0) {
            return Err(KineticsError::InvalidModel("gamma_max must be positive".into()));
        }
        if !(0.0..=self.gamma_max).contains(&self.gamma0) {
            return Err(KineticsError::InvalidModel(format!(
                "gamma0 = {} outside [0, gamma_max]",
                self.gamma0
            )));
        }
        self.schedule.validate()
    }

    /// Relaxation rate `ka C + kd` at concentration `c`.
    pub fn relaxation_rate(&self, c: f64) -> f64 {
        self.ka * c + self.kd
    }

    pub fn equilibrium_coverage(&self, c: f64) -> f64 {
        let k = self.relaxation_rate(c);
        if k == 0.0 {
            0.0
        } else {
            self.gamma_max * self.ka * c / k
        }
    }

    fn relax(&self, gamma: f64, c: f64, dt: f64) -> f64 {
        let k = self.relaxation_rate(c);
        if k == 0.0 {
            return gamma;
        }
        let eq = self.equilibrium_coverage(c);
        eq + (gamma - eq) * (-k * dt).exp()
    }
}

/// Exact coverage at time `t`, composing the closed-form relaxation over
/// each constant-concentration segment.
pub fn coverage_analytic(model: &BindingModel, t: f64) -> Result<f64, KineticsError> {
    model.validate()?;
    if !(t >= 0.0) {
        return Err(KineticsError::NegativeTime(t));
    }
    let mut gamma = model.gamma0;
    let mut from = 0.0;
    for b in model.schedule.breakpoints_between(0.0, t).chain(std::iter::once(t)) {
        gamma = model.relax(gamma, model.schedule.at(from), b - from);
        from = b;
    }
    Ok(gamma)
}

fn rk4_step<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| -> [f64; N] {
        std::array::from_fn(|i| a[i] + s * b[i])
    };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * h));
    let k3 = f(&add(y, &k2, 0.5 * h));
    let k4 = f(&add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn check_grid(t_grid: &[f64]) -> Result<(), KineticsError> {
    if let Some(&t) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(KineticsError::NegativeTime(t));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(KineticsError::NonMonotoneGrid);
    }
    Ok(())
}

/// Fixed-step RK4 from `t = 0` sampled at `t_grid`. Substeps never cross a
/// concentration change and never exceed `max_step_s` or
/// `STABLE_STEP / (ka C + kd)`.
fn integrate<const N: usize>(
    model: &BindingModel,
    t_grid: &[f64],
    max_step_s: f64,
    init: [f64; N],
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
) -> Result<Vec<[f64; N]>, KineticsError> {
    model.validate()?;
    check_grid(t_grid)?;
    if !(max_step_s > 0.0) {
        return Err(KineticsError::InvalidModel(format!("max step {max_step_s} must be positive")));
    }
    let mut warned = false;
    let mut y = init;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut prev_sample: Option<f64> = None;
    for &target in t_grid {
        let edges: Vec<f64> = model
            .schedule
            .breakpoints_between(t, target)
            .chain(std::iter::once(target))
            .collect();
        for edge in edges {
            let span = edge - t;
            if span <= 0.0 {
                continue;
            }
            let c = model.schedule.at(t);
            let k = model.relaxation_rate(c);
            if let Some(p) = prev_sample {
                if !warned && k * (target - p) > STABLE_STEP {
                    log::warn!(
                        "grid spacing {} s exceeds stable step for rate {k} s^-1; substepping",
                        target - p
                    );
                    warned = true;
                }
            }
            let mut h_max = max_step_s;
            if k > 0.0 {
                h_max = h_max.min(STABLE_STEP / k);
            }
            let n = (span / h_max).ceil().max(1.0) as usize;
            let h = span / n as f64;
            let f = |y: &[f64; N]| rhs(c, y);
            for _ in 0..n {
                y = rk4_step(&f, &y, h);
            }
            t = edge;
        }
        prev_sample = Some(target);
        out.push(y);
    }
    Ok(out)
}

/// Coverage at each time of `t_grid` by RK4 integration of the rate law.
pub fn coverage_ode(
    model: &BindingModel,
    t_grid: &[f64],
    max_step_s: f64,
) -> Result<Vec<f64>, KineticsError> {
    let (ka, kd, gmax) = (model.ka, model.kd, model.gamma_max);
    let states = integrate(model, t_grid, max_step_s, [model.gamma0], |c, y| {
        [ka * c * (gmax - y[0]) - kd * y[0]]
    })?;
    Ok(states.into_iter().map(|s| s[0].clamp(0.0, gmax)).collect())
}

/// Coverage with its forward sensitivities `(Γ, ∂Γ/∂ka, ∂Γ/∂kd)`.
pub fn coverage_sensitivities(
    model: &BindingModel,
    t_grid: &[f64],
    max_step_s: f64,
) -> Result<Vec<[f64; 3]>, KineticsError> {
    let (ka, kd, gmax) = (model.ka, model.kd, model.gamma_max);
    integrate(model, t_grid, max_step_s, [model.gamma0, 0.0, 0.0], |c, y| {
        let k = ka * c + kd;
        [
            ka * c * (gmax - y[0]) - kd * y[0],
            c * (gmax - y[0]) - k * y[1],
            -y[0] - k * y[2],
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(c: f64, gamma0: f64) -> BindingModel {
        BindingModel {
            ka: 1e4,
            kd: 1e-3,
            gamma_max: 1.0,
            gamma0,
            schedule: ConcentrationSchedule::constant(c),
        }
    }

    /// Independent RK4 at a fixed 1 ms step.
    fn rk4_oracle(m: &BindingModel, c: f64, t_end: f64) -> f64 {
        let dt = 1e-3;
        let n = (t_end / dt).round() as usize;
        let f = |g: f64| m.ka * c * (m.gamma_max - g) - m.kd * g;
        let mut g = m.gamma0;
        for _ in 0..n {
            let k1 = f(g);
            let k2 = f(g + 0.5 * dt * k1);
            let k3 = f(g + 0.5 * dt * k2);
            let k4 = f(g + dt * k3);
            g += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        g
    }

    #[test]
    fn no_analyte_no_binding() {
        let m = model(0.0, 0.0);
        for t in [0.0, 1.0, 1e3] {
            assert_eq!(coverage_analytic(&m, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn long_time_limit_is_equilibrium() {
        let m = model(1e-5, 0.0);
        let eq = 0.1 / (0.1 + 1e-3);
        assert!((coverage_analytic(&m, 1e5).unwrap() - eq).abs() < 1e-12);
    }

    #[test]
    fn analytic_matches_rk4_oracle() {
        let m = model(1e-5, 0.0);
        let a = coverage_analytic(&m, 20.0).unwrap();
        assert!((a - rk4_oracle(&m, 1e-5, 20.0)).abs() < 1e-6);
    }

    #[test]
    fn pure_dissociation() {
        let m = model(0.0, 0.5);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 10.0).collect();
        let ode = coverage_ode(&m, &grid, DEFAULT_MAX_STEP_S).unwrap();
        for (t, g) in grid.iter().zip(&ode) {
            assert!((g - 0.5 * (-1e-3 * t).exp()).abs() < 1e-10);
        }
        assert!(ode.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn association_then_dissociation() {
        let mut m = model(1e-5, 0.0);
        m.schedule = ConcentrationSchedule::association_dissociation(1e-5, 300.0);
        let grid: Vec<f64> = (0..=600).map(|i| i as f64).collect();
        let ode = coverage_ode(&m, &grid, DEFAULT_MAX_STEP_S).unwrap();
        let peak = ode
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 300);
        for (t, g) in grid.iter().zip(&ode) {
            assert!((g - coverage_analytic(&m, *t).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn richardson_step_halving() {
        let m = model(1e-5, 0.0);
        let grid = [50.0, 100.0];
        let a = coverage_ode(&m, &grid, 0.01).unwrap();
        let b = coverage_ode(&m, &grid, 0.005).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let mut m = model(1e-5, 0.0);
        m.schedule = ConcentrationSchedule::association_dissociation(1e-5, 100.0);
        let grid = [30.0, 100.0, 180.0];
        let s = coverage_sensitivities(&m, &grid, 0.01).unwrap();
        for (which, h) in [(1usize, 1.0), (2usize, 1e-7)] {
            let (mut up, mut dn) = (m.clone(), m.clone());
            if which == 1 {
                up.ka += h;
                dn.ka -= h;
            } else {
                up.kd += h;
                dn.kd -= h;
            }
            let gu: Vec<f64> = grid.iter().map(|&t| coverage_analytic(&up, t).unwrap()).collect();
            let gd: Vec<f64> = grid.iter().map(|&t| coverage_analytic(&dn, t).unwrap()).collect();
            for i in 0..grid.len() {
                let fd = (gu[i] - gd[i]) / (2.0 * h);
                assert!((s[i][which] - fd).abs() < 1e-5 * fd.abs().max(1e-12), "{which} {i}: {} vs {fd}", s[i][which]);
            }
        }
    }

    #[test]
    fn errors() {
        let m = model(1e-5, 0.0);
        assert!(matches!(coverage_analytic(&m, -1.0), Err(KineticsError::NegativeTime(_))));
        assert!(matches!(
            coverage_ode(&m, &[1.0, 0.5], 0.01),
            Err(KineticsError::NonMonotoneGrid)
        ));
        let mut bad = m.clone();
        bad.gamma0 = 2.0;
        assert!(coverage_analytic(&bad, 1.0).is_err());
        bad = m;
        bad.schedule.steps.push(ConcentrationStep { start_s: 0.0, concentration_m: 1.0 });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn coarse_grid_is_substepped() {
        let m = model(1e-3, 0.0); // k = 10 s^-1
        let grid = [1.0, 2.0];
        let ode = coverage_ode(&m, &grid, 1.0).unwrap();
        for (t, g) in grid.iter().zip(&ode) {
            assert!((g - coverage_analytic(&m, *t).unwrap()).abs() < 1e-6);
        }
    }
}
