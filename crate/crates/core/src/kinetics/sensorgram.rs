use serde::{Deserialize, Serialize};

use super::{coverage_ode, BindingModel, KineticsError};
use crate::optics::Kretschmann;

/// Linear map from surface coverage to the analyte-side refractive index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexMap {
    pub n_buffer: f64,
    /// Index change at full coverage.
    pub delta_n_max: f64,
    /// Bulk index offset while analyte is flowing.
    #[serde(default)]
    pub bulk_step: f64,
}

impl IndexMap {
    pub fn new(n_buffer: f64, delta_n_max: f64) -> Self {
        Self {
            n_buffer,
            delta_n_max,
            bulk_step: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        if !(self.delta_n_max >= 0.0) || !(self.n_buffer > 0.0) || !self.bulk_step.is_finite() {
            return Err(KineticsError::InvalidModel(format!(
                "index map needs n_buffer > 0 and delta_n_max >= 0, got {} and {}",
                self.n_buffer, self.delta_n_max
            )));
        }
        Ok(())
    }

    pub fn index(&self, coverage: f64, gamma_max: f64, flowing: bool) -> f64 {
        let bulk = if flowing { self.bulk_step } else { 0.0 };
        self.n_buffer + self.delta_n_max * coverage / gamma_max + bulk
    }
}

/// Index at each coverage sample, without any bulk contribution.
pub fn index_trace(coverage: &[f64], map: &IndexMap, gamma_max: f64) -> Vec<f64> {
    coverage
        .iter()
        .map(|&g| map.index(g, gamma_max, false))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensorgram {
    pub times_s: Vec<f64>,
    pub coverage: Vec<f64>,
    pub index: Vec<f64>,
    pub reflectivity: Vec<f64>,
    pub locked_angle_deg: f64,
}

/// Reflectivity at a fixed internal angle while the binding curve evolves.
pub fn sensorgram(
    model: &BindingModel,
    map: &IndexMap,
    sensor: &Kretschmann,
    locked_angle_deg: f64,
    t_grid: &[f64],
    max_step_s: f64,
) -> Result<Sensorgram, KineticsError> {
    map.validate()?;
    let (_, slope) = sensor.reflectivity_and_slope(locked_angle_deg, map.n_buffer)?;
    if slope <= 0.0 {
        log::warn!(
            "locked angle {locked_angle_deg} deg is not on the low-angle flank; reflectivity falls as index rises"
        );
    }
    let coverage = coverage_ode(model, t_grid, max_step_s)?;
    let index: Vec<f64> = t_grid
        .iter()
        .zip(&coverage)
        .map(|(&t, &g)| map.index(g, model.gamma_max, model.schedule.at(t) > 0.0))
        .collect();
    let reflectivity = index
        .iter()
        .map(|&n| sensor.reflectivity_at_index(locked_angle_deg, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sensorgram {
        times_s: t_grid.to_vec(),
        coverage,
        index,
        reflectivity,
        locked_angle_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{ConcentrationSchedule, DEFAULT_MAX_STEP_S};
    use crate::optics::{LayerStack, PrismGeometry, GOLD_PERMITTIVITY_795NM};

    fn sensor() -> Kretschmann {
        let stack = LayerStack::kretschmann(1.51, GOLD_PERMITTIVITY_795NM, 50.0, 1.33, 795.0).unwrap();
        Kretschmann::new(stack, PrismGeometry::right_angle(1.51).unwrap(), false)
    }

    #[test]
    fn index_is_linear_in_coverage() {
        let map = IndexMap::new(1.33, 0.01);
        assert_eq!(index_trace(&[0.0, 0.5, 1.0], &map, 1.0), vec![1.33, 1.335, 1.34]);
        let bulk = IndexMap { bulk_step: 1e-3, ..map };
        assert!((bulk.index(0.0, 1.0, true) - 1.331).abs() < 1e-15);
    }

    #[test]
    fn reflectivity_follows_binding_on_left_flank() {
        let model = BindingModel {
            ka: 1e4,
            kd: 1e-3,
            gamma_max: 1.0,
            gamma0: 0.0,
            schedule: ConcentrationSchedule::association_dissociation(1e-5, 100.0),
        };
        let s = sensor();
        let lock = s.left_flank_angle(0.41, 60.0, 66.43).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64).collect();
        let sg = sensorgram(&model, &IndexMap::new(1.33, 0.002), &s, lock, &grid, DEFAULT_MAX_STEP_S).unwrap();
        assert!((sg.reflectivity[0] - 0.41).abs() < 1e-9);
        assert!(sg.reflectivity[100] > sg.reflectivity[50]);
        assert!(sg.reflectivity[200] < sg.reflectivity[100]);
        assert_eq!(sg.times_s.len(), 201);
    }
}
