use plasmon_squeeze::fitting::{
    add_reflectivity_noise, fit_kinetics, index_resolution, FitError, FitOptions, KineticGuess,
    KineticsProblem,
};
use plasmon_squeeze::kinetics::{BindingModel, ConcentrationSchedule, IndexMap};
use plasmon_squeeze::optics::{
    reflectivity_sweep, Kretschmann, LayerStack, PrismGeometry, GOLD_PERMITTIVITY_795NM,
};

const PHOTONS_PER_SAMPLE: f64 = 1e5;
const SEEDS: u64 = 20;

fn setup() -> (KineticsProblem, KineticGuess) {
    let stack = LayerStack::kretschmann(1.51, GOLD_PERMITTIVITY_795NM, 50.0, 1.33, 795.0).unwrap();
    let sensor = Kretschmann::new(stack, PrismGeometry::right_angle(1.51).unwrap(), false);
    let dip = reflectivity_sweep(&sensor, 62.0, 70.0, 0.01).unwrap();
    let lock = sensor.left_flank_angle(0.41, 62.0, dip.resonance_angle_deg).unwrap();
    let model = BindingModel {
        ka: 0.0,
        kd: 0.0,
        gamma_max: 1.0,
        gamma0: 0.0,
        schedule: ConcentrationSchedule::association_dissociation(1e-6, 300.0),
    };
    let times = (0..=300).map(|i| i as f64 * 2.0).collect();
    let truth = KineticGuess { ka: 1e4, kd: 1e-3, delta_n_max: 3e-3 };
    (KineticsProblem::new(model, IndexMap::new(1.33, 0.0), sensor, lock, times), truth)
}

fn fit_all(squeezing_db: f64) -> Vec<(f64, f64, f64, f64)> {
    let (p, truth) = setup();
    let clean = p.forward(&truth).unwrap();
    let guess = KineticGuess { ka: 2e4, kd: 2e-3, delta_n_max: 2e-3 };
    (0..SEEDS)
        .map(|seed| {
            let data = add_reflectivity_noise(&clean, PHOTONS_PER_SAMPLE, squeezing_db, seed);
            let f = fit_kinetics(&p, &data, guess, &FitOptions::default()).unwrap();
            assert!(f.converged, "seed {seed}: {}", f.message);
            (
                f.value("ka").unwrap(),
                f.value("kd").unwrap(),
                f.std_error("ka").unwrap(),
                f.std_error("kd").unwrap(),
            )
        })
        .collect()
}

#[test]
fn coherent_noise_recovery_within_five_percent() {
    let (_, truth) = setup();
    for (i, (ka, kd, _, _)) in fit_all(0.0).into_iter().enumerate() {
        println!("seed {i}: ka {:+.3}%  kd {:+.3}%", 100.0 * (ka / truth.ka - 1.0), 100.0 * (kd / truth.kd - 1.0));
        assert!((ka / truth.ka - 1.0).abs() < 0.05);
        assert!((kd / truth.kd - 1.0).abs() < 0.05);
    }
}

#[test]
fn squeezed_standard_errors_shrink() {
    let mean = |v: &[(f64, f64, f64, f64)], f: fn(&(f64, f64, f64, f64)) -> f64| {
        v.iter().map(f).sum::<f64>() / v.len() as f64
    };
    let coh = fit_all(0.0);
    for s in [2.0, 4.0] {
        let sq = fit_all(s);
        let expected = 10f64.powf(-s / 20.0);
        let ka_ratio = mean(&sq, |r| r.2) / mean(&coh, |r| r.2);
        let kd_ratio = mean(&sq, |r| r.3) / mean(&coh, |r| r.3);
        println!("S {s}: ka {ka_ratio:.4} kd {kd_ratio:.4} expected {expected:.4}");
        assert!((ka_ratio / expected - 1.0).abs() < 0.15);
        assert!((kd_ratio / expected - 1.0).abs() < 0.15);
    }
}

#[test]
fn dip_bottom_has_no_index_sensitivity() {
    let (p, _) = setup();
    let dip = reflectivity_sweep(&p.sensor, 62.0, 70.0, 0.01).unwrap();
    let r = index_resolution(&dip, dip.resonance_angle_deg, 1e-3, 0.0);
    assert!(matches!(r, Err(FitError::DegenerateSensitivity { .. })), "{r:?}");
    let flank = index_resolution(&dip, p.locked_angle_deg, 1e-3, 0.0).unwrap();
    assert!(flank.slope_per_riu > 50.0);
}
