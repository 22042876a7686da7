//! One function per subcommand. Each returns its output files and a short
//! human-readable report; nothing touches the filesystem here.

use plasmon_squeeze::fitting::{
    add_reflectivity_noise, fit_kinetics, index_resolution, reflectivity_noise_sigma, FitOptions,
    KineticGuess, KineticsProblem,
};
use plasmon_squeeze::kinetics::{sensorgram, Sensorgram};
use plasmon_squeeze::optics::{
    reflectivity_sweep, resonance_angle_closed_form, DipCurve, Kretschmann,
};
use plasmon_squeeze::quantum::{
    apply_loss_chain, lossless_squeezing_db, matched_conjugate_attenuation, LossChain,
    TwinBeamSource, SENSOR_REFLECTIVITY,
};
use plasmon_squeeze::signal::{
    snr_comparison, synthesize_traces, NoiseModel, SegmentId, SnrSeries, SpectrumAnalyzer,
};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{RunConfig, SweepConfig};
use crate::output::{Format, OutputFile, Table};
use crate::reference::{Annotated, ReferenceValues};
use crate::CliError;

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    pub warnings: Vec<String>,
    pub report: String,
}

fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    RunConfig::require(block, name)
}

fn sweep(sensor: &Kretschmann, cfg: &SweepConfig) -> Result<DipCurve, CliError> {
    if !(cfg.min_deg < cfg.max_deg) || !(cfg.step_deg > 0.0) {
        return Err(CliError::Config(format!(
            "sweep needs min_deg < max_deg and step_deg > 0, got {cfg:?}"
        )));
    }
    reflectivity_sweep(sensor, cfg.min_deg, cfg.max_deg, cfg.step_deg).map_err(CliError::runtime)
}

/// Lock angle from the `lock` block, searching the flank below the dip.
fn lock_angle(cfg: &RunConfig, dip: &DipCurve) -> Result<f64, CliError> {
    let lock = require(&cfg.lock, "lock")?;
    match (lock.angle_deg, lock.target_reflectivity) {
        (Some(a), None) => Ok(a),
        (None, Some(target)) => {
            if dip.no_dip {
                return Err(CliError::Runtime("no dip in sweep range; cannot lock on its flank".into()));
            }
            dip.sensor
                .left_flank_angle(target, dip.angles_deg[0], dip.resonance_angle_deg)
                .map_err(CliError::runtime)
        }
        _ => Err(CliError::Config(
            "lock needs exactly one of 'angle_deg' and 'target_reflectivity'".into(),
        )),
    }
}

fn chain_at_reflectivity(base: &LossChain, matched: bool, r: f64) -> Result<LossChain, CliError> {
    let mut chain = base.clone();
    chain
        .set_probe_stage(SENSOR_REFLECTIVITY, r.clamp(0.0, 1.0))
        .map_err(CliError::runtime)?;
    Ok(if matched { matched_conjugate_attenuation(&chain) } else { chain })
}

#[derive(Serialize)]
struct DipSummary {
    resonance_angle_deg: Annotated,
    min_reflectivity: f64,
    absorption_at_resonance: Annotated,
    closed_form_resonance_deg: Option<f64>,
    external_resonance_angle_deg: Option<f64>,
    no_dip: bool,
    warning: Option<String>,
    points: usize,
}

pub fn dip(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let optics = require(&cfg.optics, "optics")?;
    let sensor = optics.sensor()?;
    let curve = sweep(&sensor, require(&cfg.sweep, "sweep")?)?;
    let refs = ReferenceValues::bundled();
    let closed_form = resonance_angle_closed_form(
        optics.gold_permittivity.into(),
        Complex64::new(optics.analyte_index * optics.analyte_index, 0.0),
        optics.prism_index,
    )
    .ok();
    let warning = curve
        .no_dip
        .then(|| "no interior reflectivity minimum in the sweep range".to_owned());
    let summary = DipSummary {
        resonance_angle_deg: Annotated::new(curve.resonance_angle_deg, refs.get("resonance_angle_deg")),
        min_reflectivity: curve.min_reflectivity,
        absorption_at_resonance: Annotated::new(1.0 - curve.min_reflectivity, refs.get("absorption_at_resonance")),
        closed_form_resonance_deg: closed_form,
        external_resonance_angle_deg: sensor.geometry.internal_to_external(curve.resonance_angle_deg).ok(),
        no_dip: curve.no_dip,
        warning: warning.clone(),
        points: curve.angles_deg.len(),
    };
    let table = Table::new("dip")
        .num("theta_internal_deg", curve.angles_deg.clone())
        .num("reflectivity", curve.reflectivity.clone());
    Ok(CommandOutput {
        files: vec![table.render(format)?, OutputFile::json("dip_summary.json", &summary)?],
        warnings: warning.into_iter().collect(),
        report: format!(
            "resonance {:.4} deg (reference {}), min reflectivity {:.4}\n",
            curve.resonance_angle_deg,
            refs.get("resonance_angle_deg").unwrap_or(f64::NAN),
            curve.min_reflectivity
        ),
    })
}

pub fn squeezing_scan(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let sensor = require(&cfg.optics, "optics")?.sensor()?;
    let curve = sweep(&sensor, require(&cfg.sweep, "sweep")?)?;
    let source = require(&cfg.source, "source")?.source()?;
    let losses = require(&cfg.losses, "losses")?;
    let base = losses.chain()?;
    let squeezing = curve
        .reflectivity
        .iter()
        .map(|&r| {
            let chain = chain_at_reflectivity(&base, losses.matched, r)?;
            apply_loss_chain(&source, &chain, "scan")
                .map(|b| b.squeezing_db)
                .map_err(CliError::runtime)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (imin, smin) = squeezing
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, s)| (i, *s))
        .unwrap_or((0, f64::NAN));
    let table = Table::new("squeezing_scan")
        .num("theta_deg", curve.angles_deg.clone())
        .num("reflectivity", curve.reflectivity.clone())
        .num("squeezing_db", squeezing);
    Ok(CommandOutput {
        files: vec![table.render(format)?],
        warnings: Vec::new(),
        report: format!(
            "gain {:.4}: lowest squeezing {smin:.3} dB at {:.3} deg (resonance {:.3} deg)\n",
            source.gain, curve.angles_deg[imin], curve.resonance_angle_deg
        ),
    })
}

#[derive(Serialize)]
struct BudgetRow {
    label: String,
    eta_probe: f64,
    eta_conj: f64,
    squeezing_db: Annotated,
}

#[derive(Serialize)]
struct BudgetSummary {
    gain: f64,
    lossless_squeezing_db: f64,
    reference_label: String,
    points: Vec<BudgetRow>,
}

pub fn budget(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let source = require(&cfg.source, "source")?.source()?;
    let chain = require(&cfg.losses, "losses")?.chain()?;
    let points = &require(&cfg.budget, "budget")?.points;
    if points.is_empty() {
        return Err(CliError::Config("budget.points is empty".into()));
    }
    let mut budgets = Vec::with_capacity(points.len());
    for p in points {
        if p.stages > chain.probe.len() {
            return Err(CliError::Config(format!(
                "budget point '{}' asks for {} stages but the chain has {}",
                p.label,
                p.stages,
                chain.probe.len()
            )));
        }
        budgets.push(apply_loss_chain(&source, &chain.prefix(p.stages), &p.label).map_err(CliError::runtime)?);
    }
    let table = Table::new("budget")
        .text("point_label", budgets.iter().map(|b| b.point_label.clone()).collect())
        .num("eta_probe", budgets.iter().map(|b| b.eta_probe).collect())
        .num("eta_conj", budgets.iter().map(|b| b.eta_conjugate).collect())
        .num("variance_diff", budgets.iter().map(|b| b.variance_diff).collect())
        .num("snl", budgets.iter().map(|b| b.snl).collect())
        .num("squeezing_db", budgets.iter().map(|b| b.squeezing_db).collect());
    let rows: Vec<BudgetRow> = budgets
        .iter()
        .zip(points)
        .map(|(b, p)| BudgetRow {
            label: b.point_label.clone(),
            eta_probe: b.eta_probe,
            eta_conj: b.eta_conjugate,
            squeezing_db: Annotated::new(b.squeezing_db, p.reference_db),
        })
        .collect();
    let mut report = String::from("point        eta_p    eta_c    model_dB  reference_dB\n");
    for r in &rows {
        let reference = r.squeezing_db.reference.map_or("-".to_owned(), |v| format!("{v:.2}"));
        report.push_str(&format!(
            "{:<12} {:<8.4} {:<8.4} {:<9.3} {reference}\n",
            r.label, r.eta_probe, r.eta_conj, r.squeezing_db.model
        ));
    }
    let summary = BudgetSummary {
        gain: source.gain,
        lossless_squeezing_db: lossless_squeezing_db(source.gain).map_err(CliError::runtime)?,
        reference_label: ReferenceValues::bundled().label,
        points: rows,
    };
    Ok(CommandOutput {
        files: vec![table.render(format)?, OutputFile::json("budget_summary.json", &summary)?],
        warnings: Vec::new(),
        report,
    })
}

struct BindingRun {
    sensor: Kretschmann,
    dip: DipCurve,
    locked_angle_deg: f64,
    sensorgram: Sensorgram,
}

fn binding_run(cfg: &RunConfig) -> Result<BindingRun, CliError> {
    let sensor = require(&cfg.optics, "optics")?.sensor()?;
    let dip = sweep(&sensor, require(&cfg.sweep, "sweep")?)?;
    let locked_angle_deg = lock_angle(cfg, &dip)?;
    let k = require(&cfg.kinetics, "kinetics")?;
    let sg = sensorgram(
        &k.model()?,
        &k.index_map()?,
        &sensor,
        locked_angle_deg,
        &k.time_grid()?,
        k.max_step_s,
    )
    .map_err(CliError::runtime)?;
    Ok(BindingRun {
        sensor,
        dip,
        locked_angle_deg,
        sensorgram: sg,
    })
}

#[derive(Serialize)]
struct BindSummary {
    locked_angle_deg: f64,
    locked_external_angle_deg: Option<f64>,
    initial_resonance_deg: f64,
    initial_reflectivity: Annotated,
    final_reflectivity: f64,
    peak_reflectivity: f64,
    samples: usize,
    warning: Option<String>,
}

pub fn bind(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let run = binding_run(cfg)?;
    let sg = &run.sensorgram;
    let warning = (run.locked_angle_deg >= run.dip.resonance_angle_deg)
        .then(|| "locked angle is not left of the resonance".to_owned());
    let summary = BindSummary {
        locked_angle_deg: run.locked_angle_deg,
        locked_external_angle_deg: run.sensor.geometry.internal_to_external(run.locked_angle_deg).ok(),
        initial_resonance_deg: run.dip.resonance_angle_deg,
        initial_reflectivity: Annotated::new(
            sg.reflectivity[0],
            ReferenceValues::bundled().get("lock_reflectivity_classical"),
        ),
        final_reflectivity: *sg.reflectivity.last().expect("non-empty grid"),
        peak_reflectivity: sg.reflectivity.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: sg.times_s.len(),
        warning: warning.clone(),
    };
    let table = Table::new("sensorgram")
        .num("t_s", sg.times_s.clone())
        .num("coverage", sg.coverage.clone())
        .num("n3", sg.index.clone())
        .num("reflectivity", sg.reflectivity.clone());
    Ok(CommandOutput {
        files: vec![table.render(format)?, OutputFile::json("bind_summary.json", &summary)?],
        warnings: warning.into_iter().collect(),
        report: format!(
            "locked at {:.4} deg, reflectivity {:.4} -> peak {:.4}\n",
            run.locked_angle_deg, summary.initial_reflectivity.model, summary.peak_reflectivity
        ),
    })
}

fn subsample(sg: &Sensorgram, points: usize) -> Result<Sensorgram, CliError> {
    let n = sg.times_s.len();
    if points < 2 || points > n {
        return Err(CliError::Config(format!("snr.points must be in 2..={n}, got {points}")));
    }
    let idx: Vec<usize> = (0..points)
        .map(|i| ((i * (n - 1)) as f64 / (points - 1) as f64).round() as usize)
        .collect();
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    Ok(Sensorgram {
        times_s: pick(&sg.times_s),
        coverage: pick(&sg.coverage),
        index: pick(&sg.index),
        reflectivity: pick(&sg.reflectivity),
        locked_angle_deg: sg.locked_angle_deg,
    })
}

fn snr_table(stem: &str, s: &SnrSeries) -> Table {
    Table::new(stem)
        .num("t_s", s.times_s.clone())
        .num("reflectivity", s.reflectivity.clone())
        .num("signal_power", s.signal_power.clone())
        .num("noise_power", s.noise_power.clone())
        .num("snr_db", s.snr_db())
        .num("squeezing_db", s.squeezing_db.clone())
        .num("qa_db", s.qa_db.clone())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Serialize)]
struct SnrSummary {
    gain: f64,
    locked_angle_deg: f64,
    noise_model: NoiseModel,
    points: usize,
    segments_per_point: usize,
    mean_qa_db: Annotated,
    mean_measured_squeezing_db: f64,
    mean_model_squeezing_db: f64,
    qa_db_span: f64,
}

fn first_spectrum(
    source: &TwinBeamSource,
    base: &LossChain,
    matched: bool,
    sg: &Sensorgram,
    noise: NoiseModel,
    cfg: &RunConfig,
    acq: &plasmon_squeeze::signal::AcquisitionSpec,
) -> Result<Table, CliError> {
    let modulation = require(&cfg.modulation, "modulation")?;
    let chain = chain_at_reflectivity(base, matched, sg.reflectivity[0])?;
    let mut b = apply_loss_chain(source, &chain, "t=0").map_err(CliError::runtime)?;
    if let NoiseModel::FixedSqueezing { squeezing_db } = noise {
        b = b.with_detected_squeezing(squeezing_db).map_err(CliError::runtime)?;
    }
    let id = SegmentId { point: 0, segment: 0, stream: 0 };
    let trace = synthesize_traces(&b, modulation, acq, sg.times_s[0], id).map_err(CliError::runtime)?;
    let spectrum = SpectrumAnalyzer::for_acquisition(acq)
        .and_then(|a| a.analyze(&trace.difference()))
        .map_err(CliError::runtime)?;
    Ok(Table::new("spectrum")
        .num("freq_hz", spectrum.frequencies_hz())
        .num("power", spectrum.power))
}

pub fn snr(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let snr_cfg = require(&cfg.snr, "snr")?;
    let source = require(&cfg.source, "source")?.source()?;
    let losses = require(&cfg.losses, "losses")?;
    let chain = losses.chain()?;
    let acq = require(&cfg.acquisition, "acquisition")?.spec(cfg.rng_seed)?;
    let modulation = require(&cfg.modulation, "modulation")?;
    modulation.validate(&acq).map_err(CliError::config)?;
    let run = binding_run(cfg)?;
    let sg = subsample(&run.sensorgram, snr_cfg.points)?;
    // the comparison always attenuates the conjugate like the probe
    if !losses.matched {
        log::warn!("snr uses matched conjugate attenuation; losses.conjugate ignored");
    }
    let cmp = snr_comparison(&sg, &source, &chain, modulation, &acq, snr_cfg.noise_model)
        .map_err(CliError::runtime)?;
    let qa = &cmp.tmbss.qa_db;
    let span = qa.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - qa.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = SnrSummary {
        gain: source.gain,
        locked_angle_deg: run.locked_angle_deg,
        noise_model: snr_cfg.noise_model,
        points: sg.times_s.len(),
        segments_per_point: acq.segments_per_point,
        mean_qa_db: Annotated::new(mean(qa), ReferenceValues::bundled().get("quantum_advantage_db")),
        mean_measured_squeezing_db: mean(&cmp.tmbss.squeezing_db),
        mean_model_squeezing_db: mean(&cmp.tmbss.model_squeezing_db),
        qa_db_span: span,
    };
    let mut files = vec![
        snr_table("snr_tmbss", &cmp.tmbss).render(format)?,
        snr_table("snr_coherent", &cmp.coherent).render(format)?,
    ];
    if snr_cfg.dump_spectrum {
        files.push(first_spectrum(&source, &chain, true, &sg, snr_cfg.noise_model, cfg, &acq)?.render(format)?);
    }
    files.push(OutputFile::json("snr_summary.json", &summary)?);
    Ok(CommandOutput {
        files,
        warnings: Vec::new(),
        report: format!(
            "mean QA {:.3} dB, measured squeezing {:.3} dB, model {:.3} dB over {} points\n",
            summary.mean_qa_db.model,
            summary.mean_measured_squeezing_db,
            summary.mean_model_squeezing_db,
            summary.points
        ),
    })
}

fn read_data_csv(path: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let headers = reader.headers().map_err(|e| CliError::Config(format!("{path}: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{path}: missing column '{name}'")))
    };
    let (ti, ri) = (col("t_s")?, col("reflectivity")?);
    let (mut t, mut r) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("{path}: bad number in row {:?}", rec)))
        };
        t.push(num(ti)?);
        r.push(num(ri)?);
    }
    Ok((t, r))
}

#[derive(Serialize)]
struct FitSummary {
    data_source: String,
    truth: Option<KineticGuess>,
    locked_angle_deg: f64,
    fit: plasmon_squeeze::fitting::FitResult,
    index_resolution: plasmon_squeeze::fitting::IndexResolution,
    noise_sigma_reflectivity: f64,
    squeezing_db: f64,
}

pub fn fit(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let fit_cfg = require(&cfg.fit, "fit")?;
    let k = require(&cfg.kinetics, "kinetics")?;
    let sensor = require(&cfg.optics, "optics")?.sensor()?;
    let dip = sweep(&sensor, require(&cfg.sweep, "sweep")?)?;
    let lock = lock_angle(cfg, &dip)?;
    if !(fit_cfg.photons_per_sample > 0.0) {
        return Err(CliError::Config("fit.photons_per_sample must be positive".into()));
    }
    let model = k.model()?;
    let map = k.index_map()?;
    let (times, data, truth, data_source) = match &fit_cfg.data_csv {
        Some(path) => {
            let (t, r) = read_data_csv(path)?;
            (t, r, None, path.clone())
        }
        None => {
            let times = k.time_grid()?;
            let truth = KineticGuess {
                ka: k.ka,
                kd: k.kd,
                delta_n_max: k.map.delta_n_max,
            };
            let p = KineticsProblem::new(model.clone(), map, sensor.clone(), lock, times.clone());
            let clean = p.forward(&truth).map_err(CliError::runtime)?;
            let noisy = add_reflectivity_noise(&clean, fit_cfg.photons_per_sample, fit_cfg.squeezing_db, cfg.rng_seed);
            (times, noisy, Some(truth), "synthetic".to_owned())
        }
    };
    let mut problem = KineticsProblem::new(model, map, sensor, lock, times);
    problem.max_step_s = k.max_step_s;
    let opts = fit_cfg.options.unwrap_or_else(FitOptions::default);
    let result = fit_kinetics(&problem, &data, fit_cfg.initial_guess, &opts).map_err(|e| match e {
        plasmon_squeeze::fitting::FitError::InvalidInput(m) => CliError::Config(m),
        other => CliError::Runtime(other.to_string()),
    })?;
    let fitted = KineticGuess {
        ka: result.value("ka").expect("ka fitted"),
        kd: result.value("kd").expect("kd fitted"),
        delta_n_max: result.value("delta_n_max").expect("delta_n_max fitted"),
    };
    let model_curve = problem.forward(&fitted).map_err(CliError::runtime)?;
    let r0 = dip.sensor.reflectivity(lock).map_err(CliError::runtime)?;
    let sigma = reflectivity_noise_sigma(r0, fit_cfg.photons_per_sample, 0.0);
    let resolution = index_resolution(&dip, lock, sigma, fit_cfg.squeezing_db).map_err(CliError::runtime)?;
    let mut warnings = Vec::new();
    if !result.converged {
        warnings.push(format!("fit did not converge: {}", result.message));
    }
    let report = format!(
        "ka {:.6e} ± {:.2e}, kd {:.6e} ± {:.2e}, delta_n_max {:.6e}; converged {} in {} iterations\n",
        fitted.ka,
        result.std_error("ka").unwrap_or(f64::NAN),
        fitted.kd,
        result.std_error("kd").unwrap_or(f64::NAN),
        fitted.delta_n_max,
        result.converged,
        result.iterations
    );
    let summary = FitSummary {
        data_source,
        truth,
        locked_angle_deg: lock,
        fit: result,
        index_resolution: resolution,
        noise_sigma_reflectivity: sigma,
        squeezing_db: fit_cfg.squeezing_db,
    };
    let table = Table::new("fit_data")
        .num("t_s", problem.times_s.clone())
        .num("reflectivity", data)
        .num("model_reflectivity", model_curve);
    Ok(CommandOutput {
        files: vec![table.render(format)?, OutputFile::json("fit_result.json", &summary)?],
        warnings,
        report,
    })
}
