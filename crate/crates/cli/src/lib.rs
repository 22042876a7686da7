//! Command-line front end for the plasmon-squeeze simulation library.

pub mod commands;
pub mod config;
pub mod output;
pub mod reference;

use std::fmt::Display;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::CommandOutput;
use crate::config::RunConfig;
use crate::output::{write_atomically, Format, ManifestEntry, OutputFile, RunManifest, MANIFEST_NAME};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plasmon-squeeze", version, about = "Quantum-enhanced SPR biosensing simulator")]
pub struct Cli {
    /// JSON run configuration; the bundled default when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `rng_seed` from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; rayon's default when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Reflectivity versus internal angle and the resonance location.
    Dip,
    /// Detected squeezing across the dip.
    SqueezingScan,
    /// Binding sensorgram at a locked angle.
    Bind,
    /// Sideband SNR of squeezed and coherent probes along a sensorgram.
    Snr,
    /// Squeezing at points along the loss chain.
    Budget,
    /// Fit binding rates and index change to a sensorgram.
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dip => "dip",
            Command::SqueezingScan => "squeezing-scan",
            Command::Bind => "bind",
            Command::Snr => "snr",
            Command::Budget => "budget",
            Command::Fit => "fit",
        }
    }
}

pub fn run_command(command: Command, cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    match command {
        Command::Dip => commands::dip(cfg, format),
        Command::SqueezingScan => commands::squeezing_scan(cfg, format),
        Command::Bind => commands::bind(cfg, format),
        Command::Snr => commands::snr(cfg, format),
        Command::Budget => commands::budget(cfg, format),
        Command::Fit => commands::fit(cfg, format),
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Loads the configuration, runs the command and writes its outputs, then
/// the manifest. Returns the text report.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let started_at = now();
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    let result = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?
            .install(|| run_command(cli.command, &cfg, cli.format))?,
        None => run_command(cli.command, &cfg, cli.format)?,
    };
    for w in &result.warnings {
        log::warn!("{w}");
    }
    write_atomically(&cli.out, &result.files)?;
    let manifest = RunManifest {
        command: cli.command.name().to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config_hash: cfg.hash(),
        rng_seed: cfg.rng_seed,
        threads: cli.threads,
        format: cli.format,
        started_at,
        finished_at: now(),
        warnings: result.warnings.clone(),
        outputs: result
            .files
            .iter()
            .map(|f| ManifestEntry {
                file: f.name.clone(),
                sha256: f.sha256(),
                bytes: f.bytes.len(),
            })
            .collect(),
    };
    write_atomically(&cli.out, &[OutputFile::json(MANIFEST_NAME, &manifest)?])?;
    let mut report = result.report;
    for w in &result.warnings {
        report.push_str(&format!("warning: {w}\n"));
    }
    report.push_str(&format!("wrote {} files to {}\n", result.files.len() + 1, cli.out.display()));
    Ok(report)
}
