//! `skybell`: CHSH reports, angular scans, signal fits and HBT baseline scans
//! from TOML experiment configs.
//!
//! Exit codes: 0 success, 2 config or input error, 3 numerical error
//! (including a degenerate fit), 4 I/O error.

mod config;
mod error;
mod grid;
mod manifest;
mod scan_csv;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use skybell_core::fit::{extract_signal, FitReport};
use skybell_core::montecarlo::{estimate_chsh, monte_carlo_scan};
use skybell_core::polarization::PolarizerAxis;
use skybell_core::propagation::hbt_baseline_scan;
use skybell_core::scenarios::{angular_scan, chsh_with_background, violation_threshold, Scenario};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Parser)]
#[command(name = "skybell", version, about = "Entangled-photon correlation model for two-source sky experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic CHSH value of the mixture, plus a Monte Carlo estimate with --n.
    Chsh {
        #[arg(long)]
        config: PathBuf,
        /// Trials per CHSH setting.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Optional JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlator over a grid of polarizer angles, written as CSV.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Polarizer A angles in degrees, start:stop:steps (stop excluded).
        #[arg(long = "grid-a")]
        grid_a: String,
        /// Polarizer B angles in degrees, start:stop:steps (stop excluded).
        #[arg(long = "grid-b")]
        grid_b: String,
        /// Monte Carlo trials per grid point; analytic when omitted.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit signal and product-background amplitudes to a scan CSV.
    Fit {
        /// Scan CSV written by `skybell scan`.
        input: PathBuf,
        /// Source 1 polarization axis in degrees (defaults to the config).
        #[arg(long)]
        beta1: Option<f64>,
        /// Source 2 polarization axis in degrees (defaults to the config).
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the scenario from the config or the scan manifest.
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// JSON report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HBT intensities as the detector baseline is varied, written as CSV.
    Hbt {
        #[arg(long)]
        config: PathBuf,
        /// Baselines in length units, start:stop:steps (both ends included).
        #[arg(long)]
        baseline: String,
        /// Draw random source phases per row.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::I => Scenario::I,
            ScenarioArg::II => Scenario::II,
        }
    }
}

#[derive(Serialize)]
struct ChshReport {
    #[serde(rename = "S_analytic")]
    s_analytic: f64,
    violation_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<skybell_core::montecarlo::ChshEstimate>,
    manifest: PathBuf,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    report: &'a FitReport,
    scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<PathBuf>,
}

/// Six-decimal display without a stray minus sign on zero.
fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn chsh(config: &Path, n: Option<u64>, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let cfg = config::load(config)?;
    let s = chsh_with_background(&cfg.experiment, &cfg.chsh)?;
    println!("S = {} (analytic)", fixed6(s));
    let threshold = violation_threshold(&cfg.experiment, &cfg.chsh)?;
    match threshold {
        Some(f) => println!("violation threshold: entangled fraction > {}", fixed6(f)),
        None => println!("no violation at these settings for any entangled fraction"),
    }
    let seed = seed.or(cfg.file.rng.seed).unwrap_or(0);
    let estimate = match n {
        Some(n) => {
            let est = estimate_chsh(&cfg.experiment, &cfg.chsh, n, seed)?;
            println!(
                "S = {} ± {} (Monte Carlo, n = {n} per setting, seed = {seed})",
                fixed6(est.s_hat),
                fixed6(est.stderr)
            );
            Some(est)
        }
        None => None,
    };
    if let Some(out) = out {
        let mut m = RunManifest::new("chsh");
        m.config = Some(config.to_owned());
        m.scenario = Some(cfg.experiment.scenario);
        m.seed = n.map(|_| seed);
        m.n = n;
        m.outputs = vec![out.to_owned()];
        let report = ChshReport {
            s_analytic: s,
            violation_threshold: threshold,
            monte_carlo: estimate,
            manifest: manifest::manifest_path(out),
        };
        write_text(out, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
        manifest::write(&m, out)?;
    }
    Ok(())
}

fn scan(config: &Path, grid_a: &str, grid_b: &str, n: Option<u64>, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = config::load(config)?;
    let ga_deg = grid::angle_grid_degrees(grid_a)?;
    let gb_deg = grid::angle_grid_degrees(grid_b)?;
    let ga: Vec<f64> = ga_deg.iter().map(|d| d.to_radians()).collect();
    let gb: Vec<f64> = gb_deg.iter().map(|d| d.to_radians()).collect();
    let seed = seed.or(cfg.file.rng.seed).unwrap_or(0);
    let result = match n {
        Some(0) => return Err(CliError::config("--n must be ≥ 1")),
        Some(n) => monte_carlo_scan(&cfg.experiment, &ga, &gb, n, seed)?,
        None => angular_scan(&cfg.experiment, &ga, &gb)?,
    };
    scan_csv::write(out, &result, Some((&ga_deg, &gb_deg)))?;
    let mut m = RunManifest::new("scan");
    m.config = Some(config.to_owned());
    m.scenario = Some(cfg.experiment.scenario);
    m.seed = n.map(|_| seed);
    m.n = n;
    m.outputs = vec![out.to_owned()];
    manifest::write(&m, out)?;
    eprintln!("wrote {} rows to {}", result.rows.len(), out.display());
    Ok(())
}

fn fit(
    input: &Path,
    beta1: Option<f64>,
    beta2: Option<f64>,
    config: Option<&Path>,
    scenario: Option<ScenarioArg>,
    out: Option<&Path>,
) -> CliResult<()> {
    let source = manifest::read_for(input);
    let cfg = match config {
        Some(path) => Some(config::load(path)?),
        // the scan's own config, when its manifest points at a readable one
        None => source.as_ref().and_then(|m| m.config.as_deref()).and_then(|p| config::load(p).ok()),
    };
    let scenario = scenario
        .map(Scenario::from)
        .or(cfg.as_ref().map(|c| c.experiment.scenario))
        .or(source.as_ref().and_then(|m| m.scenario))
        .ok_or_else(|| {
            CliError::config("scenario unknown: pass --scenario or --config, or keep the scan's manifest next to it")
        })?;
    let axis = |flag: Option<f64>, name: &str, from_cfg: fn(&config::LoadedConfig) -> PolarizerAxis| match (
        flag,
        cfg.as_ref(),
    ) {
        (Some(deg), _) if deg.is_finite() => Ok(PolarizerAxis::from_degrees(deg)),
        (Some(deg), _) => Err(CliError::config(format!("--{name} must be finite, got {deg}"))),
        (None, Some(c)) => Ok(from_cfg(c)),
        (None, None) => Err(CliError::config(format!("--{name} is required without --config"))),
    };
    let b1 = axis(beta1, "beta1", |c| c.experiment.background.axis1())?;
    let b2 = axis(beta2, "beta2", |c| c.experiment.background.axis2())?;

    let data = scan_csv::read(input, scenario)?;
    let report = extract_signal(&data, b1, b2)?;
    let output = FitOutput { report: &report, scenario, manifest: out.map(manifest::manifest_path) };
    let text = serde_json::to_string_pretty(&output).expect("report serializes") + "\n";
    match out {
        Some(out) => {
            write_text(out, &text)?;
            let mut m = RunManifest::new("fit");
            m.config = config.map(Path::to_owned);
            m.scenario = Some(scenario);
            m.outputs = vec![out.to_owned()];
            manifest::write(&m, out)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn hbt(config: &Path, baseline: &str, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = config::load(config)?;
    let lengths = grid::linear_grid(baseline)?;
    if let Some(bad) = lengths.iter().find(|l| **l < 0.0) {
        return Err(CliError::config(format!("baseline lengths must be ≥ 0, got {bad}")));
    }
    let rows = hbt_baseline_scan(&cfg.experiment.geometry, &lengths, cfg.experiment.normalization, seed)?;
    let io = |e: csv::Error| CliError::io(out, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(out).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => CliError::io(out, err),
        other => CliError::io(out, std::io::Error::other(format!("{other:?}"))),
    })?;
    for r in &rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    let mut m = RunManifest::new("hbt");
    m.config = Some(config.to_owned());
    m.seed = seed;
    m.outputs = vec![out.to_owned()];
    manifest::write(&m, out)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Chsh { config, n, seed, out } => chsh(&config, n, seed, out.as_deref()),
        Command::Scan { config, grid_a, grid_b, n, seed, out } => scan(&config, &grid_a, &grid_b, n, seed, &out),
        Command::Fit { input, beta1, beta2, config, scenario, out } => {
            fit(&input, beta1, beta2, config.as_deref(), scenario, out.as_deref())
        }
        Command::Hbt { config, baseline, seed, out } => hbt(&config, &baseline, seed, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
