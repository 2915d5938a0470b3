//! `ehgo simulate | sweep | validate | reproduce-fig1`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ehgo_core::numerics::hurwitz_check;
use ehgo_core::observers::{pd_monitor, validate_phi1, RiccatiState};
use ehgo_core::simulator::{
    config_for_epsilon, epsilon_sweep, lookup, reduced_config, simulate, simulate_state_feedback,
};
use ehgo_core::system::origin_residuals;
use ehgo_core::{Mode, SimConfig, Trajectory};
use nalgebra::DMatrix;

use crate::config::{parse_config, ConfigError};
use crate::manifest::RunManifest;
use crate::output::{format_g15, write_csv, Columns, IoError};

/// Largest acceptable `validate_phi1` discrepancy.
pub const PHI1_TOLERANCE: f64 = 1e-5;
const PHI1_PROBE_STEP: f64 = 1e-4;
const PHI1_PROBE_SPAN: f64 = 1.0;

pub const FIG1_FILES: [&str; 5] = [
    "fig1a_output.csv",
    "fig1b_eta.csv",
    "fig1c_riccati.csv",
    "fig1d_control.csv",
    "plot_fig1.py",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Sim(#[from] ehgo_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ehgo",
    version,
    about = "Output-feedback simulations with an EKF and an extended high-gain observer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed loop and write trajectory.csv and manifest.txt.
    Simulate(SimulateArgs),
    /// Compare output-feedback runs over several epsilons against the reduced loop.
    Sweep(SweepArgs),
    /// Check the plant definition and the EKF weights.
    Validate(ConfigArgs),
    /// Write the four panel tables of the published figure and a plot script.
    #[command(name = "reproduce-fig1")]
    ReproduceFig1(SweepArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat `key = value` config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feed the raw observer estimates to the rest of the loop.
    #[arg(long)]
    no_saturation: bool,
    /// Reserved. Runs are deterministic and use no random numbers.
    #[arg(long)]
    seedless: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Reduced,
    Output,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Strictly decreasing list, e.g. 0.01,0.005,0.001.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.005,0.001")]
    epsilons: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status: 0 on success, 1 on a simulation or validation
/// failure, 2 on a usage error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
        Command::ReproduceFig1(args) => cmd_reproduce_fig1(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<SimConfig, CliError> {
    if args.seedless {
        return Err(CliError::Usage(
            "--seedless is reserved: runs use no random numbers".into(),
        ));
    }
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => parse_config("")?,
    };
    if args.no_saturation {
        cfg.saturation_enabled = false;
    }
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(|e| IoError::new(path, e))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Reduced => Mode::Reduced,
            ModeArg::Output => Mode::OutputFeedback,
        };
        cfg.validate(&lookup(&cfg.system)?)?;
    }
    let start = Instant::now();
    let traj = simulate(&cfg)?;
    let duration = start.elapsed();

    create_dir(&args.out)?;
    let csv = args.out.join("trajectory.csv");
    let manifest_path = args.out.join("manifest.txt");
    write_csv(&traj, &csv)?;
    let mut manifest = RunManifest::new(cfg, "simulate");
    manifest.outputs = vec![csv.clone(), manifest_path.clone()];
    manifest.duration = duration;
    manifest.write(&manifest_path)?;

    if let Some(last) = traj.last() {
        println!(
            "{} samples, t = {}, y = {}, eta = {:?}",
            traj.len(),
            format_g15(last.t),
            format_g15(last.y),
            last.eta
        );
    }
    println!("wrote {} and {}", csv.display(), manifest_path.display());
    Ok(())
}

fn check_epsilons(eps: &[f64]) -> Result<(), CliError> {
    let ok = !eps.is_empty()
        && eps.iter().all(|e| *e > 0.0 && e.is_finite())
        && eps.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--epsilons must be positive and strictly decreasing, got {eps:?}"
        )))
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    check_epsilons(&args.epsilons)?;
    let start = Instant::now();
    let report = epsilon_sweep(&cfg, &args.epsilons)?;
    let duration = start.elapsed();

    println!("epsilon,sup_dev_theta,sup_dev_eta_tilde,post_transient_xi_error,max_abs_chi");
    for i in 0..report.len() {
        println!(
            "{},{},{},{},{}",
            format_g15(report.epsilons[i]),
            format_g15(report.sup_dev_theta[i]),
            format_g15(report.sup_dev_eta_tilde[i]),
            format_g15(report.post_transient_xi_error[i]),
            format_g15(report.max_abs_chi[i]),
        );
    }
    let decreasing = report.sup_dev_theta.windows(2).all(|w| w[1] < w[0]);
    println!(
        "deviation from the reduced loop {} as epsilon shrinks",
        if decreasing {
            "decreases"
        } else {
            "does not decrease"
        }
    );

    let out = args.out.unwrap_or_else(|| PathBuf::from("sweep"));
    create_dir(&out)?;
    let csv = out.join("report.csv");
    let manifest_path = out.join("manifest.txt");
    write_csv(&report, &csv)?;
    let mut manifest = RunManifest::new(cfg, format!("sweep --epsilons {}", join(&args.epsilons)));
    manifest.outputs = vec![csv.clone(), manifest_path.clone()];
    manifest.duration = duration;
    manifest.write(&manifest_path)?;
    println!("wrote {} and {}", csv.display(), manifest_path.display());
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_g15(*x))
        .collect::<Vec<_>>()
        .join(",")
}

/// One line of the `validate` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Consistency checks on a resolved config: `φ₁` against a finite
/// difference along a state-feedback probe, the origin being an equilibrium,
/// the observer polynomial, and positive definiteness of `P` along the
/// reduced run.
pub fn validation_checks(cfg: &SimConfig) -> Result<Vec<Check>, CliError> {
    let design = lookup(&cfg.system)?;
    let (sys, law) = (&design.system, &design.law);
    let mut checks = Vec::new();

    let probe = simulate_state_feedback(
        sys,
        law,
        &cfg.initial.eta,
        &cfg.initial.xi,
        PHI1_PROBE_STEP,
        PHI1_PROBE_SPAN,
        1,
    );
    checks.push(match probe {
        Ok(probe) => {
            let err = validate_phi1(sys, law, &probe);
            Check {
                name: "phi1",
                passed: err < PHI1_TOLERANCE,
                detail: format!(
                    "max |phi1 - d/dt(C1 eta)| = {} along the state-feedback probe (limit {})",
                    format_g15(err),
                    format_g15(PHI1_TOLERANCE)
                ),
            }
        }
        Err(e) => Check {
            name: "phi1",
            passed: false,
            detail: format!("state-feedback probe failed: {e}"),
        },
    });

    let (phi0, a) = origin_residuals(sys);
    let gamma = law
        .eval(&vec![0.0; sys.internal_dim()], &vec![0.0; sys.rho()])
        .abs();
    checks.push(Check {
        name: "origin",
        passed: phi0 <= 1e-12 && a <= 1e-12 && gamma <= 1e-12,
        detail: format!(
            "|phi0(0,0)| = {}, |a(0,0)| = {}, |gamma(0,0)| = {}",
            format_g15(phi0),
            format_g15(a),
            format_g15(gamma)
        ),
    });

    checks.push(Check {
        name: "hurwitz",
        passed: hurwitz_check(cfg.gains.alphas()),
        detail: format!("alpha = {:?}", cfg.gains.alphas()),
    });

    let red = simulate(&reduced_config(cfg));
    checks.push(match red {
        Ok(traj) => riccati_check(&traj),
        Err(e) => Check {
            name: "riccati",
            passed: false,
            detail: format!("reduced run failed: {e}"),
        },
    });
    Ok(checks)
}

fn riccati_check(traj: &Trajectory) -> Check {
    let m = traj.internal_dim;
    let (mut lo, mut hi, mut defect) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for r in &traj.records {
        let rep = pd_monitor(&RiccatiState::new(DMatrix::from_row_slice(m, m, &r.p)));
        lo = lo.min(rep.lambda_min);
        hi = hi.max(rep.lambda_max);
        defect = defect.max(rep.symmetric_defect);
    }
    Check {
        name: "riccati",
        passed: lo > 0.0 && defect <= 1e-9,
        detail: format!(
            "eigenvalues of P in [{}, {}], max asymmetry {} along the reduced run",
            format_g15(lo),
            format_g15(hi),
            format_g15(defect)
        ),
    }
}

fn cmd_validate(args: ConfigArgs) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let checks = validation_checks(&cfg)?;
    for c in &checks {
        println!(
            "{} {:8} {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

/// Output-feedback runs for each epsilon plus the reduced run, all sampled
/// on the base config's record grid.
pub fn fig1_tables(cfg: &SimConfig, epsilons: &[f64]) -> Result<[Columns; 4], CliError> {
    let red = simulate(&reduced_config(cfg))?;
    let mut runs = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let traj = simulate(&config_for_epsilon(cfg, eps)?)?;
        if traj.len() != red.len() {
            return Err(CliError::Failed(format!(
                "epsilon = {eps}: {} samples against {} for the reduced run",
                traj.len(),
                red.len()
            )));
        }
        runs.push((eps, traj));
    }
    let t: Vec<f64> = red.times().collect();
    let panel = |get: &dyn Fn(&ehgo_core::simulator::Record) -> f64| {
        let mut series = vec![("reduced".to_string(), red.records.iter().map(get).collect())];
        for (eps, traj) in &runs {
            series.push((
                format!("eps_{}", format_g15(*eps)),
                traj.records.iter().map(get).collect(),
            ));
        }
        Columns {
            t: t.clone(),
            series,
        }
    };
    Ok([
        panel(&|r| r.y),
        panel(&|r| r.eta[0]),
        panel(&|r| r.p[0]),
        panel(&|r| r.u),
    ])
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot the four panels written by `ehgo reproduce-fig1` into fig1.png."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
PANELS = [
    ("fig1a_output.csv", "(a) output y"),
    ("fig1b_eta.csv", "(b) internal state eta"),
    ("fig1c_riccati.csv", "(c) Riccati solution P"),
    ("fig1d_control.csv", "(d) control u"),
]


def load(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = list(csv.reader(f))
    header, data = rows[0], [[float(x) for x in r] for r in rows[1:]]
    cols = list(zip(*data)) if data else [[] for _ in header]
    return header, cols


def main():
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for ax, (name, title) in zip(axes.flat, PANELS):
        header, cols = load(name)
        t = cols[0]
        for label, values in zip(header[1:], cols[1:]):
            if label == "reduced":
                ax.plot(t, values, "k--", label=label, zorder=3)
            else:
                ax.plot(t, values, "-", label=label.replace("eps_", "eps = "))
        ax.set_title(title)
        ax.set_xlabel("t")
        ax.grid(True, alpha=0.3)
    axes.flat[0].legend()
    fig.tight_layout()
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "fig1.png")
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
"#;

/// Writes the four panel tables and the plot script into `out`, which must
/// not exist or be an empty directory. Files are assembled in a sibling
/// temporary directory and moved into place with one rename, so `out` never
/// holds a partial set.
pub fn write_fig1(tables: &[Columns; 4], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    if out.exists() {
        let empty = fs::read_dir(out)
            .map(|mut d| d.next().is_none())
            .unwrap_or(false);
        if !empty {
            return Err(CliError::Usage(format!(
                "{} exists and is not an empty directory",
                out.display()
            )));
        }
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    create_dir(&parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".ehgo-fig1-")
        .tempdir_in(&parent)
        .map_err(|e| IoError::new(&parent, e))?;
    for (table, name) in tables.iter().zip(FIG1_FILES) {
        write_csv(table, &staging.path().join(name))?;
    }
    let script = staging.path().join(FIG1_FILES[4]);
    fs::write(&script, PLOT_SCRIPT).map_err(|e| IoError::new(&script, e))?;

    if out.exists() {
        fs::remove_dir(out).map_err(|e| IoError::new(out, e))?;
    }
    fs::rename(staging.path(), out).map_err(|e| IoError::new(out, e))?;
    // the directory now lives at `out`; nothing is left for the guard to remove
    let _ = staging.keep();
    Ok(FIG1_FILES.iter().map(|f| out.join(f)).collect())
}

fn cmd_reproduce_fig1(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    check_epsilons(&args.epsilons)?;
    let start = Instant::now();
    let tables = fig1_tables(&cfg, &args.epsilons)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("fig1"));
    let files = write_fig1(&tables, &out)?;

    let mut manifest = RunManifest::new(
        cfg,
        format!("reproduce-fig1 --epsilons {}", join(&args.epsilons)),
    );
    manifest.outputs = files;
    manifest.duration = start.elapsed();
    print!("{}", manifest.render());
    Ok(())
}
