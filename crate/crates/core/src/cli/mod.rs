//! Command-line front end: subcommands, CSV and SVG output.
//!
//! Exit codes: 0 on success, 2 on usage or validation errors, 1 on runtime
//! errors (including a failing `oracle-check`).

mod output;

use std::f64::consts::TAU;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use crate::config::ExperimentConfig;
use crate::couplings::TransitionId;
use crate::error::{Error, Result};
use crate::experiments::{
    bell_report, bell_trace, calibrate_defaults, cnot_truth_table, cz_fringe, error_budget, fit_fringe, linspace,
    periodic_grid, rabi_scan, sample_shots, CalibrationGrid, ScanResult,
};
use crate::oracles::run_all_oracles;
use crate::sequence::Sideband;
pub use output::{scan_csv, svg_line_chart, table_csv};

#[derive(Parser, Debug)]
#[command(name = "ion-gate-sim", version, about = "Trapped-ion gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Configuration file (`section.key = value`); defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG plot output path.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Replace probabilities with simulated detection frequencies.
    #[arg(long)]
    shots: Option<u64>,
    /// Seed for `--shots`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RabiTransition {
    Carrier,
    Bsb,
    Raman,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rabi oscillation scan of pulse duration.
    Rabi {
        #[arg(long, value_enum)]
        transition: RabiTransition,
        /// Longest pulse duration, s.
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Ramsey fringe of the CNOT core against the second Raman phase (0 to 4π).
    CzFringe {
        #[arg(long, value_parser = clap::value_parser!(u32).range(0..=1))]
        prep: u32,
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Bell-state fidelity; the CSV holds the population trace.
    Bell {
        /// Samples per pulse or gap in the trace.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Per-channel fidelity loss.
    Budget {
        #[command(flatten)]
        common: Common,
    },
    /// CNOT truth table on the four computational basis states.
    TruthTable {
        #[command(flatten)]
        common: Common,
    },
    /// Calibrate laser parameters and the Ramsey gap.
    Calibrate {
        /// Write the calibrated configuration here.
        #[arg(long)]
        write_config: Option<PathBuf>,
        /// Use a 2x2x2 grid with one refinement round.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the simulator against the closed-form oracles.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
}

/// Run the CLI with process arguments (`argv[0]` is the program name).
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_command`] with explicit output streams.
pub fn run_with_io<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_file(path: &Option<PathBuf>, text: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn emit_scan(common: &Common, scan: ScanResult, title: &str) -> Result<ScanResult> {
    let scan = match common.shots {
        Some(n) => sample_shots(&scan, n, common.seed)?,
        None => scan,
    };
    write_file(&common.out, &scan_csv(&scan))?;
    if common.plot.is_some() {
        let series = |f: fn(&crate::experiments::ScanPoint) -> f64| scan.points.iter().map(|p| (p.x, f(p))).collect();
        let svg = svg_line_chart(
            title,
            &scan.variable_name,
            &[("p_g", series(|p| p.p_g)), ("p_up", series(|p| p.p_up)), ("p_down", series(|p| p.p_down))],
        );
        write_file(&common.plot, &svg)?;
    }
    Ok(scan)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Rabi { transition, tmax, points, common } => {
            let cfg = load(&common)?;
            if !(tmax > 0.0) || !tmax.is_finite() {
                return Err(Error::invalid(format!("--tmax must be > 0, got {tmax}")));
            }
            if points < 2 {
                return Err(Error::invalid("--points must be >= 2"));
            }
            let (tr, sb) = match transition {
                RabiTransition::Carrier => (TransitionId::QuadrupoleGUp, Sideband::Carrier),
                RabiTransition::Bsb => (TransitionId::QuadrupoleGUp, Sideband::Blue),
                RabiTransition::Raman => (TransitionId::RamanUpDown, Sideband::Carrier),
            };
            let scan = rabi_scan(tr, sb, &linspace(0.0, tmax, points), &cfg)?;
            let scan = emit_scan(&common, scan, "Rabi oscillation")?;
            let peak = scan.points.iter().map(|p| p.p_up).fold(0.0, f64::max);
            writeln!(out, "points = {}\nmax p_up = {peak:.4}", scan.points.len())?;
        }
        Command::CzFringe { prep, points, common } => {
            let cfg = load(&common)?;
            if points < 3 {
                return Err(Error::invalid("--points must be >= 3"));
            }
            let scan = cz_fringe(prep, &periodic_grid(0.0, 2.0 * TAU, points), &cfg)?;
            let scan = emit_scan(&common, scan, "CNOT core fringe")?;
            let fit = fit_fringe(&scan)?;
            writeln!(
                out,
                "contrast = {:.4}\nmean = {:.4}\nphase0 = {:.4}\nrms_residual = {:.2e}",
                fit.contrast(),
                fit.mean,
                fit.phase0,
                fit.rms_residual
            )?;
        }
        Command::Bell { samples, common } => {
            let cfg = load(&common)?;
            let report = bell_report(&cfg)?;
            writeln!(out, "F = {:.2}", report.fidelity)?;
            writeln!(out, "fidelity = {}", report.fidelity)?;
            writeln!(out, "ideal_fidelity = {:.6}", report.ideal_fidelity)?;
            writeln!(out, "duration_s = {}", report.duration)?;
            writeln!(out, "exceeds_product_bound = {}", report.fidelity > 0.5)?;
            if common.out.is_some() || common.plot.is_some() {
                emit_scan(&common, bell_trace(&cfg, samples)?, "Bell sequence populations")?;
            }
        }
        Command::Budget { common } => {
            let cfg = load(&common)?;
            let budget = error_budget(&cfg)?;
            writeln!(out, "baseline_fidelity = {:.4}", budget.baseline_fidelity)?;
            let rows: Vec<Vec<String>> = budget
                .contributions
                .iter()
                .map(|(c, v)| {
                    let _ = writeln!(out, "{} = {v:.4}", c.name());
                    vec![c.name().to_string(), v.to_string()]
                })
                .collect();
            write_file(&common.out, &table_csv(&cfg.digest(), &["channel", "contribution"], &rows))?;
            if common.plot.is_some() {
                let pts = budget.contributions.iter().enumerate().map(|(k, (_, v))| (k as f64, *v)).collect();
                write_file(&common.plot, &svg_line_chart("Error budget", "channel", &[("contribution", pts)]))?;
            }
        }
        Command::TruthTable { common } => {
            let cfg = load(&common)?;
            let rows = cnot_truth_table(&cfg)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let _ = writeln!(
                        out,
                        "{} -> {}  p = {:.6}  control kept = {:.6}",
                        r.input_label(),
                        r.expected_label(),
                        r.expected_population,
                        r.control_population
                    );
                    vec![
                        r.input_label(),
                        r.expected_label(),
                        r.expected_population.to_string(),
                        r.control_population.to_string(),
                    ]
                })
                .collect();
            write_file(
                &common.out,
                &table_csv(&cfg.digest(), &["input", "expected", "expected_population", "control_population"], &table),
            )?;
        }
        Command::Calibrate { write_config, quick, common } => {
            let cfg = load(&common)?;
            let grid = if quick {
                CalibrationGrid {
                    rabi_quad_hz: vec![40e3, 60e3],
                    rabi_raman_hz: vec![10e3, 20e3],
                    ramsey_gap_s: vec![100e-6, 300e-6],
                    refine_rounds: 1,
                }
            } else {
                CalibrationGrid::default()
            };
            let report = calibrate_defaults(&cfg, &grid)?;
            let b = report.best;
            let rows = vec![
                ("rabi_quad_hz", b.rabi_quad_hz),
                ("rabi_raman_hz", b.rabi_raman_hz),
                ("cnot_ramsey_gap_s", b.ramsey_gap_s),
                ("fidelity", b.fidelity),
                ("raman_share", b.raman_share),
                ("quadrupole_share", b.quadrupole_share),
                ("duration_s", b.duration),
                ("objective", b.objective),
            ];
            for (k, v) in &rows {
                writeln!(out, "{k} = {v}")?;
            }
            writeln!(out, "evaluations = {}", report.evaluations)?;
            let table: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]).collect();
            write_file(&common.out, &table_csv(&report.config.digest(), &["parameter", "value"], &table))?;
            if let Some(p) = write_config {
                report.config.save(p)?;
            }
        }
        Command::OracleCheck { common } => {
            let cfg = load(&common)?;
            let reports = run_all_oracles(&cfg)?;
            let mut rows = Vec::new();
            for r in &reports {
                writeln!(
                    out,
                    "{} {}: error {:.3e} (tolerance {:.0e})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_abs_error,
                    r.tolerance
                )?;
                rows.push(vec![r.name.clone(), r.max_abs_error.to_string(), r.tolerance.to_string(), r.pass.to_string()]);
            }
            write_file(&common.out, &table_csv(&cfg.digest(), &["name", "max_abs_error", "tolerance", "pass"], &rows))?;
            if reports.iter().any(|r| !r.pass) {
                return Ok(1);
            }
        }
    }
    Ok(0)
}
