//! `geo-ctrl`: scenario runner for attitude PD tracking and trajectory
//! optimization on SO(3).
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 solver
//! nonconvergence or integrator divergence (outputs are still written).

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use geo_ctrl::experiments::{self, output_path, run_ilqr, run_pd};
use geo_ctrl::records::{write_csv, write_sidecar, Sidecar};
use geo_ctrl::scenario::{self, load_scenario, LoadedScenario, Validated};

#[derive(Parser)]
#[command(
    name = "geo-ctrl",
    version,
    about = "Attitude PD tracking and iterative LQR trajectory optimization on SO(3)",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Directory for CSV and sidecar outputs
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Suppress the summary on stdout
    #[arg(long)]
    quiet: bool,
    /// Seed for randomized self-tests; echoed into sidecars
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop PD tracking scenario (both feedback laws)
    Pd {
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a trajectory-optimization scenario
    Ilqr {
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the embedded numerical self-test suite
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-run a scenario over a list of values for one numeric field
    Sweep {
        scenario: PathBuf,
        /// Dot-separated path of a numeric config field, e.g. gains.kp.diag.0
        #[arg(long)]
        param: String,
        /// Comma-separated values to substitute
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print a commented scenario template to stdout
    Init { kind: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap distinguishes help/version from real usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let code = match cli.command {
        Command::Pd { scenario, common } => run_pd_command(&scenario, &common),
        Command::Ilqr { scenario, common } => run_ilqr_command(&scenario, &common),
        Command::Check { common } => run_check(&common),
        Command::Sweep {
            scenario,
            param,
            values,
            common,
        } => run_sweep(&scenario, &param, &values, &common),
        Command::Init { kind } => run_init(&kind),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, common: &CommonArgs) -> Result<LoadedScenario, String> {
    let mut loaded = load_scenario(path).map_err(|e| e.to_string())?;
    if let Some(seed) = common.seed {
        loaded.seed = seed;
    }
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", common.out_dir.display()))?;
    Ok(loaded)
}

fn write_all<R: geo_ctrl::records::CsvRecord>(records: &[R], path: &Path) -> Result<(), String> {
    write_csv(records, path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run_pd_command(path: &Path, common: &CommonArgs) -> Result<u8, String> {
    let loaded = load(path, common)?;
    let Validated::Pd(ref pd_scenario) = loaded.validated else {
        return Err("scenario kind is not `pd`".to_string());
    };
    let outcome = run_pd(pd_scenario);

    let stem = &loaded.output_stem;
    let log_path = output_path(&common.out_dir, stem, "_log.csv");
    let trace_path = output_path(&common.out_dir, stem, "_trace.csv");
    write_all(&outcome.log, &log_path)?;
    write_all(&outcome.trace, &trace_path)?;
    let sidecar = Sidecar {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: loaded.seed,
        config: loaded.echo.clone(),
        summary: outcome.summary,
    };
    let sidecar_path = output_path(&common.out_dir, stem, ".meta.json");
    write_sidecar(&sidecar, &sidecar_path)
        .map_err(|e| format!("cannot write {}: {e}", sidecar_path.display()))?;

    if !common.quiet {
        println!("wrote {}", log_path.display());
        println!("wrote {}", trace_path.display());
        println!("wrote {}", sidecar_path.display());
        for (name, s) in [
            ("log", &outcome.summary.log),
            ("trace", &outcome.summary.trace),
        ] {
            println!(
                "{name:5} time-to-0.1rad: {}  time-to-1e-3rad: {}  final error: {:.3e} rad{}",
                s.time_to_0_1_rad
                    .map(|t| format!("{t:.3} s"))
                    .unwrap_or_else(|| "never".to_string()),
                s.time_to_1e_3_rad
                    .map(|t| format!("{t:.3} s"))
                    .unwrap_or_else(|| "never".to_string()),
                s.final_error_angle_rad,
                s.diverged_at_step
                    .map(|k| format!("  DIVERGED at step {k}"))
                    .unwrap_or_default(),
            );
        }
    }
    Ok(if outcome.failed() { 2 } else { 0 })
}

fn run_ilqr_command(path: &Path, common: &CommonArgs) -> Result<u8, String> {
    let loaded = load(path, common)?;
    let Validated::Ilqr(ref ilqr_scenario) = loaded.validated else {
        return Err("scenario kind is not `ilqr`".to_string());
    };
    let outcome = run_ilqr(ilqr_scenario).map_err(|e| e.to_string())?;

    let stem = &loaded.output_stem;
    let traj_path = output_path(&common.out_dir, stem, "_trajectory.csv");
    let conv_path = output_path(&common.out_dir, stem, "_convergence.csv");
    write_all(&outcome.trajectory, &traj_path)?;
    write_all(&outcome.convergence, &conv_path)?;
    let sidecar = Sidecar {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: loaded.seed,
        config: loaded.echo.clone(),
        summary: outcome.summary.clone(),
    };
    let sidecar_path = output_path(&common.out_dir, stem, ".meta.json");
    write_sidecar(&sidecar, &sidecar_path)
        .map_err(|e| format!("cannot write {}: {e}", sidecar_path.display()))?;

    if !common.quiet {
        println!("wrote {}", traj_path.display());
        println!("wrote {}", conv_path.display());
        println!("wrote {}", sidecar_path.display());
        println!(
            "converged: {}  iterations: {}  final cost: {:.6e}  final error: {:.3e} rad",
            outcome.summary.converged,
            outcome.summary.iterations,
            outcome.summary.final_total_cost,
            outcome.summary.final_error_angle_rad,
        );
    }
    Ok(if outcome.summary.converged { 0 } else { 2 })
}

fn run_check(common: &CommonArgs) -> Result<u8, String> {
    let seed = common.seed.unwrap_or(0);
    let reports = geo_ctrl_core::selftest::run_all(seed);
    let mut all_passed = true;
    for report in &reports {
        all_passed &= report.passed();
        if !common.quiet {
            println!(
                "[{}] {}: measured {:.3e} (threshold {:.0e})",
                if report.passed() { "PASS" } else { "FAIL" },
                report.name,
                report.measured,
                report.threshold
            );
        }
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn run_sweep(path: &Path, param: &str, values: &[f64], common: &CommonArgs) -> Result<u8, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let base: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", common.out_dir.display()))?;
    let fallback_stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());

    // instances are independent; run them in parallel, one output set each
    let results: Vec<Result<u8, String>> = values
        .par_iter()
        .map(|&value| {
            let mut instance = base.clone();
            experiments::set_config_param(&mut instance, param, value)?;
            let config: scenario::ScenarioConfig =
                serde_json::from_value(instance).map_err(|e| e.to_string())?;
            let sanitized = param.replace('.', "-");
            let stem_suffix = format!("_{sanitized}_{value}");
            let mut loaded = scenario::validate(config, &fallback_stem)
                .map_err(|e| format!("value {value}: {e}"))?;
            loaded.output_stem = format!("{}{stem_suffix}", loaded.output_stem);
            loaded.echo.output = Some(loaded.output_stem.clone());
            if let Some(seed) = common.seed {
                loaded.seed = seed;
            }
            run_loaded(&loaded, common)
        })
        .collect();

    let mut worst = 0;
    for result in results {
        worst = worst.max(result?);
    }
    Ok(worst)
}

/// Shared runner for sweep instances (the single-run commands keep
/// their own copies so their summaries can differ).
fn run_loaded(loaded: &LoadedScenario, common: &CommonArgs) -> Result<u8, String> {
    let stem = &loaded.output_stem;
    match &loaded.validated {
        Validated::Pd(pd_scenario) => {
            let outcome = run_pd(pd_scenario);
            write_all(
                &outcome.log,
                &output_path(&common.out_dir, stem, "_log.csv"),
            )?;
            write_all(
                &outcome.trace,
                &output_path(&common.out_dir, stem, "_trace.csv"),
            )?;
            let sidecar = Sidecar {
                tool_version: env!("CARGO_PKG_VERSION"),
                seed: loaded.seed,
                config: loaded.echo.clone(),
                summary: outcome.summary,
            };
            write_sidecar(&sidecar, &output_path(&common.out_dir, stem, ".meta.json"))
                .map_err(|e| e.to_string())?;
            if !common.quiet {
                println!("sweep instance written: {stem}");
            }
            Ok(if outcome.failed() { 2 } else { 0 })
        }
        Validated::Ilqr(ilqr_scenario) => {
            let outcome = run_ilqr(ilqr_scenario).map_err(|e| e.to_string())?;
            write_all(
                &outcome.trajectory,
                &output_path(&common.out_dir, stem, "_trajectory.csv"),
            )?;
            write_all(
                &outcome.convergence,
                &output_path(&common.out_dir, stem, "_convergence.csv"),
            )?;
            let sidecar = Sidecar {
                tool_version: env!("CARGO_PKG_VERSION"),
                seed: loaded.seed,
                config: loaded.echo.clone(),
                summary: outcome.summary.clone(),
            };
            write_sidecar(&sidecar, &output_path(&common.out_dir, stem, ".meta.json"))
                .map_err(|e| e.to_string())?;
            if !common.quiet {
                println!("sweep instance written: {stem}");
            }
            Ok(if outcome.summary.converged { 0 } else { 2 })
        }
    }
}

fn run_init(kind: &str) -> Result<u8, String> {
    let kind = match kind {
        "pd" => scenario::ExperimentKind::Pd,
        "ilqr" => scenario::ExperimentKind::Ilqr,
        other => {
            return Err(format!(
                "unknown template kind `{other}` (expected pd or ilqr)"
            ))
        }
    };
    let config = scenario::template(kind);
    println!(
        "{}",
        serde_json::to_string_pretty(&config).expect("template serializes")
    );
    Ok(0)
}
