//! `gwshape` - run canned shaping experiments, validate policy files, and
//! simulate individual scenarios.
//!
//! Exit codes: 0 success, 1 invalid input (policy, scenario, or experiment
//! parameters), 2 filesystem trouble.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gwshape_core::policy::parse_policy;
use gwshape_core::sim::{run_with_trace, trace_to_csv, Scenario};
use gwshape_core::validate_policy;

use gwshape_cli::experiments::{run_experiment, scenario_digest, Overrides, DEFAULT_SEED};
use gwshape_cli::report;

#[derive(Parser)]
#[command(name = "gwshape", version, about = "Gateway bandwidth-sharing experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment's variant sweep; write CSV and gnuplot data.
    Run {
        /// Experiment id, 1..=4.
        #[arg(long)]
        experiment: u8,
        /// Top-level seed; every variant derives from it.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Override a parameter (repeatable): x=50,70 duration=10
        /// classify_cost=5 rate=5000000 lan_rate=... wan_rate=... sessions=4
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a policy file; report every defect, not just the first.
    Validate {
        #[arg(long)]
        policy: PathBuf,
    },
    /// Run one scenario file; write metrics and the full event trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

enum Failure {
    /// Bad input: exit 1.
    Invalid(String),
    /// Filesystem: exit 2.
    Io(String),
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn cmd_run(experiment: u8, seed: u64, out: &Path, set: &[String]) -> Result<(), Failure> {
    let overrides = Overrides::parse(set).map_err(|e| Failure::Invalid(e.to_string()))?;
    let result = run_experiment(experiment, &overrides, seed)
        .map_err(|e| Failure::Invalid(e.to_string()))?;

    ensure_dir(out)?;
    let csv_path = out.join(format!("exp{experiment}.csv"));
    let dat_path = out.join(format!("exp{experiment}.dat"));
    write_file(&csv_path, &report::experiment_csv(&result))?;
    write_file(&dat_path, &report::experiment_plot_data(&result))?;

    println!(
        "experiment {experiment}: {} variants, seed {seed}",
        result.variants.len()
    );
    print!("{}", report::utilization_table(&result));
    println!("wrote {} and {}", csv_path.display(), dat_path.display());
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let text = read_to_string(path)?;
    let config = parse_policy(&text).map_err(|e| Failure::Invalid(e.to_string()))?;
    let policy = validate_policy(&config).map_err(|errors| {
        let mut msg = format!("{} defect(s):", errors.len());
        for e in errors {
            let _ = write!(msg, "\n  {e}");
        }
        Failure::Invalid(msg)
    })?;
    println!(
        "ok: {} groups ({}), {} rules, default {:?}",
        policy.groups.len(),
        policy.grouping_method.as_str(),
        policy.rule_table.len(),
        policy.groups[policy.default_group].name,
    );
    for g in &policy.groups {
        println!("  {} {}%", g.name, g.share_percent);
    }
    Ok(())
}

fn cmd_simulate(path: &Path, out: &Path) -> Result<(), Failure> {
    let text = read_to_string(path)?;
    let scenario =
        Scenario::parse(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    scenario
        .validate()
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let (report, trace) =
        run_with_trace(&scenario).map_err(|e| Failure::Invalid(e.to_string()))?;

    ensure_dir(out)?;
    let report_path = out.join("report.csv");
    let trace_path = out.join("trace.csv");
    let timeline_path = out.join("timeline.dat");
    write_file(&report_path, &report::scenario_report_csv(&report))?;
    write_file(&trace_path, &trace_to_csv(&trace))?;
    write_file(&timeline_path, &report::timeline_plot_data(&report))?;

    println!("scenario {}", scenario_digest(&scenario));
    println!(
        "measured {}: {} bytes, {} packets, {} drops, utilization {:.6}",
        report.measured.as_str(),
        report.total_bytes,
        report.total_packets,
        report.total_drops,
        report.utilization
    );
    println!(
        "wrote {}, {}, {}",
        report_path.display(),
        trace_path.display(),
        timeline_path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Run {
            experiment,
            seed,
            out,
            set,
        } => cmd_run(*experiment, *seed, out, set),
        Cmd::Validate { policy } => cmd_validate(policy),
        Cmd::Simulate { scenario, out } => cmd_simulate(scenario, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(2)
        }
    }
}
