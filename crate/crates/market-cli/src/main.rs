//! `predmarket`: run declarative market scenarios, verify protocol
//! properties over seeded random models, and replicate the bundled
//! dataset study.
//!
//! Exit codes: 0 success; 1 property failure or replication mismatch;
//! 2 bad configuration or arguments; 3 engine failure; 4 dataset
//! unavailable.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use market_core::gaussian::{
    default_dataset_path, load_study_dataset, replicate_study, DATA_DIR_ENV,
};
use market_core::harness::{run_suite, SuiteKind};
use market_core::scenario::{run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "predmarket", version, about = "Prediction-market consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file; print the consensus report and write any
    /// configured outputs.
    Run {
        /// Scenario TOML file.
        config: PathBuf,
    },
    /// Run seeded randomized property suites and report each property.
    Verify {
        /// One of: all, martingale, vacuity, bounds, mixture.
        suite: String,
        /// Seed for model generation; the same seed reproduces the same
        /// models and output bytes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of generated models per suite.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Re-run the dataset study and compare against its published figures.
    ReplicateTable1 {
        /// Dataset CSV file (26 columns, `*` for missing values).
        /// Defaults to $PREDMARKET_DATA_DIR/93cars.csv, then
        /// data/93cars.csv.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => cmd_run(&config),
        Command::Verify { suite, seed, count } => cmd_verify(&suite, seed, count),
        Command::ReplicateTable1 { data } => cmd_replicate_table1(data),
    }
}

fn cmd_run(path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let config = match ScenarioConfig::from_toml_str(&text) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error in {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let outcome = match run_scenario(&config) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_config() { 2 } else { 3 });
        }
    };

    let mut report = serde_json::to_string_pretty(&outcome.report.to_json())
        .expect("reports serialize");
    report.push('\n');
    for (target, body) in [
        (&config.output.report, &report),
        (&config.output.trace, &outcome.trace.render()),
    ] {
        if let Some(out_path) = target {
            if let Err(e) = fs::write(out_path, body) {
                eprintln!("error: cannot write {}: {e}", out_path.display());
                return ExitCode::from(3);
            }
        }
    }
    print!("{report}");
    ExitCode::SUCCESS
}

fn cmd_verify(suite: &str, seed: u64, count: usize) -> ExitCode {
    let kinds: Vec<SuiteKind> = if suite == "all" {
        SuiteKind::all().to_vec()
    } else {
        match SuiteKind::parse(suite) {
            Some(kind) => vec![kind],
            None => {
                eprintln!(
                    "error: unknown suite {suite:?}; expected all, martingale, \
                     vacuity, bounds or mixture"
                );
                return ExitCode::from(2);
            }
        }
    };

    let mut all_pass = true;
    for kind in kinds {
        let report = run_suite(kind, seed, count);
        print!("{}", report.render());
        all_pass &= report.pass();
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_replicate_table1(data: Option<PathBuf>) -> ExitCode {
    let path = match data.or_else(default_dataset_path) {
        Some(path) => path,
        None => {
            eprintln!("error: dataset unavailable");
            eprintln!(
                "place the 93CARS CSV export (26 columns, '*' for missing \
                 values) at data/93cars.csv, set {DATA_DIR_ENV} to the \
                 directory holding 93cars.csv, or pass --data <path>."
            );
            return ExitCode::from(4);
        }
    };
    let (model, rows) = match load_study_dataset(&path) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("error: {} is not a usable dataset: {e}", path.display());
            return ExitCode::from(4);
        }
    };
    let report = match replicate_study(&model) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: replication failed on {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };

    println!("replication against {} ({rows} complete cases)", path.display());
    for check in &report.checks {
        println!(
            "  [{}] {:<32} expected {:<10} actual {:<14.7} tol {:.0e}",
            if check.pass { "ok " } else { "FAIL" },
            check.label,
            check.expected,
            check.actual,
            check.tol,
        );
    }
    println!("market converged at round {}", report.rounds);
    if report.pass {
        println!("all figures match");
        ExitCode::SUCCESS
    } else {
        println!("MISMATCH");
        ExitCode::from(1)
    }
}
