//! Config-driven experiment runner.
//!
//! Usage: `leakage-lab <config-path> [--parallel-budgets] [--out DIR]`
//!
//! Exit codes: 0 success, 1 config error, 2 verification failure,
//! 3 runtime failure.

use leakage_lab::experiment::{
    parse_config, run_theory_sweep, run_training_experiment, ExperimentKind,
};
use leakage_lab::verify::{run_verification_suite, write_report};
use std::path::PathBuf;
use std::process::ExitCode;

fn usage() -> ExitCode {
    eprintln!("usage: leakage-lab <config-path> [--parallel-budgets] [--out DIR]");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config_path: Option<PathBuf> = None;
    let mut out_dir = PathBuf::from(".");
    let mut parallel = false;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--parallel-budgets" => parallel = true,
            "--out" => {
                i += 1;
                let Some(dir) = args.get(i) else {
                    return usage();
                };
                out_dir = PathBuf::from(dir);
            }
            arg if arg.starts_with("--") => return usage(),
            arg => {
                if config_path.is_some() {
                    return usage();
                }
                config_path = Some(PathBuf::from(arg));
            }
        }
        i += 1;
    }
    let Some(config_path) = config_path else {
        return usage();
    };

    let config = match parse_config(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create output directory: {e}");
        return ExitCode::from(3);
    }

    match config.experiment {
        ExperimentKind::TheorySweep => match run_theory_sweep(&config, &out_dir) {
            Ok(path) => {
                println!("theory sweep written to {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("runtime failure: {e}");
                ExitCode::from(3)
            }
        },
        ExperimentKind::TrainSynthetic | ExperimentKind::TrainMnist => {
            match run_training_experiment(&config, &out_dir, parallel) {
                Ok(path) => {
                    println!("trade-off records written to {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("runtime failure: {e}");
                    ExitCode::from(3)
                }
            }
        }
        ExperimentKind::Verify => {
            let results = run_verification_suite();
            for r in &results {
                println!("{} {} — {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let report = out_dir.join(config.output.as_deref().unwrap_or("verification_report.csv"));
            match write_report(&results, &report) {
                Ok(true) => {
                    println!("all {} checks passed; report at {}", results.len(), report.display());
                    ExitCode::SUCCESS
                }
                Ok(false) => {
                    eprintln!("verification failures recorded in {}", report.display());
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("runtime failure: {e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
