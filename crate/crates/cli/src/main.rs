use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flep_cli::artifacts::atomic_write;
use flep_cli::config::{parse_config, ConfigError};
use flep_cli::run::{execute, Command};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "flep", version, about = "Fractional NLS ground states, minimizers and blow-up sweeps")]
struct Cli {
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `sweep.workers`.
    #[arg(long, global = true, env = "FLEP_WORKERS")]
    workers: Option<usize>,
    /// Where to write the JSON report (default: `<output.dir>/<command>.json`).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Solve for the ground state and the threshold coupling.
    GroundState {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the constrained energy at one coupling.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, conflicts_with = "a_frac")]
        a: Option<f64>,
        /// Coupling as a fraction of the threshold.
        #[arg(long, required_unless_present = "a")]
        a_frac: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Initial field written by an earlier run with the same config.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Run the blow-up sweep a_k = a*(1 - 2^-k).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k_min: Option<u32>,
        #[arg(long)]
        k_max: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        fields_dir: Option<PathBuf>,
        /// Append a row at this multiple of the threshold.
        #[arg(long)]
        inject: Option<f64>,
    },
    /// Check the coefficient assumptions on the sampled grid.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config_path, name) = match &cli.command {
        Sub::GroundState { config, .. } => (config, "ground-state"),
        Sub::Minimize { config, .. } => (config, "minimize"),
        Sub::Sweep { config, .. } => (config, "sweep"),
        Sub::Validate { config } => (config, "validate"),
    };
    let mut cfg = match parse_config(config_path) {
        Ok(c) => c,
        Err(e) => return config_failure(name, &e, cli.report.as_ref()),
    };
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.sweep.workers = w;
    }
    if let Sub::Sweep { k_min, k_max, inject, .. } = &cli.command {
        if let Some(k) = k_min {
            cfg.sweep.k_min = *k;
        }
        if let Some(k) = k_max {
            cfg.sweep.k_max = *k;
        }
        if inject.is_some() {
            cfg.sweep.inject = *inject;
        }
    }
    let problems = flep_cli::config::validate(&cfg);
    if !problems.is_empty() {
        return config_failure(name, &ConfigError::Invalid(problems), cli.report.as_ref());
    }

    let dir = PathBuf::from(&cfg.output.dir);
    let command = match cli.command {
        Sub::GroundState { out, .. } => Command::GroundState {
            out: out.unwrap_or_else(|| dir.join("ground_state.fld")),
        },
        Sub::Minimize { a, a_frac, out, init, .. } => Command::Minimize {
            a,
            a_frac,
            out: out.unwrap_or_else(|| dir.join("minimizer.fld")),
            init,
        },
        Sub::Sweep { out, fields_dir, .. } => Command::Sweep {
            out: out.unwrap_or_else(|| dir.join("sweep.csv")),
            fields_dir,
        },
        Sub::Validate { .. } => Command::Validate,
    };
    let outcome = execute(&command, &cfg);
    let report_path = cli.report.unwrap_or_else(|| dir.join(format!("{name}.json")));
    let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    if let Err(e) = atomic_write(&report_path, text.as_bytes()) {
        eprintln!("error: writing report: {e:#}");
        return ExitCode::from(2);
    }
    println!("{text}");
    if let Some(err) = outcome.report.get("error").and_then(|e| e.as_str()) {
        eprintln!("error: {err}");
    }
    ExitCode::from(outcome.exit_code as u8)
}

fn config_failure(command: &str, e: &ConfigError, report: Option<&PathBuf>) -> ExitCode {
    let problems = match e {
        ConfigError::Invalid(v) => v.clone(),
        ConfigError::Read(m) => vec![m.clone()],
    };
    for p in &problems {
        eprintln!("config error: {p}");
    }
    if let Some(path) = report {
        let body = json!({
            "command": command,
            "status": "error",
            "error": e.to_string(),
            "problems": problems,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let _ = atomic_write(path, serde_json::to_string_pretty(&body).unwrap().as_bytes());
    }
    ExitCode::from(1)
}
