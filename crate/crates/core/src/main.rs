use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use telesim::cli::{parse_config, run, Experiment};

/// Simulate teleportation and entanglement-swapping experiments.
#[derive(Debug, Parser)]
#[command(name = "telesim", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials or pump pulses per run.
    #[arg(long)]
    n: Option<u64>,
    /// qm or es.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Any config key, e.g. `--set p_pair=0.2`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut overrides = Vec::new();
    for item in &args.set {
        match item.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                eprintln!("error: --set expects KEY=VALUE, got `{item}`");
                return ExitCode::from(2);
            }
        }
    }
    let flags = [
        ("seed", args.seed.map(|x| x.to_string())),
        ("n", args.n.map(|x| x.to_string())),
        ("engine", args.engine.clone()),
        ("epsilon", args.epsilon.clone()),
        ("workers", args.workers.map(|x| x.to_string())),
    ];
    overrides.extend(
        flags
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
    );

    let cfg = match parse_config(args.experiment, args.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if !cfg.seed_given {
        eprintln!("warning: using default seed 0; pass --seed for reproducible scripted runs");
    }
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let written = match &args.out {
        Some(path) => File::create(path)
            .map_err(|e| telesim::Error::Invalid(format!("cannot create {}: {e}", path.display())))
            .and_then(|f| report.write_to(BufWriter::new(f))),
        None => report.write_to(io::stdout().lock()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
