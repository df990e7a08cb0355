use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gfdmcr::harness::{self, ExperimentConfig, Scenario};
use gfdmcr::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

/// GFDM cognitive-radio link and power-allocation experiments.
#[derive(Debug, Parser)]
#[command(name = "gfdmcr", version)]
struct Args {
    /// One of ser, psd, sweep-qn, capacity, interference.
    scenario: Scenario,

    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Master seed, overriding the one in the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for the CSV files and manifest.txt.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Exit with status 3 when any reported solve hit the iteration limit.
    #[arg(long)]
    strict: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();

    let mut config = match ExperimentConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gfdmcr: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Err(e) = config.validate() {
        eprintln!("gfdmcr: {e}");
        return ExitCode::from(exit_code(&e));
    }

    if args.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
            eprintln!("gfdmcr: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }

    let output = match harness::run(args.scenario, &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("gfdmcr: {} failed: {e}", args.scenario.name());
            return ExitCode::from(exit_code(&e));
        }
    };
    match output.write(&args.out, &config) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("gfdmcr: cannot write {}: {e}", args.out.display());
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    for w in &output.warnings {
        eprintln!("gfdmcr: warning: {w}");
    }

    if !output.violations.is_empty() {
        for v in &output.violations {
            eprintln!("gfdmcr: invariant violated: {v}");
        }
        return ExitCode::from(EXIT_INVARIANT);
    }
    if args.strict && output.nonconverged > 0 {
        eprintln!("gfdmcr: {} solves did not converge", output.nonconverged);
        return ExitCode::from(EXIT_NONCONVERGED);
    }
    ExitCode::SUCCESS
}
