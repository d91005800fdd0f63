use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;
use concentra::config::ExperimentConfig;
use concentra::experiment::{run, Subcommand};
use concentra::Error;

const NAMES: [&str; 8] = [
    "limit-profile",
    "gamma-map",
    "frozen-sigma",
    "solve",
    "concentrate",
    "reduce",
    "multiplicity",
    "identity-check",
];

/// Concentration experiments for -eps^2 div(J grad u) + V u = u^p.
#[derive(Parser, Debug)]
#[command(name = "concentra", version)]
struct Cli {
    #[arg(value_parser = PossibleValuesParser::new(NAMES))]
    subcommand: String,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set solver.newton_tol=1e-9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn report(e: &Error) -> ExitCode {
    let code = exit_code(e);
    let kind = if code == 2 { "validation" } else { "solver" };
    let msg = serde_json::json!({ "error": kind, "exit_code": code, "message": e.to_string() });
    eprintln!("{msg}");
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("CONCENTRA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Error::Config(format!(
            "CONCENTRA_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return report(&e);
    }
    let cmd: Subcommand = match cli.subcommand.parse() {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    let cfg = match ExperimentConfig::load(&cli.config, &cli.set) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match run(cmd, &cfg, &cli.out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
