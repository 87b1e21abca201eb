use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use solitonlab::cli::{exit_code, run_command};
use solitonlab::config::{parse_config_with, Command};
use solitonlab::Error;

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Run,
    Sweep,
    Optimize,
    Potentials,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Run => Command::Run,
            Cmd::Sweep => Command::Sweep,
            Cmd::Optimize => Command::Optimize,
            Cmd::Potentials => Command::Potentials,
        }
    }
}

/// Vortex and optical Ferris-wheel beam propagation in a nonlocal Rydberg-EIT medium.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    command: Cmd,
    /// Configuration file (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer seed; overrides `optimizer.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn execute(args: Args) -> Result<(), Error> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec = parse_config_with(&text, Some(args.command.into()), |name| std::env::var(name).ok())?;
    if let Some(out) = args.out {
        spec.output_dir = out;
    }
    if let (Some(seed), Some(opt)) = (args.seed, spec.optimizer.as_mut()) {
        opt.ga.seed = seed;
    }
    let outcome = run_command(&spec)?;
    for f in &outcome.files {
        log::debug!("wrote {}", f.display());
    }
    Ok(())
}
