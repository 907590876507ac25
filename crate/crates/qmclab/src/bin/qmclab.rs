//! Command-line front end: runs one experiment described by a TOML config
//! and writes CSV to stdout or a file.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qmclab::harness::{
    self, parse_config, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "qmclab", about = "Tunneling and sampling experiments on transverse-field Ising instances", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override [sampling].runs from the config.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads for multi-chain runs; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Low doublet and tunneling gap from exact diagonalization.
    Spectrum(Common),
    /// Minimal-path sums: channel counts and perturbative vs exact gap.
    Perturb(Common),
    /// Sampled thermal observables next to spectral references.
    Equilibrium(Common),
    /// Bridging-sector weight ratio next to the β²g² prediction.
    ZbRatio(Common),
    /// First-passage sweep counts over independent chains.
    Escape(Common),
    /// Loop free-energy profiles along and between tunneling channels.
    Profiles(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Spectrum(c)
            | Command::Perturb(c)
            | Command::Equilibrium(c)
            | Command::ZbRatio(c)
            | Command::Escape(c)
            | Command::Profiles(c) => c,
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, String> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| format!("{}: {e}", common.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(runs) = common.runs {
        cfg.sampling.runs = runs;
    }
    Ok(cfg)
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    let common = cli.command.common();
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let cfg = load_config(common)?;
    let seed = common.seed;
    let csv = match &cli.command {
        Command::Spectrum(_) => harness::run_spectrum(&cfg),
        Command::Perturb(_) => harness::run_perturb(&cfg),
        Command::Equilibrium(_) => harness::run_equilibrium(&cfg, seed),
        Command::ZbRatio(_) => harness::run_zb_ratio(&cfg, seed),
        Command::Escape(_) => harness::run_escape(&cfg, seed),
        Command::Profiles(_) => harness::run_profiles(&cfg),
    }
    .map_err(|e| e.to_string())?;
    match &common.out {
        Some(path) => fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
