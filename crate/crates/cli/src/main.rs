use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fqesr_cli::{run, Command};
use fqesr_core::config::{RunConfig, ENV_PREFIX};

/// Flux-qubit ESR simulator.
///
/// Any config key can be overridden from the environment as
/// FQESR_<SECTION>__<KEY>, e.g. FQESR_QUBIT__GAMMA_Q_MHZ=40 or
/// FQESR_CRYSTAL__SITE__0__WEIGHT=2.
#[derive(Debug, Parser)]
#[command(name = "fqesr", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// ESR spectrum and line table of the configured crystal.
    Spectrum,
    /// Offset-flux table and temperature-differenced polarization fit.
    Magnetization,
    /// Qubit spectroscopy under ESR excitation and spectrum extraction.
    EsrSim,
    /// Minimum detectable spin number.
    Sensitivity,
    /// Switching-noise statistics, Welch PSD and flicker fit.
    Noise,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Magnetization => Command::Magnetization,
            Cmd::EsrSim => Command::EsrSim,
            Cmd::Sensitivity => Command::Sensitivity,
            Cmd::Noise => Command::Noise,
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let (mut cfg, applied) = RunConfig::load(&text, std::env::vars())?;
    for name in applied {
        eprintln!("override from environment: {name}");
    }
    // relative data paths are relative to the config file
    if let Some(m) = cfg.magnetization.as_mut() {
        if let Some(p) = m.input_csv.as_mut() {
            let base = path.parent().unwrap_or(Path::new("."));
            *p = base.join(&*p).to_string_lossy().into_owned();
        }
    }
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<()> {
    let Some(config_path) = cli.config.as_deref() else {
        bail!("--config <PATH> is required (variables prefixed {ENV_PREFIX} override its keys)");
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let command = Command::from(cli.command);
    let outcome = run(command, &cfg)?;
    let written = outcome.write_to(&out_dir, command)?;
    print!("{}", outcome.report);
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
