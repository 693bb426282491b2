//! `peierls`: band structures, effective Hamiltonians and spectral comparisons
//! driven by one TOML configuration per run.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::EffectiveModeConfig;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration; exit code 2.
    Config(String),
    /// Numerical failure inside the library; exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn numeric(module: &str, e: peierls::Error) -> Self {
        CliError::Numeric(format!("{module}: {e}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "peierls", version, about = "Magnetic band structures and effective lattice Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EffectiveArgs {
    /// Flux per cell as `p/q` (in units of 2π).
    #[arg(long)]
    flux: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<EffectiveModeConfig>,
    /// Hopping truncation radius.
    #[arg(long)]
    radius: Option<usize>,
    /// Spectral window `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Band functions on the Brillouin-zone grid and band intervals.
    Bands(Common),
    /// Smooth equivariant section of the selected simple band.
    Section(Common),
    /// Grushin problem residuals and effective blocks over the grid.
    Grushin(Common),
    /// λ-margin scan and reconstructed spectrum of the effective operator.
    Effective {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: EffectiveArgs,
    },
    /// Eigenvalues of the direct discretization.
    Direct(Common),
    /// Hausdorff distances between effective and direct spectra over ε.
    Compare(Common),
    /// λ-margin scan only.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: EffectiveArgs,
    },
}

fn parse_window(s: &str) -> Result<[f64; 2], CliError> {
    let bad = || CliError::Config(format!("window {s:?} is not of the form lo,hi"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

fn apply_overrides(cfg: &mut config::RunConfig, o: &EffectiveArgs) -> Result<(), CliError> {
    if let Some(f) = &o.flux {
        config::parse_flux(f)?;
        cfg.effective.flux = Some(f.clone());
    }
    if let Some(m) = o.mode {
        cfg.effective.mode = m;
    }
    if let Some(r) = o.radius {
        cfg.numerics.radius = r;
    }
    if let Some(w) = &o.window {
        cfg.numerics.window = Some(parse_window(w)?);
    }
    Ok(())
}

type Runner = fn(&config::Setup, &std::path::Path) -> Result<Vec<PathBuf>, CliError>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, opts, runner): (Common, Option<EffectiveArgs>, Runner) = match cli.command {
        Command::Bands(c) => (c, None, commands::bands),
        Command::Section(c) => (c, None, commands::section),
        Command::Grushin(c) => (c, None, commands::grushin),
        Command::Effective { common, opts } => (common, Some(opts), commands::effective),
        Command::Direct(c) => (c, None, commands::direct),
        Command::Compare(c) => (c, None, commands::compare),
        Command::Scan { common, opts } => (common, Some(opts), commands::scan),
    };
    let mut cfg = config::load(&common.config)?;
    if let Some(o) = &opts {
        apply_overrides(&mut cfg, o)?;
    }
    let setup = config::setup_from(cfg)?;
    runner(&setup, &common.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("peierls: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
