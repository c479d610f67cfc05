//! Batch front end: `twabs <subcommand> --config run.json --out DIR`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::config::{Format, Overrides};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Geometry,
    Window,
    Fringes,
    Angular,
    Azimuthal,
    Crossed,
    Events,
    Oracle,
    LineshapeForward,
    LineshapeInvert,
    Smear,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Geometry => "geometry",
            Subcommand::Window => "window",
            Subcommand::Fringes => "fringes",
            Subcommand::Angular => "angular",
            Subcommand::Azimuthal => "azimuthal",
            Subcommand::Crossed => "crossed",
            Subcommand::Events => "events",
            Subcommand::Oracle => "oracle",
            Subcommand::LineshapeForward => "lineshape-forward",
            Subcommand::LineshapeInvert => "lineshape-invert",
            Subcommand::Smear => "smear",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "twabs",
    version,
    about = "Two-twisted-photon absorption by delocalized atoms"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; `output.dir` from the config, else the current directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also render SVG plots.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Caps the worker threads.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Boundary cutoff in eV.
    #[arg(long, value_name = "F")]
    pub eps_boundary: Option<f64>,
    /// Oracle ring width in eV.
    #[arg(long, value_name = "F")]
    pub ring_sigma: Option<f64>,
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("twabs: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::schema("--threads", "need at least one thread"));
        }
        // fails only if a pool already exists, e.g. when called twice in one process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialized");
        }
    }
    let overrides = Overrides {
        out: cli.out.clone(),
        format: cli.format,
        svg: cli.svg,
        seed: cli.seed,
        eps_boundary: cli.eps_boundary,
        ring_sigma: cli.ring_sigma,
    };
    let resolved = config::parse_config(&cli.config, &overrides)?;
    let name = cli.subcommand.name();
    let outcome = commands::run(name, &resolved)?;
    let dir = resolved.config.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    output::write_run(&dir, name, &resolved.config, &outcome.tables, &outcome.summary)?;
    for line in &outcome.stdout {
        println!("{line}");
    }
    Ok(())
}
