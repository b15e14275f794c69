use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gauge_strata::HolonomyMode;
use gauge_strata_cli::{load_config, run, CliError, Command};

#[derive(Parser)]
#[command(name = "gauge-strata", version, about = "Orbit strata, ground-state exponents and constraint checks for SU(2)/SU(3) gauge fields")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Holonomy algebra used for classification (curvature, ambrose-singer).
    #[arg(long)]
    mode: Option<HolonomyMode>,
    /// Tolerance override, e.g. `--tol membership=1e-6`. Repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Orbit stratum of a constant field.
    Classify(Common),
    /// Ground-state exponent of a constant field.
    Sigma {
        #[command(flatten)]
        common: Common,
        /// Integrate the resolvent form instead of using the spectrum.
        #[arg(long)]
        quadrature: bool,
    },
    /// Resolvent form at a single lambda.
    Resolvent {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
    },
    /// Exponent over a parameter grid, as CSV.
    Scan {
        #[command(flatten)]
        common: Common,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Membership of a lattice tangent in the linearised constraint set.
    QcCheck(Common),
    /// Ranks of the lattice constraint operator and its adjoint.
    Splittings(Common),
    /// Symmetry space of a lattice background.
    Symmetries {
        #[command(flatten)]
        common: Common,
        /// Also compute tangents with the same symmetry.
        #[arg(long)]
        tangents: bool,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, command) = match cli.command {
        Cmd::Classify(c) => (c, Command::Classify),
        Cmd::Sigma { common, quadrature } => (common, Command::Sigma { quadrature }),
        Cmd::Resolvent { common, lambda } => (common, Command::Resolvent { lambda }),
        Cmd::Scan { common, out } => (common, Command::Scan { out }),
        Cmd::QcCheck(c) => (c, Command::QcCheck),
        Cmd::Splittings(c) => (c, Command::Splittings),
        Cmd::Symmetries { common, tangents } => (common, Command::Symmetries { tangents }),
    };
    let mut config = load_config(&common.config)?;
    if let Some(mode) = common.mode {
        config.mode = mode;
    }
    for t in &common.tol {
        config.tolerances.set(t)?;
    }
    config.validate()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    run(&command, &config, &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
