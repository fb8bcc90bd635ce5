use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "sphdesign",
    version,
    about = "Optimal designs for hyperspherical harmonic regression"
)]
struct Cli {
    /// Emit machine-readable JSON summaries.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

/// Harmonic model of order `d`, optionally restricted to some levels.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model order d.
    #[arg(long)]
    d: u32,
    /// Keep only these resolution levels in the model, e.g. `0,4`.
    #[arg(long, value_name = "K0,K1,...")]
    model_levels: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the discrete optimal product design as JSON.
    Design {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        d: u32,
        /// Nodes per polar marginal (default d+1).
        #[arg(long)]
        r: Option<u32>,
        /// Number of azimuths (default 2d+1).
        #[arg(long)]
        t: Option<u32>,
        /// Azimuthal offset in radians (default -π).
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Information matrix of a design: CSV dump plus spectral summary.
    Info {
        #[arg(long)]
        design: PathBuf,
        /// Sphere dimension; must match the design.
        #[arg(long)]
        m: Option<u32>,
        #[command(flatten)]
        model: ModelArgs,
        /// Write the matrix as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Efficiency of a design relative to a reference.
    Efficiency {
        #[arg(long)]
        design: PathBuf,
        /// Reference design file, or `optimal` for the uniform optimum.
        #[arg(long, default_value = "optimal")]
        reference: String,
        /// D, A, E, phi-p=<v> or phi-es=<s>.
        #[arg(long, allow_hyphen_values = true)]
        criterion: String,
        /// Selected levels for the Φ_p criteria (default: all model levels).
        #[arg(long, value_name = "K0,K1,...")]
        levels: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Equivalence-theorem certificate for a design.
    Certify {
        #[arg(long)]
        design: PathBuf,
        /// D, A, phi-p=<v>, or phi-es (s taken from the levels).
        #[arg(long, allow_hyphen_values = true)]
        criterion: String,
        #[arg(long, value_name = "K0,K1,...")]
        levels: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        /// Grid points per polar axis; the azimuth uses 2n-1.
        #[arg(long, default_value_t = 61)]
        grid: usize,
    },
    /// Symmetrized harmonics for crystallographic point groups.
    Symm {
        #[arg(long)]
        group: u32,
        #[arg(long, value_enum)]
        action: SymmAction,
        /// Design file (needed for `efficiency`).
        #[arg(long)]
        design: Option<PathBuf>,
        /// Candidate grid `n_theta1,n_theta2,n_phi` for the optimizer.
        #[arg(long, default_value = "25,25,24")]
        candidates: String,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Write the optimizer's design as JSON (`d-opt`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Disk-projection texture map of one symmetrized harmonic.
    Texture {
        #[arg(long, default_value_t = 1)]
        group: u32,
        /// Level λ of the function Z_λ^η.
        #[arg(long, default_value_t = 4)]
        lambda: u32,
        #[arg(long)]
        eta: u32,
        /// Comma-separated θ1 values in radians (default (2k-1)π/48, k = 1..6).
        #[arg(long)]
        slices: Option<String>,
        /// `n_theta2,n_phi`
        #[arg(long, default_value = "31,61")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SymmAction {
    Table,
    OrthoCheck,
    DOpt,
    Efficiency,
}

fn exit_code(err: &sphdesign::Error) -> u8 {
    use sphdesign::Error;
    match err {
        Error::Parameter(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
        Error::Infeasible(_) => 3,
        Error::Numeric(_) | Error::NotConverged(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match commands::run(&cli.command, cli.json, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
