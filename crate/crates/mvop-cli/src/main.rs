//! `mvop`: build matrix-valued orthogonal polynomial families for deformed
//! weights, verify the lattice/operator identities they satisfy, and evolve
//! the band flows in t.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{FlagOverrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "mvop",
    version,
    about = "Matrix-valued orthogonal polynomials under exponential weight deformations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Preset weight: hermite2 | hermiteN | hermite2-x | hermite1 | hermite1-x2
    #[arg(long)]
    preset: Option<String>,

    /// JSON config file (flags override its fields)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Subdiagonal parameters a_1..a_{N-1} for the Hermite-type weight
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    a: Option<Vec<f64>>,

    /// Largest polynomial degree to build
    #[arg(long)]
    nmax: Option<usize>,

    /// Gauss-Hermite node count
    #[arg(long = "quad-points")]
    quad_points: Option<usize>,

    /// Deformation time for build/verify
    #[arg(long)]
    t: Option<f64>,

    /// Evolution start time
    #[arg(long)]
    t0: Option<f64>,

    /// Evolution stop time
    #[arg(long)]
    t1: Option<f64>,

    /// Evolution step count
    #[arg(long)]
    steps: Option<usize>,

    /// Central-difference step for the fd validators
    #[arg(long = "fd-h")]
    fd_h: Option<f64>,

    /// Output file path
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Omit the timestamp header field for byte-reproducible output
    #[arg(long = "no-header")]
    no_header: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the family and export it (polynomials, norms, recurrence)
    Build {
        #[command(flatten)]
        common: CommonArgs,
        /// Also export the difference operator bands to this path
        #[arg(long = "operator-out", value_name = "PATH")]
        operator_out: Option<PathBuf>,
    },
    /// Run invariant suites and report residuals; exits nonzero on failure
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// orthogonality | pearson | toda | lax | hermite-oracle | all
        #[arg(long, default_value = "all")]
        suite: String,
        /// Deliberately corrupt a band entry by this amount (negative control)
        #[arg(long = "corrupt-band", hide = true)]
        corrupt_band: Option<f64>,
    },
    /// Integrate the band flows over the t-grid and export the trajectory CSV
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn resolve(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let file = match &common.config {
        Some(path) => Some(config::load_file(path)?),
        None => None,
    };
    config::resolve(
        file,
        FlagOverrides {
            preset: common.preset.clone(),
            a_params: common.a.clone(),
            nmax: common.nmax,
            quad_points: common.quad_points,
            t: common.t,
            t0: common.t0,
            t1: common.t1,
            steps: common.steps,
            fd_h: common.fd_h,
            out: common.out.clone(),
            no_header: common.no_header,
        },
    )
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Build { common, operator_out } => {
            let config = resolve(common)?;
            commands::cmd_build(&config)?;
            if let Some(path) = operator_out {
                commands::export_operator(&config, path)?;
            }
            Ok(true)
        }
        Command::Verify { common, suite, corrupt_band } => {
            let config = resolve(common)?;
            commands::cmd_verify(
                &config,
                &commands::VerifyOptions { suite: suite.clone(), corrupt_band: *corrupt_band },
            )
        }
        Command::Evolve { common } => {
            let config = resolve(common)?;
            commands::cmd_evolve(&config)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
