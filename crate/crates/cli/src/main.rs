//! `plateau`: command-line driver for the soap-film solver.
//!
//! Exit status is 0 on success, 1 on usage or input errors, 2 when the
//! numerics fail (non-convergence, non-finite values, degenerate meshes).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plateau_core::error::Error as CoreError;

use crate::commands::NumericalFailure;

#[derive(Debug, Parser)]
#[command(name = "plateau", version, about = "Elastic-boundary soap film simulations")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config, or the manifest.json of an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent sweep points.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the hexagonal disk mesh and its validation report.
    Mesh(MeshArgs),
    /// Relax one film at a single kL³/α.
    Relax(RelaxArgs),
    /// Continuation sweep over kL³/α.
    Sweep(SweepArgs),
    /// Print the buckling thresholds of the circular disk.
    Stability(StabilityArgs),
    /// Tabulate the saddle-family approximation over a γ grid.
    Asymptotic(AsymptoticArgs),
    /// Fit the post-threshold scaling of an existing diagram.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeshFormat {
    Obj,
    Ply,
}

#[derive(Debug, Args)]
pub struct MeshOpts {
    #[arg(long)]
    pub rings: Option<usize>,
    /// Aspect ratio of the initial disk along x.
    #[arg(long)]
    pub elongation: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[arg(long, value_enum, default_value = "obj")]
    pub format: MeshFormat,
}

#[derive(Debug, Args)]
pub struct MinimizeOpts {
    /// `uniform`, `global` or `per-edge`.
    #[arg(long)]
    pub constraint: Option<String>,
    /// Relative gradient tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Minimizer name, e.g. `pcg-pr+` or `cg-pr+`.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args)]
pub struct RelaxArgs {
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[command(flatten)]
    pub minimize: MinimizeOpts,
    #[arg(long = "k-l3")]
    pub k_l3: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[command(flatten)]
    pub minimize: MinimizeOpts,
    /// First kL³/α.
    #[arg(long)]
    pub from: Option<f64>,
    /// Last kL³/α.
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Start every point from the flat disk instead of the previous result.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Run the schedule from the largest value down.
    #[arg(long)]
    pub descending: bool,
    /// Skip the per-point OBJ files.
    #[arg(long)]
    pub no_meshes: bool,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub max_mode: Option<u32>,
}

#[derive(Debug, Args)]
pub struct AsymptoticArgs {
    #[arg(long)]
    pub gamma_min: Option<f64>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Rings of the disk the family meshes are sampled on.
    #[arg(long)]
    pub mesh_rings: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Diagram CSV written by `sweep`.
    #[arg(long)]
    pub diagram: Option<PathBuf>,
    /// Starting estimate of the critical γ.
    #[arg(long)]
    pub gamma_c: Option<f64>,
}

/// 2 for failures of the numerics, 1 for everything the user can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<NumericalFailure>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::DegenerateBoundary { .. }
                | CoreError::DegenerateTriangle(_)
                | CoreError::NonFinite(_)
                | CoreError::Inflection { .. }
                | CoreError::Quadrature { .. }
                | CoreError::Fit(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
