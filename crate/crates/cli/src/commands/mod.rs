pub mod bench;
pub mod denoise;
pub mod gen;
pub mod regression;

use std::path::PathBuf;

use clap::Args;

/// Flags shared by every command; each uses the ones that apply to it.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Random seed (required by gen).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Convergence tolerance of the solver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Increment of the fusion-penalty grid.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output file, or directory for gen.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
