use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvbs_core::defaults;

#[derive(Parser, Debug)]
#[command(name = "pvbs", version, about = "Spectral gaps and ground states of the two-species PVBS model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// Flags shared by every verb. Each verb reads only the ones it needs.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Hopping parameters of species a, comma-separated decimals (one per direction).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda_a: Option<String>,
    /// Hopping parameters of species b.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda_b: Option<String>,
    /// Lattice dimension; a single lambda value is broadcast to all directions.
    #[arg(short = 'd', long = "dim", global = true)]
    pub dim: Option<usize>,
    /// Volume spec: box:3, box:2x3, case1:v=1,1:L=4,4, case2:L=3,3.
    #[arg(long, global = true)]
    pub volume: Option<String>,
    /// Largest slab length tried by certify.
    #[arg(long, global = true, default_value_t = defaults::ELL_CAP)]
    pub ell_cap: usize,
    /// Minimal |log lambda~| demanded of a tilt.
    #[arg(long, global = true, default_value_t = defaults::ETA)]
    pub eta: f64,
    /// Sectors up to this dimension are diagonalized densely.
    #[arg(long, global = true, default_value_t = defaults::DENSE_SWITCH)]
    pub dense_cap: usize,
    /// Largest sector dimension solved; larger ones are skipped.
    #[arg(long, global = true, default_value_t = defaults::SECTOR_CAP)]
    pub budget: u128,
    /// Seed of the Lanczos and power-iteration start vectors.
    #[arg(long, global = true, default_value_t = defaults::SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Sweep result cache (default: .pvbs-cache).
    #[arg(long, global = true, env = "PVBS_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Gapped or gapless on Z^d, or on a half-space with --halfspace.
    Classify {
        /// Inward normal of the half-space, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        halfspace: Option<String>,
    },
    /// Infinite-volume ground states on a region.
    Census {
        /// zd, orthant, or halfspace:m1,m2,...
        #[arg(long, default_value = "zd", allow_hyphen_values = true)]
        region: String,
    },
    /// Sector-resolved spectrum and total gap of --volume.
    Gap,
    /// Martingale-method lower bound on the gap of large tilted volumes.
    Certify,
    /// Normalization inequalities and edge-projector algebra for the selected tilt.
    VerifyLemmas {
        /// Slab length (default: the certified ell).
        #[arg(long)]
        ell: Option<usize>,
        /// Family index (default: 2 ell).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Measured ground-projector product norm against the projection bound.
    VerifyProjection {
        /// Family index; the box has n+1 sites along the sweep direction.
        #[arg(long)]
        n: usize,
        /// Slab length.
        #[arg(long)]
        ell: usize,
        /// 1-based sweep direction.
        #[arg(long, default_value_t = 1)]
        direction: usize,
        /// Box extent in the transverse directions.
        #[arg(long, default_value_t = 2)]
        transverse: usize,
        /// Also evaluate the norm with dense matrices.
        #[arg(long)]
        dense: bool,
    },
    /// Trial-state energies and finite-volume gaps for gapless parameters.
    Scaling {
        /// Box sides, comma-separated (default 2..=40).
        #[arg(long)]
        sizes: Option<String>,
        /// Largest Fock dimension on which the numeric gap is computed.
        #[arg(long, default_value_t = 6561)]
        numeric_cap: u128,
    },
    /// Grid of total gaps over one lambda coordinate and box sizes, with a result cache.
    Sweep {
        /// Species whose parameter is swept.
        #[arg(long, value_parser = ["a", "b"], default_value = "a")]
        axis: String,
        /// Swept values, comma-separated decimals.
        #[arg(long)]
        values: String,
        /// Box sides, comma-separated.
        #[arg(long)]
        sizes: String,
        /// Gnuplot data file (default: sweep.dat in the cache directory).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Defaults, caps and version.
    Info,
}
