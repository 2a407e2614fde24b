//! Two-species product-vacuum-with-boundary-states model: finite-volume
//! Hamiltonians, closed-form ground states, spectral gaps and a martingale-method
//! gap certifier.

pub mod analytic;
pub mod error;
pub mod fock;
pub mod json;
pub mod lattice;
pub mod martingale;
pub mod model;
pub mod operators;
pub mod spectra;

pub use error::{PvbsError, Result};
pub use lattice::{Site, TiltCase, TiltGeometry, Volume, VolumeFamilySpec};
pub use model::{GapClass, Params, Species, TiltScheme};

/// Crate version, stamped into certificates and cache keys.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default numerical knobs shared by the library and the CLI.
pub mod defaults {
    /// Minimal `|log lambda~|` accepted by tilt selection.
    pub const ETA: f64 = 0.05;
    /// Largest free tilt integer tried.
    pub const V_MAX: u32 = 8;
    pub const ELL_CAP: usize = 64;
    /// Largest sector enumerated explicitly.
    pub const SECTOR_CAP: u128 = 5_000_000;
    /// Largest matrix handed to the dense eigensolver.
    pub const DENSE_CAP: usize = 4096;
    /// Sectors up to this size are diagonalized densely inside `total_gap`.
    pub const DENSE_SWITCH: usize = 512;
    pub const POWER_TOL: f64 = 1e-8;
    pub const POWER_MAX_ITER: usize = 20_000;
    pub const SEED: u64 = 0x5eed;
    /// Largest full Fock space on which a ground-state projector is applied.
    pub const ACTION_CAP: u128 = 1_594_323; // 3^13
    pub const KERNEL_TOL_REL: f64 = 1e-8;
}
