//! Joint recovery of a sparse signal and an unknown diagonal calibration
//! from `y = diag(B h) A x + w` by lifting the bilinear unknowns to the
//! rank-one matrix `X = h xᵀ` and minimizing sparsity-promoting norms.
//!
//! Modules, bottom up:
//!
//! * [`problem`]: measurement models, random generators, instance files.
//! * [`lifting`]: the lifted operator `Φ` and its geometry scalars.
//! * [`solvers`]: proximal splitting for the four convex programs.
//! * [`recovery`]: rank-one extraction, gauge alignment, error metrics.
//! * [`certify`]: numerical checks of the sufficient recovery conditions.
//! * [`experiments`]: seeded drivers for the numerical studies.

pub mod certify;
pub mod error;
pub mod experiments;
pub mod lifting;
pub mod linalg;
pub mod problem;
pub mod recovery;
pub mod seed;
pub mod serde_complex;
pub mod solvers;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Crate version, echoed into experiment sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
