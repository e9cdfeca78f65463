//! Seeded randomness, small dense linear algebra and a symmetric eigensolver.

mod eigen;
mod linalg;
mod rng;

pub use eigen::{inv_sqrt_psd, sym_eigendecompose, SymEigen, DEFAULT_FLOOR, MAX_SWEEPS};
pub use linalg::{axpy, dist_sq, dot, norm, norm_sq, Mat};
pub use rng::{sample_gaussian_vector, sample_rademacher, Rng, Stream};
