//! Clique-based Continuous CRF refinement of nearest-neighbor similarities.
//!
//! For every pivot item a fully connected clique over its `L` nearest neighbors
//! is formed. Pairwise weights combine a Gaussian kernel on descriptor distance
//! with one on the Jeffreys divergence between similarity-based distributions,
//! and the pivot's similarity row is replaced by the mean of the resulting
//! Gaussian, i.e. the solution of a small SPD system.

mod clique;
mod denoise;
mod sbd;
mod system;
mod weights;

pub use clique::{build_clique, Clique};
pub use denoise::{denoise_database, denoise_rows, symmetrize, CcrfParams, Reselect};
pub use sbd::{j_divergence, kl_divergence, sbd_pmf, SbdPmf};
pub use system::{assemble_system, infer, CcrfSystem, DenoisedRow, Solver};
pub use weights::{weight_matrix, WeightMatrix};
