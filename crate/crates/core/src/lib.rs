//! Nearest-neighbor graph denoising with clique-level Continuous CRFs, and
//! diffusion re-ranking on the resulting graph.
//!
//! The pipeline is:
//!
//! 1. [`graph`]: exhaustive k-NN over a [`DescriptorSet`], the mutual-neighbor
//!    affinity and its symmetric normalization.
//! 2. [`ccrf`]: per-pivot cliques, similarity-based distributions, the
//!    descriptor/divergence weight kernel and MAP inference; the refined rows
//!    are averaged into a new [`SparseAffinity`].
//! 3. [`diffusion`]: iterative, closed-form and offline diffusion ranking.
//! 4. [`eval`]: AP/mAP with junk handling, query expansion baseline,
//!    synthetic manifolds, parameter sweeps and ablations.
//!
//! With the default `parallel` feature the per-item loops run on rayon;
//! results are identical with the feature disabled.

pub mod ccrf;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod par;
pub mod ranking;

pub use error::{Error, Result};
pub use graph::{DescriptorSet, KnnLists, NormalizedAffinity, SparseAffinity};
pub use ranking::RetrievalRanking;
