use serde::{Deserialize, Serialize};

use super::metrics::mean_ap;
use super::protocol::{Protocol, ProtocolMode};
use crate::ccrf::{denoise_database, CcrfParams};
use crate::diffusion::{DiffusionParams, Reranker};
use crate::error::{Error, Result};
use crate::graph::{build_knn, reciprocity_affinity, DescriptorSet, SparseAffinity};
use crate::ranking::RetrievalRanking;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub clique_size: usize,
    /// Refined neighbors kept per pivot; `None` follows the graph `k`.
    pub k_out: Option<usize>,
    pub params: CcrfParams,
}

/// Where the diffusion graph comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    /// Mutual k-NN of the raw similarities.
    Reciprocity,
    /// C-CRF refined similarities.
    Denoised(DenoiseConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub gamma: f64,
    pub source: GraphSource,
    pub diffusion: DiffusionParams,
    /// Neighbors used to seed the query state; `None` follows `k`.
    pub query_k: Option<usize>,
}

impl PipelineConfig {
    pub fn query_k(&self) -> usize {
        self.query_k.unwrap_or(self.k)
    }
}

/// Builds the diffusion graph for `x` as configured.
pub fn build_affinity(x: &DescriptorSet, cfg: &PipelineConfig) -> Result<SparseAffinity> {
    match cfg.source {
        GraphSource::Reciprocity => Ok(reciprocity_affinity(&build_knn(x, cfg.k, cfg.gamma)?)),
        GraphSource::Denoised(d) => {
            let params = CcrfParams { gamma: cfg.gamma, ..d.params };
            denoise_database(x, d.clique_size, &params, d.k_out.unwrap_or(cfg.k))
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub affinity: SparseAffinity,
    pub rankings: Vec<RetrievalRanking>,
    /// Mean AP on the 0-100 scale.
    pub map: f64,
}

/// Graph construction, diffusion of every query and mAP under `mode`.
pub fn evaluate(
    database: &DescriptorSet,
    queries: &DescriptorSet,
    protocol: &Protocol,
    mode: ProtocolMode,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    if queries.len() != protocol.queries.len() {
        return Err(Error::DimensionMismatch {
            expected: protocol.queries.len(),
            found: queries.len(),
        });
    }
    let affinity = build_affinity(database, cfg)?;
    let reranker = Reranker::new(database, &affinity, cfg.diffusion, cfg.query_k(), cfg.gamma)?;
    let rankings = reranker.rank_all(queries)?;
    let map = mean_ap(&rankings, protocol, mode)?;
    Ok(PipelineRun {
        affinity,
        rankings,
        map,
    })
}

/// Edge counts and weight mass between items of different labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossLabelStats {
    pub edges: usize,
    pub cross_edges: usize,
    pub weight: f64,
    pub cross_weight: f64,
}

pub fn cross_label_stats(a: &SparseAffinity, labels: &[usize]) -> CrossLabelStats {
    let mut s = CrossLabelStats {
        edges: 0,
        cross_edges: 0,
        weight: 0.0,
        cross_weight: 0.0,
    };
    for &(i, j, w) in a.edges() {
        s.edges += 1;
        s.weight += w;
        if labels[i] != labels[j] {
            s.cross_edges += 1;
            s.cross_weight += w;
        }
    }
    s
}
