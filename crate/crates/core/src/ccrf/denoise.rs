use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::clique::build_clique;
use super::system::{assemble_system, infer, DenoisedRow, Solver};
use super::weights::weight_matrix;
use crate::error::{Error, Result};
use crate::graph::{build_knn, by_similarity_desc, top_k, DescriptorSet, KnnLists, SparseAffinity};
use crate::par;

/// When the per-pivot top-`k_out` selection happens relative to averaging the
/// two directions of an edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reselect {
    /// Each pivot keeps its `k_out` largest refined values, then the two
    /// directions are averaged (a missing direction counts as zero).
    #[default]
    BeforeSymmetrize,
    /// All refined values are averaged first; an edge survives if it is among
    /// the `k_out` strongest of either endpoint.
    AfterSymmetrize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcrfParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_d: f64,
    pub sigma_r: f64,
    pub gamma: f64,
    pub solver: Solver,
    pub tol: f64,
    /// CG iteration cap; `None` means `10 * L`.
    pub max_iter: Option<usize>,
    pub reselect: Reselect,
}

impl Default for CcrfParams {
    /// α = 1, β = 0.1 with the ResNet-style bandwidths σ_d = 0.9, σ_r = 3.5e-4.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            sigma_d: 0.9,
            sigma_r: 3.5e-4,
            gamma: crate::graph::DEFAULT_GAMMA,
            solver: Solver::Cg,
            tol: 1e-6,
            max_iter: None,
            reselect: Reselect::BeforeSymmetrize,
        }
    }
}

impl CcrfParams {
    /// Bandwidths for VGG-style descriptors.
    pub fn vgg() -> Self {
        Self {
            sigma_d: 0.8,
            sigma_r: 2e-4,
            ..Self::default()
        }
    }
}

/// Runs clique construction and MAP inference for every pivot.
///
/// `knn` must hold at least `clique_size` neighbors per item. Rows come back in
/// pivot order regardless of how the work was scheduled.
pub fn denoise_rows(
    x: &DescriptorSet,
    knn: &KnnLists,
    clique_size: usize,
    params: &CcrfParams,
) -> Result<Vec<DenoisedRow>> {
    let max_iter = params.max_iter.unwrap_or(10 * clique_size);
    par::try_map_range(x.len(), |p| {
        denoise_pivot(x, knn, p, clique_size, params, max_iter).map_err(|e| Error::Pivot {
            pivot: p,
            source: Box::new(e),
        })
    })
}

fn denoise_pivot(
    x: &DescriptorSet,
    knn: &KnnLists,
    pivot: usize,
    clique_size: usize,
    params: &CcrfParams,
    max_iter: usize,
) -> Result<DenoisedRow> {
    let clique = build_clique(x, knn, pivot, clique_size, params.gamma)?;
    let w = weight_matrix(x, &clique, params.sigma_d, params.sigma_r)?;
    let system = assemble_system(&clique, &w, params.alpha, params.beta)?;
    let y = infer(&system, params.solver, params.tol, max_iter)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("refined similarities"));
    }
    Ok(DenoisedRow {
        pivot,
        members: clique.members,
        values: y.iter().copied().collect(),
    })
}

/// Builds the symmetric affinity `a_pi = (y_{p,i} + y_{i,p}) / 2` from refined
/// rows, keeping `k_out` entries per pivot.
pub fn symmetrize(n: usize, rows: &[DenoisedRow], k_out: usize, order: Reselect) -> Result<SparseAffinity> {
    // (lo, hi) -> (value seen from lo, value seen from hi)
    let directed = |rows: &mut dyn Iterator<Item = (usize, usize, f64)>| {
        let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for (p, i, y) in rows {
            let e = pairs.entry((p.min(i), p.max(i))).or_insert((0.0, 0.0));
            if p < i {
                e.0 = y;
            } else {
                e.1 = y;
            }
        }
        pairs
    };
    let average = |(a, b): (f64, f64)| (0.5 * (a + b)).max(0.0);

    match order {
        Reselect::BeforeSymmetrize => {
            let mut kept = rows.iter().flat_map(|r| {
                let cands = r.members.iter().copied().zip(r.values.iter().copied()).collect();
                top_k(cands, k_out).into_iter().map(move |(i, y)| (r.pivot, i, y))
            });
            let pairs = directed(&mut kept);
            SparseAffinity::from_edges(n, pairs.into_iter().map(|((i, j), v)| (i, j, average(v))))
        }
        Reselect::AfterSymmetrize => {
            let mut all = rows
                .iter()
                .flat_map(|r| r.members.iter().zip(&r.values).map(move |(&i, &y)| (r.pivot, i, y)));
            let pairs = directed(&mut all);
            let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            let averaged: Vec<((usize, usize), f64)> =
                pairs.into_iter().map(|(key, v)| (key, average(v))).collect();
            for &((i, j), w) in &averaged {
                incident[i].push((j, w));
                incident[j].push((i, w));
            }
            let mut keep = std::collections::HashSet::new();
            for (i, mut list) in incident.into_iter().enumerate() {
                list.sort_unstable_by(by_similarity_desc);
                for (j, _) in list.into_iter().take(k_out) {
                    keep.insert((i.min(j), i.max(j)));
                }
            }
            SparseAffinity::from_edges(
                n,
                averaged.into_iter().filter(|(key, _)| keep.contains(key)).map(|((i, j), w)| (i, j, w)),
            )
        }
    }
}

/// Denoises the whole database: one clique of size `clique_size` per pivot,
/// `k_out` refined neighbors kept per pivot, symmetrized by averaging.
pub fn denoise_database(
    x: &DescriptorSet,
    clique_size: usize,
    params: &CcrfParams,
    k_out: usize,
) -> Result<SparseAffinity> {
    let n = x.len();
    if clique_size == 0 || clique_size + 1 > n {
        return Err(Error::param(
            "clique_size",
            format!("{clique_size} is outside [1, N-1] for N = {n}"),
        ));
    }
    if k_out == 0 || k_out > clique_size {
        return Err(Error::param(
            "k_out",
            format!("{k_out} is outside [1, clique_size = {clique_size}]"),
        ));
    }
    let knn = build_knn(x, clique_size, params.gamma)?;
    let rows = denoise_rows(x, &knn, clique_size, params)?;
    symmetrize(n, &rows, k_out, params.reselect)
}
