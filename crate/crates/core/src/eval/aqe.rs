use crate::error::{Error, Result};
use crate::graph::{check_gamma, similarity_unchecked, top_k, DescriptorSet};
use crate::ranking::RetrievalRanking;

fn single_query(query: &DescriptorSet, x: &DescriptorSet) -> Result<()> {
    if query.len() != 1 {
        return Err(Error::param("query", format!("expected one descriptor, got {}", query.len())));
    }
    if query.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: query.dim(),
        });
    }
    Ok(())
}

fn rank_by(q: &[f64], x: &DescriptorSet, gamma: f64) -> RetrievalRanking {
    let scores: Vec<f64> = x.rows().map(|xi| similarity_unchecked(xi, q, gamma)).collect();
    RetrievalRanking::from_scores(&scores)
}

/// Exhaustive nearest-neighbor ranking of the whole database.
pub fn nn_search(query: &DescriptorSet, x: &DescriptorSet, gamma: f64) -> Result<RetrievalRanking> {
    check_gamma(gamma)?;
    single_query(query, x)?;
    Ok(rank_by(query.row(0), x, gamma))
}

/// Average query expansion: the query is replaced by the normalized mean of
/// itself and its `nqe` nearest database descriptors, then the database is
/// ranked again. `nqe = 0` is plain [`nn_search`].
pub fn aqe_baseline(query: &DescriptorSet, x: &DescriptorSet, nqe: usize, gamma: f64) -> Result<RetrievalRanking> {
    check_gamma(gamma)?;
    single_query(query, x)?;
    if nqe > x.len() {
        return Err(Error::param("nqe", format!("{nqe} exceeds database size {}", x.len())));
    }
    let q = query.row(0);
    if nqe == 0 {
        return Ok(rank_by(q, x, gamma));
    }
    let sims = x.rows().enumerate().map(|(i, xi)| (i, similarity_unchecked(xi, q, gamma))).collect();
    let mut expanded = q.to_vec();
    for (i, _) in top_k(sims, nqe) {
        for (e, v) in expanded.iter_mut().zip(x.row(i)) {
            *e += v;
        }
    }
    let norm = expanded.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        expanded.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(rank_by(&expanded, x, gamma))
}
