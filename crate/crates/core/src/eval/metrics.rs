use std::collections::HashSet;

use super::protocol::{Protocol, ProtocolMode};
use crate::error::{Error, Result};
use crate::ranking::RetrievalRanking;

/// Average precision with junk items skipped.
///
/// Ranks are counted after removing `junk`. Positives missing from the
/// ranking contribute zero precision.
pub fn average_precision(ranking: &RetrievalRanking, positives: &HashSet<usize>, junk: &HashSet<usize>) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::EmptyPositives);
    }
    let mut rank = 0usize;
    let mut found = 0usize;
    let mut total = 0.0;
    for i in ranking.indices() {
        if junk.contains(&i) {
            continue;
        }
        rank += 1;
        if positives.contains(&i) {
            found += 1;
            total += found as f64 / rank as f64;
            if found == positives.len() {
                break;
            }
        }
    }
    Ok(total / positives.len() as f64)
}

/// Mean AP over the protocol's queries, on a 0-100 scale. `rankings[q]`
/// belongs to `protocol.queries[q]`. Queries without positives under `mode`
/// are left out.
pub fn mean_ap(rankings: &[RetrievalRanking], protocol: &Protocol, mode: ProtocolMode) -> Result<f64> {
    if rankings.len() != protocol.queries.len() {
        return Err(Error::DimensionMismatch {
            expected: protocol.queries.len(),
            found: rankings.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (ranking, q) in rankings.iter().zip(&protocol.queries) {
        let (pos, junk) = q.effective(mode);
        if pos.is_empty() {
            continue;
        }
        sum += average_precision(ranking, &pos, &junk)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoEvaluableQueries(mode.name()));
    }
    Ok(100.0 * sum / count as f64)
}
