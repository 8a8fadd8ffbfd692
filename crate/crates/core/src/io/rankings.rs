use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ranking::RetrievalRanking;

/// One line of a ranking export.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingRecord {
    pub query_id: String,
    pub item_id: String,
    /// 1-based.
    pub rank: usize,
    pub score: f64,
}

/// Writes `query_id item_id rank score` lines, scores with 6 decimals.
pub fn write_rankings<W: Write>(
    mut w: W,
    query_ids: &[String],
    item_ids: &[String],
    rankings: &[RetrievalRanking],
    top: Option<usize>,
) -> Result<()> {
    if query_ids.len() != rankings.len() {
        return Err(Error::DimensionMismatch {
            expected: rankings.len(),
            found: query_ids.len(),
        });
    }
    for (qid, ranking) in query_ids.iter().zip(rankings) {
        let limit = top.unwrap_or(usize::MAX);
        for (r, &(item, score)) in ranking.entries().iter().take(limit).enumerate() {
            let id = item_ids.get(item).ok_or(Error::DimensionMismatch {
                expected: item_ids.len(),
                found: item + 1,
            })?;
            writeln!(w, "{qid} {id} {} {score:.6}", r + 1)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_rankings<R: BufRead>(r: R) -> Result<Vec<RankingRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: n + 1, reason };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, got {}", f.len())));
        }
        let rank: usize = f[2].parse().map_err(|_| err(format!("bad rank {:?}", f[2])))?;
        if rank == 0 {
            return Err(err("ranks are 1-based".into()));
        }
        let score: f64 = f[3].parse().map_err(|_| err(format!("bad score {:?}", f[3])))?;
        out.push(RankingRecord {
            query_id: f[0].to_string(),
            item_id: f[1].to_string(),
            rank,
            score,
        });
    }
    Ok(out)
}

/// Regroups records by query (first-appearance order) and maps item ids back
/// to indices.
pub fn rankings_from_records(
    records: &[RankingRecord],
    item_ids: &[String],
) -> Result<Vec<(String, RetrievalRanking)>> {
    let index: std::collections::HashMap<&str, usize> =
        item_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut groups: Vec<(String, Vec<(usize, usize, f64)>)> = Vec::new();
    for rec in records {
        let item = *index.get(rec.item_id.as_str()).ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("unknown item id {:?}", rec.item_id),
        })?;
        match groups.iter_mut().find(|(q, _)| *q == rec.query_id) {
            Some((_, v)) => v.push((rec.rank, item, rec.score)),
            None => groups.push((rec.query_id.clone(), vec![(rec.rank, item, rec.score)])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(q, mut v)| {
            v.sort_by_key(|e| e.0);
            let entries = v.into_iter().map(|(_, i, s)| (i, s)).collect();
            (q, RetrievalRanking::from_entries(entries))
        })
        .collect())
}
