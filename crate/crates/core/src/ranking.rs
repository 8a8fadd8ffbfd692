use crate::graph::by_similarity_desc;

/// Database indices ordered by descending score; equal scores keep ascending
/// index order.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRanking {
    entries: Vec<(usize, f64)>,
}

impl RetrievalRanking {
    /// Ranks every index of `scores`.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut entries: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        entries.sort_by(by_similarity_desc);
        Self { entries }
    }

    /// Takes an explicit order as given (e.g. read back from a file).
    pub fn from_entries(entries: Vec<(usize, f64)>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
