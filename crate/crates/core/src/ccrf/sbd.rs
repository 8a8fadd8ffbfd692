use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Similarity-based distribution of one clique member: its intra-clique
/// similarity row, scaled to unit norm and pushed through a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct SbdPmf {
    probs: Vec<f64>,
}

impl SbdPmf {
    /// Wraps an existing distribution. Entries must be positive and sum to 1.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::param("probs", "entries must be positive and finite"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("probs", format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Softmax over the l2-normalized row `i` of `sim_matrix`. The (zero) self
/// entry takes part in both steps. An all-zero row yields the uniform PMF.
pub fn sbd_pmf(sim_matrix: &DMatrix<f64>, i: usize) -> SbdPmf {
    let row = sim_matrix.row(i);
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scaled: Vec<f64> = if norm > 0.0 {
        row.iter().map(|v| v / norm).collect()
    } else {
        vec![0.0; row.len()]
    };
    // scaled entries lie in [0, 1], so exp cannot overflow
    let exps: Vec<f64> = scaled.iter().map(|v| v.exp()).collect();
    let total: f64 = exps.iter().sum();
    SbdPmf {
        probs: exps.into_iter().map(|e| e / total).collect(),
    }
}

/// `KL(p || q)` for strictly positive distributions.
pub fn kl_divergence(p: &SbdPmf, q: &SbdPmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| a * (a / b).ln())
        .sum())
}

/// Jeffreys divergence `(KL(p||q) + KL(q||p)) / 2`.
pub fn j_divergence(p: &SbdPmf, q: &SbdPmf) -> Result<f64> {
    let d = 0.5 * (kl_divergence(p, q)? + kl_divergence(q, p)?);
    Ok(d.max(0.0))
}
