use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{check_gamma, similarity_unchecked, DescriptorSet, KnnLists};

/// The pivot's `L` nearest neighbors and their dense similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Clique {
    pub pivot: usize,
    /// Neighbor indices, most similar to the pivot first. The pivot itself is
    /// never a member.
    pub members: Vec<usize>,
    /// `L x L` member-to-member similarities, zero diagonal.
    pub sim_matrix: DMatrix<f64>,
    /// Pivot-to-member similarities, aligned with `members`.
    pub pivot_sims: Vec<f64>,
}

impl Clique {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

pub fn build_clique(
    x: &DescriptorSet,
    knn: &KnnLists,
    pivot: usize,
    size: usize,
    gamma: f64,
) -> Result<Clique> {
    check_gamma(gamma)?;
    let n = x.len();
    if knn.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: knn.len(),
        });
    }
    if pivot >= n {
        return Err(Error::param("pivot", format!("{pivot} out of range for N = {n}")));
    }
    if size == 0 || size + 1 > n {
        return Err(Error::param(
            "clique_size",
            format!("{size} is outside [1, N-1] for N = {n}"),
        ));
    }
    if knn.k() < size {
        return Err(Error::param(
            "clique_size",
            format!("k-NN lists hold {} neighbors, clique needs {size}", knn.k()),
        ));
    }

    let members = knn.neighbors(pivot)[..size].to_vec();
    let xp = x.row(pivot);
    let pivot_sims = members
        .iter()
        .map(|&m| similarity_unchecked(xp, x.row(m), gamma))
        .collect();
    let mut sim_matrix = DMatrix::zeros(size, size);
    for a in 0..size {
        let xa = x.row(members[a]);
        for b in a + 1..size {
            let s = similarity_unchecked(xa, x.row(members[b]), gamma);
            sim_matrix[(a, b)] = s;
            sim_matrix[(b, a)] = s;
        }
    }
    Ok(Clique {
        pivot,
        members,
        sim_matrix,
        pivot_sims,
    })
}
