//! Descriptor similarities, exhaustive k-NN lists, the mutual-neighbor affinity
//! graph and its symmetric normalization.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::par;

/// Default exponent applied to clipped inner products.
pub const DEFAULT_GAMMA: f64 = 3.0;

/// `N` descriptors of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    data: Vec<f64>,
    ids: Vec<String>,
}

impl DescriptorSet {
    /// Builds a set from row-major data. Without `ids`, items are named by their
    /// 0-based index.
    pub fn from_flat(dim: usize, data: Vec<f64>, ids: Option<Vec<String>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "descriptor dimension must be at least 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::param(
                "data",
                format!("{} values do not form a non-empty set of {dim}-vectors", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor set"));
        }
        let n = data.len() / dim;
        let ids = match ids {
            Some(ids) if ids.len() != n => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: ids.len(),
                })
            }
            Some(ids) => ids,
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        Ok(Self { dim, data, ids })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::from_flat(dim, rows.concat(), None)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Scales every row to unit Euclidean norm. Zero rows are left untouched.
    pub fn normalize_rows(&mut self) {
        let dim = self.dim;
        for row in self.data.chunks_exact_mut(dim) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    /// A one-row set holding row `i`, keeping its identifier.
    pub fn single(&self, i: usize) -> DescriptorSet {
        DescriptorSet {
            dim: self.dim,
            data: self.row(i).to_vec(),
            ids: vec![self.ids[i].clone()],
        }
    }
}

#[inline]
pub(crate) fn similarity_unchecked(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    if dot <= 0.0 {
        0.0
    } else if gamma == 1.0 {
        dot
    } else {
        dot.powf(gamma)
    }
}

/// `max(0, <a, b>)^gamma`. Self-pairs are not special-cased here.
pub fn pairwise_similarity(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", "must be a positive finite number"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("similarity input"));
    }
    Ok(similarity_unchecked(a, b, gamma))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::param("gamma", "must be a positive finite number"))
    }
}

/// Orders `(index, similarity)` by descending similarity, then ascending index.
pub(crate) fn by_similarity_desc(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Top-`k` of a candidate list under [`by_similarity_desc`], sorted.
pub(crate) fn top_k(mut cands: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if k < cands.len() {
        if k > 0 {
            cands.select_nth_unstable_by(k - 1, by_similarity_desc);
        }
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_similarity_desc);
    cands
}

/// Per-item neighbor lists, most similar first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnLists {
    k: usize,
    neighbors: Vec<Vec<usize>>,
    sims: Vec<Vec<f64>>,
}

impl KnnLists {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn sims(&self, i: usize) -> &[f64] {
        &self.sims[i]
    }

    /// Keeps only the first `k` entries of every list.
    pub fn truncated(&self, k: usize) -> KnnLists {
        let k = k.min(self.k);
        KnnLists {
            k,
            neighbors: self.neighbors.iter().map(|l| l[..k].to_vec()).collect(),
            sims: self.sims.iter().map(|l| l[..k].to_vec()).collect(),
        }
    }
}

/// Exhaustive k-NN by [`pairwise_similarity`], excluding each item itself.
/// Ties are broken by the smaller index.
pub fn build_knn(x: &DescriptorSet, k: usize, gamma: f64) -> Result<KnnLists> {
    check_gamma(gamma)?;
    let n = x.len();
    let valid = if n == 1 { k == 0 } else { (1..n).contains(&k) };
    if !valid {
        return Err(Error::param(
            "k",
            format!("{k} is outside [1, N-1] for N = {n}"),
        ));
    }
    let lists = par::map_range(n, |i| {
        let xi = x.row(i);
        let cands: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, similarity_unchecked(xi, x.row(j), gamma)))
            .collect();
        top_k(cands, k)
    });
    let (neighbors, sims) = lists
        .into_iter()
        .map(|l| l.into_iter().unzip())
        .unzip();
    Ok(KnnLists { k, neighbors, sims })
}

/// Symmetric nonnegative affinity with zero diagonal. Each undirected edge is
/// stored once as `(i, j, w)` with `i < j`; symmetry is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAffinity {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl SparseAffinity {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    /// Accepts edges in either orientation. Zero weights are dropped; duplicate
    /// pairs must agree in value.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut canon = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::param("edges", format!("edge ({i}, {j}) out of bounds for n = {n}")));
            }
            if i == j {
                return Err(Error::param("edges", format!("self-loop on {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::param("edges", format!("weight {w} on ({i}, {j}) is not a nonnegative finite number")));
            }
            if w > 0.0 {
                canon.push((i.min(j), i.max(j), w));
            }
        }
        canon.sort_by_key(|e| (e.0, e.1));
        let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(canon.len());
        for e in canon {
            match edges.last() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => {
                    if last.2 != e.2 {
                        return Err(Error::param(
                            "edges",
                            format!("asymmetric weights on ({}, {}): {} vs {}", e.0, e.1, last.2, e.2),
                        ));
                    }
                }
                _ => edges.push(e),
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn nnz(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(i, j, w)` edges with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map_or(0.0, |p| self.edges[p].2)
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    /// Both orientations as a CSR matrix.
    pub fn to_csr(&self) -> CsrMatrix {
        let triplets = self
            .edges
            .iter()
            .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
            .collect();
        CsrMatrix::from_triplets(self.n, triplets)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, w) in &self.edges {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        m
    }
}

/// Keeps `s(i, j)` only when `i` and `j` are in each other's k-NN list.
pub fn reciprocity_affinity(knn: &KnnLists) -> SparseAffinity {
    let n = knn.len();
    let members: Vec<HashSet<usize>> = knn
        .neighbors
        .iter()
        .map(|l| l.iter().copied().collect())
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for (&j, &s) in knn.neighbors(i).iter().zip(knn.sims(i)) {
            if i < j && members[j].contains(&i) && s > 0.0 {
                edges.push((i, j, s));
            }
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    SparseAffinity { n, edges }
}

/// `S = D^{-1/2} A D^{-1/2}` together with the degrees of `A`.
#[derive(Debug, Clone)]
pub struct NormalizedAffinity {
    pub matrix: CsrMatrix,
    pub degree: Vec<f64>,
}

impl NormalizedAffinity {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

/// Symmetric normalization. Items of zero degree get an all-zero row and column.
pub fn symmetric_normalize(a: &SparseAffinity) -> NormalizedAffinity {
    let degree = a.degrees();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let triplets = a
        .edges
        .iter()
        .flat_map(|&(i, j, w)| {
            let v = w * inv_sqrt[i] * inv_sqrt[j];
            [(i, j, v), (j, i, v)]
        })
        .collect();
    NormalizedAffinity {
        matrix: CsrMatrix::from_triplets(a.n, triplets),
        degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(rows: &[&[f64]]) -> DescriptorSet {
        DescriptorSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(pairwise_similarity(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap(), 0.0);
        assert_eq!(pairwise_similarity(&[1.0, 0.0], &[-1.0, 0.0], 3.0).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = pairwise_similarity(&[1.0, 0.0], &[h, h], 1.0).unwrap();
        assert!((s - h).abs() < 1e-15);
    }

    #[test]
    fn similarity_errors() {
        assert!(matches!(
            pairwise_similarity(&[1.0], &[1.0, 2.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            pairwise_similarity(&[f64::NAN], &[1.0], 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(pairwise_similarity(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn descriptor_set_validation() {
        assert!(DescriptorSet::from_flat(0, vec![], None).is_err());
        assert!(DescriptorSet::from_flat(2, vec![1.0, 2.0, 3.0], None).is_err());
        assert!(DescriptorSet::from_flat(1, vec![f64::INFINITY], None).is_err());
        let mut x = set(&[&[3.0, 4.0], &[0.0, 2.0]]);
        x.normalize_rows();
        for r in x.rows() {
            assert!((r.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-6);
        }
        assert_eq!(x.ids(), &["0".to_string(), "1".to_string()]);
    }

    #[test]
    fn knn_two_items() {
        let x = set(&[&[1.0, 0.2], &[0.3, 1.0]]);
        let knn = build_knn(&x, 1, 3.0).unwrap();
        assert_eq!(knn.neighbors(0), &[1]);
        assert_eq!(knn.neighbors(1), &[0]);
    }

    #[test]
    fn knn_three_collinear_points() {
        // directions at 0, 20 and 50 degrees
        let p = |deg: f64| vec![deg.to_radians().cos(), deg.to_radians().sin()];
        let x = DescriptorSet::from_rows(&[p(0.0), p(20.0), p(50.0)]).unwrap();
        let knn = build_knn(&x, 2, 1.0).unwrap();
        // exhaustive oracle
        for i in 0..3 {
            let mut c: Vec<(usize, f64)> = (0..3)
                .filter(|&j| j != i)
                .map(|j| (j, x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum::<f64>()))
                .collect();
            c.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            assert_eq!(knn.neighbors(i), &c.iter().map(|e| e.0).collect::<Vec<_>>()[..]);
        }
        assert_eq!(knn.neighbors(0), &[1, 2]);
        assert_eq!(knn.neighbors(2), &[1, 0]);
    }

    #[test]
    fn knn_duplicates_tie_break_by_index() {
        let x = set(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let knn = build_knn(&x, 3, 3.0).unwrap();
        assert_eq!(knn.neighbors(0), &[1, 2, 3]);
        assert_eq!(knn.neighbors(2), &[0, 1, 3]);
    }

    #[test]
    fn knn_k_out_of_range() {
        let x = set(&[&[1.0], &[2.0], &[3.0]]);
        assert!(build_knn(&x, 0, 1.0).is_err());
        assert!(build_knn(&x, 3, 1.0).is_err());
        let one = set(&[&[1.0]]);
        let knn = build_knn(&one, 0, 1.0).unwrap();
        assert!(reciprocity_affinity(&knn).edges().is_empty());
    }

    #[test]
    fn reciprocity_three_items() {
        // NN(0) = 1, NN(1) = 0, NN(2) = 0
        let knn = KnnLists {
            k: 1,
            neighbors: vec![vec![1], vec![0], vec![0]],
            sims: vec![vec![0.9], vec![0.9], vec![0.5]],
        };
        let a = reciprocity_affinity(&knn);
        assert_eq!(a.edges(), &[(0, 1, 0.9)]);
    }

    #[test]
    fn reciprocity_complete_when_k_is_n_minus_one() {
        let x = set(&[&[1.0, 0.1], &[0.8, 0.5], &[0.2, 1.0], &[0.6, 0.6]]);
        let knn = build_knn(&x, 3, 3.0).unwrap();
        let a = reciprocity_affinity(&knn);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.0 } else { pairwise_similarity(x.row(i), x.row(j), 3.0).unwrap() };
                assert_eq!(a.get(i, j), want);
            }
        }
    }

    #[test]
    fn normalize_two_nodes() {
        let a = SparseAffinity::from_edges(2, [(0, 1, 0.5)]).unwrap();
        let s = symmetric_normalize(&a);
        assert!((s.matrix.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((s.matrix.get(1, 0) - 1.0).abs() < 1e-15);
        assert_eq!(s.degree, vec![0.5, 0.5]);
    }

    #[test]
    fn normalize_empty_is_zero() {
        let s = symmetric_normalize(&SparseAffinity::empty(3));
        assert_eq!(s.matrix.nnz(), 0);
        assert_eq!(s.matrix.matvec(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn normalize_regular_graph_divides_by_degree() {
        // 4-cycle with unit-sum rows: every degree is c = 0.7
        let a = SparseAffinity::from_edges(4, [(0, 1, 0.3), (1, 2, 0.4), (2, 3, 0.3), (3, 0, 0.4)]).unwrap();
        let s = symmetric_normalize(&a).matrix.to_dense();
        let dense = a.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert!((s[(i, j)] - dense[(i, j)] / 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(SparseAffinity::from_edges(2, [(0, 0, 1.0)]).is_err());
        assert!(SparseAffinity::from_edges(2, [(0, 2, 1.0)]).is_err());
        assert!(SparseAffinity::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(SparseAffinity::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        let a = SparseAffinity::from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
    }

    fn rows_strategy(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2..max_n).prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), n))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn similarity_symmetric_and_monotone(a in proptest::collection::vec(-1.0f64..1.0, 4),
                                             b in proptest::collection::vec(-1.0f64..1.0, 4),
                                             g in 0.5f64..4.0) {
            let s_ab = pairwise_similarity(&a, &b, g).unwrap();
            let s_ba = pairwise_similarity(&b, &a, g).unwrap();
            prop_assert_eq!(s_ab, s_ba);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            if dot > 0.0 && dot < 1.0 {
                prop_assert!(pairwise_similarity(&a, &b, g + 0.5).unwrap() <= s_ab);
            }
        }

        #[test]
        fn knn_invariants(rows in rows_strategy(24), kf in 0.0f64..1.0) {
            let x = DescriptorSet::from_rows(&rows).unwrap();
            let n = x.len();
            let k = 1 + ((n - 2) as f64 * kf) as usize;
            let knn = build_knn(&x, k, 3.0).unwrap();
            for i in 0..n {
                prop_assert!(!knn.neighbors(i).contains(&i));
                prop_assert!(knn.sims(i).windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(knn.sims(i).iter().all(|&s| s >= 0.0));
            }
        }

        #[test]
        fn knn_permutation_invariance(rows in rows_strategy(20), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let n = rows.len();
            let k = (n - 1).min(4);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let x = DescriptorSet::from_rows(&rows).unwrap();
            let xp = DescriptorSet::from_rows(&perm.iter().map(|&p| rows[p].clone()).collect::<Vec<_>>()).unwrap();
            let knn = build_knn(&x, k, 3.0).unwrap();
            let knn_p = build_knn(&xp, k, 3.0).unwrap();
            // Map permuted lists back to original indices. Similarity sequences
            // must match exactly; index sets must match above the boundary value,
            // where no tie-break is involved.
            for (pi, &orig) in perm.iter().enumerate() {
                prop_assert_eq!(knn.sims(orig), knn_p.sims(pi));
                let boundary = *knn.sims(orig).last().unwrap();
                let above = |ids: &[usize], sims: &[f64], map: &dyn Fn(usize) -> usize| {
                    let mut v: Vec<usize> = ids.iter().zip(sims).filter(|(_, &s)| s > boundary).map(|(&j, _)| map(j)).collect();
                    v.sort();
                    v
                };
                let a = above(knn.neighbors(orig), knn.sims(orig), &|j| j);
                let b = above(knn_p.neighbors(pi), knn_p.sims(pi), &|j| perm[j]);
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn reciprocity_edges_are_mutual(rows in rows_strategy(40), kf in 0.0f64..1.0) {
            let x = DescriptorSet::from_rows(&rows).unwrap();
            let n = x.len();
            let k = 1 + ((n - 2) as f64 * kf) as usize;
            let knn = build_knn(&x, k, 3.0).unwrap();
            let a = reciprocity_affinity(&knn);
            for &(i, j, w) in a.edges() {
                prop_assert!(i < j);
                prop_assert!(knn.neighbors(i).contains(&j) && knn.neighbors(j).contains(&i));
                prop_assert_eq!(w, pairwise_similarity(x.row(i), x.row(j), 3.0).unwrap());
            }
            // brute force: every mutual positive pair is present
            for i in 0..n {
                for &j in knn.neighbors(i) {
                    if knn.neighbors(j).contains(&i) && pairwise_similarity(x.row(i), x.row(j), 3.0).unwrap() > 0.0 {
                        prop_assert!(a.get(i, j) > 0.0);
                    }
                }
            }
        }

        #[test]
        fn normalized_spectrum_within_unit_interval(rows in rows_strategy(30), kf in 0.0f64..1.0) {
            let x = DescriptorSet::from_rows(&rows).unwrap();
            let n = x.len();
            let k = 1 + ((n - 2) as f64 * kf) as usize;
            let a = reciprocity_affinity(&build_knn(&x, k, 3.0).unwrap());
            let s = symmetric_normalize(&a).matrix.to_dense();
            prop_assert!((&s - s.transpose()).abs().max() < 1e-15);
            for i in 0..n { prop_assert_eq!(s[(i, i)], 0.0); }
            let eig = nalgebra::SymmetricEigen::new(s);
            prop_assert!(eig.eigenvalues.iter().all(|l| l.abs() <= 1.0 + 1e-9));
        }
    }
}
