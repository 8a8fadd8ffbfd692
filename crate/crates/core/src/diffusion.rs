//! Random-walk diffusion over a normalized affinity graph.
//!
//! The state `v` evolves as `v ← ρ S v + (1 − ρ) v0`, whose fixed point is
//! `(1 − ρ)(I − ρ S)⁻¹ v0`. Online mode solves that system per query; offline
//! mode precomputes (truncated) columns of the diffusion kernel once and
//! superimposes them at query time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_gamma, similarity_unchecked, symmetric_normalize, top_k, DescriptorSet, NormalizedAffinity, SparseAffinity};
use crate::linalg::{conjugate_gradient, CsrMatrix, LinearOperator, ShiftedOperator};
use crate::par;
use crate::ranking::RetrievalRanking;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffusionMode {
    #[default]
    Online,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub mode: DiffusionMode,
    /// Entries kept per offline kernel column; `None` keeps all `N`.
    pub trunc: Option<usize>,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            rho: 0.99,
            // 0.99^t drops below 1e-6 after ~1400 steps
            max_iter: 2000,
            tol: 1e-6,
            mode: DiffusionMode::Online,
            trunc: None,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::param("rho", format!("{rho} is not in (0, 1)")))
    }
}

/// Residuals of one iteration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResidual {
    pub inf: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub v: Vec<f64>,
    pub iteration: usize,
    /// `‖v^{t+1} − v^t‖∞` of the last step.
    pub residual: f64,
    pub history: Vec<StepResidual>,
}

/// Initial state: the query's similarity to each of its `k` nearest database
/// items, zero elsewhere.
pub fn query_init(query: &DescriptorSet, x: &DescriptorSet, k: usize, gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if query.len() != 1 {
        return Err(Error::param("query", format!("expected one descriptor, got {}", query.len())));
    }
    if query.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: query.dim(),
        });
    }
    let n = x.len();
    if k > n {
        return Err(Error::param("k", format!("{k} exceeds database size {n}")));
    }
    let q = query.row(0);
    let sims: Vec<(usize, f64)> = x
        .rows()
        .enumerate()
        .map(|(i, xi)| (i, similarity_unchecked(xi, q, gamma)))
        .collect();
    let mut v0 = vec![0.0; n];
    for (i, s) in top_k(sims, k) {
        v0[i] = s;
    }
    Ok(v0)
}

fn check_len(s: &NormalizedAffinity, v0: &[f64]) -> Result<()> {
    if v0.len() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            found: v0.len(),
        });
    }
    if v0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    Ok(())
}

/// Iterates the random walk until the ∞-norm step falls to `params.tol`.
pub fn diffuse_iterative(s: &NormalizedAffinity, v0: &[f64], params: &DiffusionParams) -> Result<DiffusionState> {
    params.validate()?;
    check_len(s, v0)?;
    let rho = params.rho;
    let mut v = v0.to_vec();
    let mut sv = vec![0.0; v.len()];
    let mut history = Vec::new();
    for t in 1..=params.max_iter {
        s.matrix.apply(&v, &mut sv);
        let mut inf: f64 = 0.0;
        let mut l2 = 0.0;
        for i in 0..v.len() {
            let next = rho * sv[i] + (1.0 - rho) * v0[i];
            let d = next - v[i];
            inf = inf.max(d.abs());
            l2 += d * d;
            v[i] = next;
        }
        history.push(StepResidual { inf, l2: l2.sqrt() });
        if inf <= params.tol {
            return Ok(DiffusionState {
                v,
                iteration: t,
                residual: inf,
                history,
            });
        }
    }
    Err(Error::DiffusionNotConverged {
        iterations: params.max_iter,
        residual: history.last().map_or(f64::INFINITY, |h| h.inf),
    })
}

fn cg_budget(n: usize) -> usize {
    (10 * n).max(200)
}

fn solve_shifted(s: &CsrMatrix, rho: f64, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let op = ShiftedOperator { matrix: s, rho };
    Ok(conjugate_gradient(&op, rhs, tol, cg_budget(s.n()))?.x)
}

/// Solves `(I − ρS) v = (1 − ρ) v0` by conjugate gradient.
pub fn diffuse_closed_form(s: &NormalizedAffinity, v0: &[f64], rho: f64, solver_tol: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    check_len(s, v0)?;
    let rhs: Vec<f64> = v0.iter().map(|v| (1.0 - rho) * v).collect();
    solve_shifted(&s.matrix, rho, &rhs, solver_tol)
}

/// Truncated columns of `(1 − ρ)(I − ρS)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineKernel {
    n: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl OfflineKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, i: usize) -> &[(usize, f64)] {
        &self.columns[i]
    }

    /// `Σ_i v0_i f_i`, accumulated in ascending `i`.
    pub fn apply(&self, v0: &[f64]) -> Result<Vec<f64>> {
        if v0.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v0.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for (col, &w) in self.columns.iter().zip(v0) {
            if w == 0.0 {
                continue;
            }
            for &(j, f) in col {
                out[j] += w * f;
            }
        }
        Ok(out)
    }
}

/// Solves the diffusion system for every basis vector and keeps the `trunc`
/// largest entries of each solution.
pub fn offline_precompute(s: &NormalizedAffinity, rho: f64, trunc: usize, solver_tol: f64) -> Result<OfflineKernel> {
    check_rho(rho)?;
    let n = s.n();
    if trunc == 0 || trunc > n {
        return Err(Error::param("trunc", format!("{trunc} is outside [1, N = {n}]")));
    }
    let columns = par::try_map_range(n, |i| {
        let mut rhs = vec![0.0; n];
        rhs[i] = 1.0 - rho;
        let f = solve_shifted(&s.matrix, rho, &rhs, solver_tol).map_err(|e| Error::OfflineItem {
            item: i,
            source: Box::new(e),
        })?;
        let mut col = top_k(f.into_iter().enumerate().collect(), trunc);
        col.retain(|&(_, v)| v != 0.0);
        Ok::<_, Error>(col)
    })?;
    Ok(OfflineKernel { n, columns })
}

/// Shared per-database state for ranking many queries.
#[derive(Debug, Clone)]
pub struct Reranker<'a> {
    database: &'a DescriptorSet,
    normalized: NormalizedAffinity,
    kernel: Option<OfflineKernel>,
    params: DiffusionParams,
    query_k: usize,
    gamma: f64,
}

impl<'a> Reranker<'a> {
    pub fn new(
        database: &'a DescriptorSet,
        affinity: &SparseAffinity,
        params: DiffusionParams,
        query_k: usize,
        gamma: f64,
    ) -> Result<Self> {
        params.validate()?;
        check_gamma(gamma)?;
        let n = database.len();
        if affinity.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: affinity.n(),
            });
        }
        if query_k == 0 || query_k > n {
            return Err(Error::param("query_k", format!("{query_k} is outside [1, N = {n}]")));
        }
        let normalized = symmetric_normalize(affinity);
        let kernel = match params.mode {
            DiffusionMode::Online => None,
            DiffusionMode::Offline => Some(offline_precompute(
                &normalized,
                params.rho,
                params.trunc.unwrap_or(n).min(n),
                params.tol,
            )?),
        };
        Ok(Self {
            database,
            normalized,
            kernel,
            params,
            query_k,
            gamma,
        })
    }

    pub fn normalized(&self) -> &NormalizedAffinity {
        &self.normalized
    }

    /// Diffused scores of every database item for one query.
    pub fn scores(&self, query: &DescriptorSet) -> Result<Vec<f64>> {
        let v0 = query_init(query, self.database, self.query_k, self.gamma)?;
        match &self.kernel {
            Some(kernel) => kernel.apply(&v0),
            None => diffuse_closed_form(&self.normalized, &v0, self.params.rho, self.params.tol),
        }
    }

    pub fn rank(&self, query: &DescriptorSet) -> Result<RetrievalRanking> {
        Ok(RetrievalRanking::from_scores(&self.scores(query)?))
    }

    /// Ranks every row of `queries`, in row order.
    pub fn rank_all(&self, queries: &DescriptorSet) -> Result<Vec<RetrievalRanking>> {
        par::try_map_range(queries.len(), |q| self.rank(&queries.single(q)))
    }
}

/// One-shot re-ranking of a single query.
pub fn rerank(
    query: &DescriptorSet,
    x: &DescriptorSet,
    affinity: &SparseAffinity,
    params: &DiffusionParams,
    k: usize,
    gamma: f64,
) -> Result<RetrievalRanking> {
    Reranker::new(x, affinity, *params, k, gamma)?.rank(query)
}
