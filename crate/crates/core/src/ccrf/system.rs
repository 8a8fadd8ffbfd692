use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::clique::Clique;
use super::weights::WeightMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, conjugate_gradient};

/// Linear solver used for MAP inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Dense Cholesky factorization.
    Direct,
    /// Conjugate gradient to a relative residual tolerance.
    Cg,
}

/// Gaussian form of the clique CRF: precision `2(αI + βD − βW)` and
/// right-hand side `2α s_p`. The MAP estimate is `precision⁻¹ · rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrfSystem {
    pub precision: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Unary targets `s_p`, the exact solution when the pairwise term vanishes.
    pub unary: DVector<f64>,
}

/// Refined similarities of one pivot, aligned with its clique members.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisedRow {
    pub pivot: usize,
    pub members: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn assemble_system(
    clique: &Clique,
    w: &WeightMatrix,
    alpha: f64,
    beta: f64,
) -> Result<CcrfSystem> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", "must be positive and finite"));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::param("beta", "must be nonnegative and finite"));
    }
    let l = clique.size();
    if w.weights.shape() != (l, l) {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: w.weights.nrows(),
        });
    }
    let mut precision = DMatrix::zeros(l, l);
    for i in 0..l {
        let mut degree = 0.0;
        for j in 0..l {
            if i != j {
                let wij = w.weights[(i, j)];
                degree += wij;
                precision[(i, j)] = -2.0 * beta * wij;
            }
        }
        precision[(i, i)] = 2.0 * (alpha + beta * degree);
    }
    let rhs = DVector::from_iterator(l, clique.pivot_sims.iter().map(|s| 2.0 * alpha * s));
    Ok(CcrfSystem {
        precision,
        rhs,
        alpha,
        beta,
        unary: DVector::from_column_slice(&clique.pivot_sims),
    })
}

/// Solves `precision · y = rhs`.
pub fn infer(system: &CcrfSystem, solver: Solver, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let l = system.precision.nrows();
    let decoupled = (0..l).all(|i| (0..l).all(|j| i == j || system.precision[(i, j)] == 0.0));
    if decoupled && system.unary.len() == l {
        return Ok(system.unary.clone());
    }
    match solver {
        Solver::Direct => cholesky_solve(&system.precision, &system.rhs),
        Solver::Cg => {
            let sol = conjugate_gradient(&system.precision, system.rhs.as_slice(), tol, max_iter)?;
            Ok(DVector::from_vec(sol.x))
        }
    }
}
