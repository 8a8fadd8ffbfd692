//! Small linear-algebra kernels: a CSR matrix and a conjugate gradient solver
//! over anything that can apply itself to a vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A square linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        // column-major storage: accumulate column by column
        for (j, &xj) in x.iter().enumerate().take(self.ncols()) {
            if xj == 0.0 {
                continue;
            }
            let col = self.column(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
    }
}

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of bounds for n = {n}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &w)| (i, j, w))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &w)| w * x[j]).sum();
        }
    }
}

/// `I - rho * S` without materializing it.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a> {
    pub matrix: &'a CsrMatrix,
    pub rho: f64,
}

impl LinearOperator for ShiftedOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - self.rho * *yi;
        }
    }
}

/// Result of a conjugate gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned `x`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from zero.
///
/// Stops once the relative residual `||b - A x||₂ / ||b||₂` drops to `tol`. The
/// stopping test is confirmed on the true residual; if recurrence drift leaves
/// it above `tol`, the iteration restarts from the current iterate.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let target = tol * b_norm;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;

    while iterations < max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= target {
            true_residual(a, b, &x, &mut r);
            let res = norm(&r);
            if res <= target {
                return Ok(CgSolution {
                    x,
                    iterations,
                    relative_residual: res / b_norm,
                });
            }
            // restart from the true residual
            rr = dot(&r, &r);
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }

    true_residual(a, b, &x, &mut r);
    let res = norm(&r) / b_norm;
    if res <= tol {
        return Ok(CgSolution {
            x,
            iterations,
            relative_residual: res,
        });
    }
    Err(Error::NotConverged {
        iterations,
        residual: res,
    })
}

/// Dense Cholesky solve. Fails if `a` is not positive definite.
pub fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    #[test]
    fn cg_matches_cholesky() {
        for (n, seed) in [(1, 1), (5, 2), (40, 3)] {
            let a = random_spd(n, seed);
            let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
            let direct = cholesky_solve(&a, &b).unwrap();
            let cg = conjugate_gradient(&a, b.as_slice(), 1e-12, 10 * n).unwrap();
            assert!(cg.relative_residual <= 1e-12);
            for i in 0..n {
                assert!((cg.x[i] - direct[i]).abs() < 1e-8, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = random_spd(4, 9);
        let sol = conjugate_gradient(&a, &[0.0; 4], 1e-8, 10).unwrap();
        assert_eq!(sol.x, vec![0.0; 4]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn reports_non_convergence() {
        let a = random_spd(30, 4);
        let b = vec![1.0; 30];
        match conjugate_gradient(&a, &b, 1e-14, 2) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn indefinite_matrix_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_solve(&a, &DVector::from_vec(vec![1.0, 0.0])),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn csr_roundtrip_and_matvec() {
        let m = CsrMatrix::from_triplets(3, vec![(0, 1, 2.0), (2, 0, 1.0), (0, 1, 1.0), (1, 1, 4.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 4.0, 1.0]);
        let d = m.to_dense();
        assert_eq!(d[(2, 0)], 1.0);
    }
}
