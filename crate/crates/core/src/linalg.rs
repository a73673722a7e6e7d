//! Sparse linear algebra for the finite-volume solvers: a tridiagonal solver,
//! a compressed-row matrix, and preconditioned conjugate gradients.

use crate::error::{Error, Result};

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i` to `i-1` (`lower[0]` unused) and `upper[i]`
/// couples row `i` to `i+1` (last entry unused).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::Domain("tridiagonal bands must have equal length".into()));
    }
    let mut x = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    thomas_in_place(lower, diag, upper, rhs, &mut x, &mut scratch)?;
    Ok(x)
}

fn thomas_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    c: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Numeric("zero pivot in tridiagonal solve".into()));
    }
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Numeric(format!("zero pivot in tridiagonal solve at row {i}")));
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(())
}

/// Square matrix in compressed sparse row format.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of range for n = {n}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    /// `self + diag(d)` with the same sparsity pattern plus the diagonal.
    pub fn add_diagonal(&self, d: &[f64]) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                trip.push((i, j, v));
            }
            trip.push((i, i, d[i]));
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    /// `a * self + diag(d)`.
    pub fn scaled_plus_diagonal(&self, a: f64, d: &[f64]) -> CsrMatrix {
        let mut m = self.add_diagonal(&vec![0.0; self.n]);
        for v in m.values.iter_mut() {
            *v *= a;
        }
        for i in 0..self.n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                if m.col_idx[k] == i {
                    m.values[k] += d[i];
                }
            }
        }
        m
    }
}

/// Preconditioner for [`pcg`].
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Jacobi,
    /// Block Jacobi over chains of unknowns; each chain is solved exactly with
    /// the tridiagonal part of the matrix restricted to it. The chains must
    /// partition the unknowns.
    Lines(Vec<Vec<usize>>),
}

enum Prepared {
    Jacobi(Vec<f64>),
    Lines { lines: Vec<Vec<usize>>, lower: Vec<Vec<f64>>, diag: Vec<Vec<f64>>, upper: Vec<Vec<f64>> },
}

impl Prepared {
    fn new(a: &CsrMatrix, p: &Preconditioner) -> Result<Self> {
        match p {
            Preconditioner::Jacobi => {
                let d = a.diagonal();
                if d.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Numeric("non-positive diagonal entry".into()));
                }
                Ok(Prepared::Jacobi(d.iter().map(|v| 1.0 / v).collect()))
            }
            Preconditioner::Lines(lines) => {
                let count: usize = lines.iter().map(Vec::len).sum();
                if count != a.n() {
                    return Err(Error::Domain(format!(
                        "line preconditioner covers {count} of {} unknowns",
                        a.n()
                    )));
                }
                let mut lower = Vec::with_capacity(lines.len());
                let mut diag = Vec::with_capacity(lines.len());
                let mut upper = Vec::with_capacity(lines.len());
                for line in lines {
                    let m = line.len();
                    let (mut l, mut d, mut u) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
                    for k in 0..m {
                        d[k] = a.get(line[k], line[k]);
                        if k > 0 {
                            l[k] = a.get(line[k], line[k - 1]);
                        }
                        if k + 1 < m {
                            u[k] = a.get(line[k], line[k + 1]);
                        }
                    }
                    lower.push(l);
                    diag.push(d);
                    upper.push(u);
                }
                Ok(Prepared::Lines { lines: lines.clone(), lower, diag, upper })
            }
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64], buf: &mut Vec<f64>) -> Result<()> {
        match self {
            Prepared::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
            Prepared::Lines { lines, lower, diag, upper } => {
                for (k, line) in lines.iter().enumerate() {
                    let m = line.len();
                    buf.resize(3 * m, 0.0);
                    let (rhs, rest) = buf.split_at_mut(m);
                    let (x, c) = rest.split_at_mut(m);
                    for (s, &i) in line.iter().enumerate() {
                        rhs[s] = r[i];
                    }
                    thomas_in_place(&lower[k], &diag[k], &upper[k], rhs, x, c)?;
                    for (s, &i) in line.iter().enumerate() {
                        z[i] = x[s];
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// system. `x` holds the initial guess and receives the solution. Stops when
/// `|b - A x| <= rel_tol |b|`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &Preconditioner,
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let n = a.n();
    if b.len() != n || x.len() != n {
        return Err(Error::Domain("pcg: dimension mismatch".into()));
    }
    let prep = Prepared::new(a, precond)?;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    let mut buf = Vec::new();
    prep.apply(&r, &mut z, &mut buf)?;
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= rel_tol {
            return Ok(CgStats { iterations: it, relative_residual: res });
        }
        a.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Numeric(format!("pcg breakdown at iteration {it}: p.Ap = {pq}")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        prep.apply(&r, &mut z, &mut buf)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= rel_tol {
        return Ok(CgStats { iterations: max_iter, relative_residual: res });
    }
    Err(Error::Numeric(format!(
        "pcg did not converge in {max_iter} iterations (relative residual {res:.3e})"
    )))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solution() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0 discretized; exact nodal values x(1-x)/2
        let n = 49;
        let h = 1.0 / (n + 1) as f64;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.0; n];
        let rhs = vec![h * h; n];
        let u = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (i, ui) in u.iter().enumerate() {
            let x = (i + 1) as f64 * h;
            assert!((ui - 0.5 * x * (1.0 - x)).abs() < 1e-13);
        }
        assert!(solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
    }

    fn laplacian_2d(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0 + 0.01));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, t)
    }

    #[test]
    fn pcg_solves_model_problem_with_both_preconditioners() {
        let m = 30;
        let a = laplacian_2d(m);
        let exact: Vec<f64> = (0..m * m).map(|k| ((k * 7) % 13) as f64 - 6.0).collect();
        let mut b = vec![0.0; m * m];
        a.mul_vec(&exact, &mut b);
        let lines: Vec<Vec<usize>> = (0..m).map(|i| (0..m).map(|j| i * m + j).collect()).collect();
        let mut iters = Vec::new();
        for p in [Preconditioner::Jacobi, Preconditioner::Lines(lines)] {
            let mut x = vec![0.0; m * m];
            let stats = pcg(&a, &b, &mut x, &p, 1e-12, 2000).unwrap();
            let err = x.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{p:?}: {err}");
            iters.push(stats.iterations);
        }
        assert!(iters[1] < iters[0]);
    }

    #[test]
    fn csr_accumulates_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (1, 1, 5.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        let b = a.scaled_plus_diagonal(2.0, &[1.0, 1.0]);
        assert_eq!(b.get(0, 0), 7.0);
        assert_eq!(b.get(0, 1), 0.0);
        assert_eq!(b.get(1, 0), -2.0);
        assert_eq!(b.get(1, 1), 11.0);
    }
}
