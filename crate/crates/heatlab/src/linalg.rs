//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of the symmetric-definite pencil `A v = λ B v`, eigenvalues ascending,
/// eigenvectors B-orthonormal (columns).
pub struct GenEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_gen_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GenEigen> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Empty("eigenproblem"));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("cholesky factor".into()))?;
    let mut c = &linv * a * linv.transpose();
    symmetrize(&mut c);
    let eig = nalgebra::SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    let back = linv.transpose();
    for (k, &i) in order.iter().enumerate() {
        let v = &back * eig.eigenvectors.column(i);
        vectors.set_column(k, &v);
    }
    Ok(GenEigen { values, vectors })
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm > 0.25 {
        squarings = (norm / 0.25).log2().ceil() as u32;
    }
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-18 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))
}

pub fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))
}

/// Outcome of `min Σ x_j` subject to `G x ≥ h`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    /// Row index of a constraint no nonnegative `x` can satisfy.
    Infeasible { row: usize },
}

/// Small covering LP solved through its dual `max hᵀy, Gᵀy ≤ 1, y ≥ 0`
/// with a dense tableau simplex and Bland's rule.
pub fn covering_lp(g: &[Vec<f64>], h: &[f64]) -> LpOutcome {
    let m = g.len();
    let k = g.first().map_or(0, |r| r.len());
    if m == 0 || h.iter().all(|&v| v <= 0.0) {
        return LpOutcome::Optimal { x: vec![0.0; k], value: 0.0 };
    }
    // Columns: y_0..y_{m-1}, slack_0..slack_{k-1}, rhs.
    let cols = m + k + 1;
    let mut t = vec![vec![0.0; cols]; k + 1];
    for j in 0..k {
        for i in 0..m {
            t[j][i] = g[i][j];
        }
        t[j][m + j] = 1.0;
        t[j][cols - 1] = 1.0;
    }
    for i in 0..m {
        t[k][i] = -h[i];
    }
    let mut basis: Vec<usize> = (0..k).map(|j| m + j).collect();
    let tol = 1e-12 * h.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    for _ in 0..10_000 {
        let Some(enter) = (0..m + k).find(|&c| t[k][c] < -tol) else { break };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..k {
            if t[r][enter] > 1e-14 {
                let ratio = t[r][cols - 1] / t[r][enter];
                let better = ratio < best - 1e-15
                    || (ratio <= best + 1e-15 && leave.is_some_and(|l| basis[r] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(r) = leave else {
            let row = if enter < m { enter } else { 0 };
            return LpOutcome::Infeasible { row };
        };
        let p = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[r].clone();
        for (rr, row) in t.iter_mut().enumerate() {
            if rr != r {
                let f = row[enter];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        basis[r] = enter;
    }
    let x: Vec<f64> = (0..k).map(|j| t[k][m + j].max(0.0)).collect();
    LpOutcome::Optimal { value: t[k][cols - 1], x }
}
