//! Dense and Krylov eigensolvers.
//!
//! The spin Hamiltonians are real symmetric in the up/down basis, so both
//! solvers work in real arithmetic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::SpinOperator;

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Sweeps run in fixed row-major pair order until
/// the off-diagonal Frobenius norm drops below `off_tol * max(1, ‖A‖_F)`.
pub fn jacobi_eigh(a: &DMatrix<f64>, off_tol: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);
    let off = |m: &DMatrix<f64>| {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&m) <= off_tol * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues (ascending) of a complex Hermitian matrix via its real
/// symmetric embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is that of the
/// input with every eigenvalue doubled.
pub fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let n = h.nrows();
    if n == 1 {
        return vec![h[(0, 0)].re];
    }
    let emb = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (values, _) = jacobi_eigh(&emb, 1e-14);
    values.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// Symmetric tridiagonal eigenproblem from Lanczos coefficients.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in against {
            let p = dot(v, w);
            axpy(-p, v, w);
        }
    }
}

fn normalize(w: &mut [f64]) -> f64 {
    let n = dot(w, w).sqrt();
    if n > 0.0 {
        w.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Maximum Krylov dimension before a restart.
    pub max_krylov: usize,
    /// Residual tolerance, relative to `max(1, |θ|)`.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_krylov: 200,
            tol: 1e-10,
            max_restarts: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖H x - θ x‖`, recomputed explicitly.
    pub residual: f64,
}

/// One Lanczos pass with full reorthogonalization. Every few iterations
/// `done(ritz values, ritz coefficients, β)` decides whether to stop.
fn lanczos_pass(
    op: &SpinOperator,
    start: &[f64],
    deflate: &[Vec<f64>],
    max_krylov: usize,
    mut done: impl FnMut(&[f64], &DMatrix<f64>, f64) -> bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, DMatrix<f64>)> {
    let dim = op.dim();
    let mut v0 = start.to_vec();
    orthogonalize(&mut v0, deflate);
    if normalize(&mut v0) == 0.0 {
        return Err(Error::InvalidInput(
            "Lanczos start vector lies in the deflated space".into(),
        ));
    }
    let room = dim.saturating_sub(deflate.len()).max(1);
    let max_krylov = max_krylov.min(room);
    let mut basis = vec![v0];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    loop {
        let m = basis.len() - 1;
        op.apply(&basis[m], &mut w)?;
        let a = dot(&basis[m], &w);
        alpha.push(a);
        axpy(-a, &basis[m], &mut w);
        if m > 0 {
            axpy(-beta[m - 1], &basis[m - 1], &mut w);
        }
        orthogonalize(&mut w, deflate);
        orthogonalize(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        let exhausted = basis.len() >= max_krylov || b <= 1e-13 * (1.0 + a.abs());
        if exhausted || basis.len() % 5 == 0 {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
            if exhausted || done(&vals, &vecs, b) {
                return Ok((basis, vals, vecs));
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

fn ritz_vector(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; basis[0].len()];
    for (v, &c) in basis.iter().zip(coeffs) {
        axpy(c, v, &mut x);
    }
    normalize(&mut x);
    x
}

fn residual(op: &SpinOperator, x: &[f64], theta: f64) -> Result<f64> {
    let mut hx = vec![0.0; x.len()];
    op.apply(x, &mut hx)?;
    axpy(-theta, x, &mut hx);
    Ok(dot(&hx, &hx).sqrt())
}

/// Lowest eigenpair of `op` in the orthogonal complement of `deflate`
/// (which must hold orthonormal eigenvectors).
pub fn lowest_eigenpair(
    op: &SpinOperator,
    start: &[f64],
    deflate: &[Vec<f64>],
    opts: LanczosOptions,
) -> Result<Eigenpair> {
    let mut start = start.to_vec();
    let mut last_residual = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..=opts.max_restarts {
        let (basis, vals, vecs) =
            lanczos_pass(op, &start, deflate, opts.max_krylov, |vals, vecs, b| {
                let m = vals.len();
                b * vecs[(m - 1, 0)].abs() < 0.1 * opts.tol * vals[0].abs().max(1.0)
            })?;
        iterations += basis.len();
        let coeffs: Vec<f64> = vecs.column(0).iter().copied().collect();
        let mut x = ritz_vector(&basis, &coeffs);
        orthogonalize(&mut x, deflate);
        normalize(&mut x);
        let theta = vals[0];
        let r = residual(op, &x, theta)?;
        if r < opts.tol * theta.abs().max(1.0) {
            return Ok(Eigenpair {
                value: theta,
                vector: x,
                residual: r,
            });
        }
        last_residual = r;
        start = x;
    }
    Err(Error::LanczosNotConverged {
        iterations,
        residual: last_residual,
    })
}

/// Deflated runs stop here; larger ground levels are reported as errors.
pub const MAX_GROUND_DEGENERACY: usize = 64;

/// Ground eigenvalue cluster and the first level above it.
#[derive(Debug, Clone)]
pub struct LowSpectrum {
    /// Orthonormal eigenvectors spanning the (possibly degenerate) ground level.
    pub ground: Vec<Eigenpair>,
    /// Lowest eigenpair outside the ground level, if the space has one.
    pub excited: Option<Eigenpair>,
}

/// Finds the ground level by repeated deflated Lanczos runs; a level counts
/// as degenerate when energies agree within `degeneracy_tol * max(1, |E0|)`.
pub fn low_spectrum(
    op: &SpinOperator,
    mut next_start: impl FnMut() -> Vec<f64>,
    degeneracy_tol: f64,
    opts: LanczosOptions,
) -> Result<LowSpectrum> {
    let first = lowest_eigenpair(op, &next_start(), &[], opts)?;
    let e0 = first.value;
    let mut ground = vec![first];
    loop {
        if ground.len() >= op.dim() {
            return Ok(LowSpectrum {
                ground,
                excited: None,
            });
        }
        if ground.len() >= MAX_GROUND_DEGENERACY {
            return Err(Error::InvalidInput(format!(
                "ground level degeneracy exceeds {MAX_GROUND_DEGENERACY}"
            )));
        }
        let deflate: Vec<Vec<f64>> = ground.iter().map(|p| p.vector.clone()).collect();
        let next = lowest_eigenpair(op, &next_start(), &deflate, opts)?;
        if (next.value - e0).abs() <= degeneracy_tol * e0.abs().max(1.0) {
            ground.push(next);
        } else {
            return Ok(LowSpectrum {
                ground,
                excited: Some(next),
            });
        }
    }
}

/// Extremal Ritz values after at most `steps` Lanczos iterations, each
/// widened by its explicit residual: `(lower, upper)`.
pub fn extremal_ritz_bounds(op: &SpinOperator, start: &[f64], steps: usize) -> Result<(f64, f64)> {
    let (basis, vals, vecs) = lanczos_pass(op, start, &[], steps, |vals, vecs, b| {
        let m = vals.len();
        let scale = vals[0].abs().max(vals[m - 1].abs()).max(1.0);
        b * vecs[(m - 1, 0)].abs() < 1e-8 * scale && b * vecs[(m - 1, m - 1)].abs() < 1e-8 * scale
    })?;
    let m = basis.len();
    let mut w = vec![0.0; op.dim()];
    let mut widen = |col: usize| -> Result<f64> {
        let coeffs: Vec<f64> = vecs.column(col).iter().copied().collect();
        let x = ritz_vector(&basis, &coeffs);
        op.apply(&x, &mut w)?;
        axpy(-vals[col], &x, &mut w);
        Ok(dot(&w, &w).sqrt())
    };
    let lo = vals[0] - widen(0)?;
    let hi = vals[m - 1] + widen(m - 1)?;
    Ok((lo, hi))
}

/// Dense symmetric eigendecomposition (ascending), for oracle-sized problems.
pub fn dense_symmetric_eigen(h: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
