//! Krylov propagation: Lanczos tridiagonalization with full
//! reorthogonalization, a QL eigensolver for the small tridiagonal matrix,
//! and adaptive sub-stepping of `exp(-i t H)`.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit QL
/// method. `d` holds the diagonal (eigenvalues on return), `e` the
/// sub-diagonal; returns the orthogonal matrix as row-major `n x n`
/// (column `j` is the eigenvector of `d[j]`).
pub fn tridiag_eigen(d: &mut [f64], e: &mut [f64], max_sweeps: usize) -> Result<Vec<f64>> {
    let n = d.len();
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    if n <= 1 {
        return Ok(z);
    }
    // shift the sub-diagonal into positions 0..n-1 with a trailing zero
    let mut sub = vec![0.0f64; n];
    sub[..n - 1].copy_from_slice(&e[..n - 1]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a negligible sub-diagonal element
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if sub[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > max_sweeps {
                return Err(Error::Accuracy {
                    message: "tridiagonal QL iteration failed to converge".into(),
                    best: d[l],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * sub[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + sub[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * sub[i];
                let b = c * sub[i];
                r = f.hypot(g);
                sub[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    sub[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            sub[l] = g;
            sub[m] = 0.0;
        }
    }
    Ok(z)
}

/// `exp(-i dt T) e1` for the tridiagonal `T` given by `alpha` (diagonal) and
/// `beta` (sub-diagonal), via the eigensolver above.
fn expm_tridiag_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Result<Vec<Complex64>> {
    let n = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = beta.to_vec();
    e.resize(n.saturating_sub(1), 0.0);
    let z = tridiag_eigen(&mut d, &mut e, 60)?;
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        // first row of Q gives <e1, q_j>
        let phase = Complex64::from_polar(1.0, -dt * d[j]);
        let w = z[j]; // first row: <e1, q_j>
        for i in 0..n {
            y[i] += z[i * n + j] * w * phase;
        }
    }
    Ok(y)
}

/// Statistics of one propagation call.
#[derive(Debug, Clone, Copy)]
pub struct PropagationStats {
    pub substeps: usize,
    pub matvecs: usize,
    pub max_krylov_dim: usize,
}

/// Apply `exp(-i t H)` to `psi` in place, where `H` is the real-symmetric
/// operator realized by `matvec`. Adaptive sub-stepping keeps the per-step
/// Krylov residual estimate below `tol`.
pub fn krylov_propagate<F>(
    matvec: F,
    psi: &mut [Complex64],
    t: f64,
    tol: f64,
    m_max: usize,
) -> Result<PropagationStats>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let dim = psi.len();
    if t == 0.0 {
        return Ok(PropagationStats { substeps: 0, matvecs: 0, max_krylov_dim: 0 });
    }
    let m_max = m_max.max(2).min(dim);
    let mut stats = PropagationStats { substeps: 0, matvecs: 0, max_krylov_dim: 0 };
    let mut t_rem = t;
    let dir = t.signum();
    let mut dt_hint = t.abs();
    while t_rem.abs() > 1e-15 * t.abs() {
        // normalized starting vector
        let norm0 = norm(psi);
        if norm0 == 0.0 {
            return Err(Error::domain("cannot propagate the zero vector"));
        }
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m_max + 1);
        basis.push(psi.iter().map(|a| a / norm0).collect());
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let mut happy = false;
        for j in 0..m_max {
            matvec(&basis[j], &mut w);
            stats.matvecs += 1;
            if j > 0 {
                let b = beta[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= b * vi;
                }
            }
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= a * vi;
            }
            // full reorthogonalization against the stored basis
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
            let b = norm(&w);
            if b < 1e-13 {
                happy = true;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|a| a / b).collect());
        }
        let m = alpha.len();
        stats.max_krylov_dim = stats.max_krylov_dim.max(m);
        // choose the largest admissible sub-step
        let mut dt = t_rem.abs().min(dt_hint);
        let y = loop {
            let y = expm_tridiag_e1(&alpha, &beta[..m - 1], dir * dt)?;
            if happy {
                break y;
            }
            // residual estimate: weight leaking past the last basis vector
            let err = beta.last().copied().unwrap_or(0.0) * y[m - 1].norm() * dt;
            if err <= tol || dt <= 1e-12 * t.abs() {
                break y;
            }
            dt *= 0.5;
        };
        for i in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, yj) in y.iter().enumerate() {
                acc += yj * basis[j][i];
            }
            psi[i] = acc * norm0;
        }
        t_rem -= dir * dt;
        dt_hint = dt * 1.4;
        stats.substeps += 1;
        if stats.substeps > 100_000 {
            return Err(Error::Accuracy {
                message: "Krylov propagation exceeded the sub-step budget".into(),
                best: t - t_rem,
            });
        }
    }
    Ok(stats)
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
