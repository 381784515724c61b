//! Spectral norm by power iteration on A*A.

use crate::error::Error;
use crate::numerics::matrix::{norm2, Matrix};
use crate::Result;

const REL_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 10_000;

/// Largest singular value of `a`.
///
/// Power iteration on the Gram operator AᵀA (applied implicitly from the
/// shorter side), relative tolerance 1e-9, at most 10000 iterations. The
/// start vector is deterministic all-ones; a second deterministic ramp start
/// guards the case where the ones vector is orthogonal to the top singular
/// vector, and the larger converged estimate is returned.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::invalid("spectral_norm: empty matrix"));
    }
    if a.data().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    // Iterate on the side whose Gram matrix is smaller.
    let tall = a.rows() >= a.cols();
    let n = a.cols().min(a.rows());

    let ones = vec![1.0; n];
    let ramp: Vec<f64> = (0..n).map(|i| 1.0 + (i + 1) as f64 / n as f64).collect();

    let first = iterate(a, tall, ones);
    let second = iterate(a, tall, ramp);
    match (first, second) {
        (Ok(s1), Ok(s2)) => Ok(s1.max(s2)),
        (Ok(s), Err(_)) | (Err(_), Ok(s)) => Ok(s),
        (Err(e), Err(_)) => Err(e),
    }
}

/// One power-iteration run; `tall` selects which Gram side `v` lives on.
fn iterate(a: &Matrix, tall: bool, mut v: Vec<f64>) -> Result<f64> {
    let mut sigma_prev = f64::NAN;
    normalize(&mut v);
    for _ in 0..MAX_ITERS {
        let w = if tall { a.matvec(&v) } else { a.matvec_transpose(&v) };
        let sigma = norm2(&w);
        if sigma == 0.0 {
            // v landed in the null space; this start cannot make progress.
            return Err(Error::NumericFailure {
                detail: "power iteration start vector in null space".into(),
                last: 0.0,
            });
        }
        let mut next = if tall {
            a.matvec_transpose(&w)
        } else {
            a.matvec(&w)
        };
        normalize(&mut next);
        v = next;
        if (sigma - sigma_prev).abs() <= REL_TOL * sigma.max(f64::MIN_POSITIVE) {
            return Ok(sigma);
        }
        sigma_prev = sigma;
    }
    Err(Error::NumericFailure {
        detail: format!("power iteration did not converge in {MAX_ITERS} iterations"),
        last: sigma_prev,
    })
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Full eigendecomposition A = Q·diag(λ)·Qᵀ of a symmetric matrix by cyclic
/// Jacobi rotations; returns `(λ, Q)` with eigenvector `i` in column `i` of
/// `Q` (unsorted). Only the symmetric part of the input participates:
/// rotations read `(a_ij + a_ji)/2`-style symmetrized entries, so mildly
/// asymmetric float noise is harmless. Quadratic-form Monte Carlo uses this
/// to sample Gaussian vectors directly in the eigenbasis.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    assert_eq!(a.rows(), a.cols(), "symmetric_eigen: not square");
    let n = a.rows();
    let mut m = a.clone();
    // Symmetrize defensively; the algorithm then preserves symmetry exactly.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, s);
            m.set(j, i, s);
        }
    }
    let mut q = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    const SWEEPS: usize = 60;
    for _ in 0..SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if (2.0 * off).sqrt() <= 1e-14 * scale {
            let lambdas = (0..n).map(|i| m.get(i, i)).collect();
            return Ok((lambdas, q));
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m.get(p, r);
                if apr == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let arr = m.get(r, r);
                let theta = (arr - app) / (2.0 * apr);
                // Smaller-angle root keeps the rotation stable.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m.get(i, p);
                    let air = m.get(i, r);
                    m.set(i, p, c * aip - s * air);
                    m.set(i, r, s * aip + c * air);
                }
                for i in 0..n {
                    let api = m.get(p, i);
                    let ari = m.get(r, i);
                    m.set(p, i, c * api - s * ari);
                    m.set(r, i, s * api + c * ari);
                }
                for i in 0..n {
                    let qip = q.get(i, p);
                    let qir = q.get(i, r);
                    q.set(i, p, c * qip - s * qir);
                    q.set(i, r, s * qip + c * qir);
                }
            }
        }
    }
    Err(Error::NumericFailure {
        detail: format!("Jacobi eigensolver did not converge in {SWEEPS} sweeps"),
        last: f64::NAN,
    })
}

/// Smallest eigenvalue estimate for a symmetric matrix, via power iteration
/// on the shifted operator `‖A‖·I − A`. Used to check positive
/// semidefiniteness of kernel matrices.
pub fn min_eigenvalue_symmetric(a: &Matrix) -> Result<f64> {
    assert_eq!(a.rows(), a.cols(), "min_eigenvalue_symmetric: not square");
    let shift = spectral_norm(a)?;
    if shift == 0.0 {
        return Ok(0.0);
    }
    let n = a.rows();
    let mut shifted = a.scaled(-1.0);
    for i in 0..n {
        let v = shifted.get(i, i);
        shifted.set(i, i, v + shift);
    }
    // ‖shift·I − A‖ = shift − λ_min for symmetric A with ‖A‖ = shift.
    let top = spectral_norm(&shifted)?;
    Ok(shift - top)
}
