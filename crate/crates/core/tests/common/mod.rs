//! Shared helpers for the integration tests: an independent Jacobi SVD
//! oracle for spectral norms, and small floating-point comparison utilities.

#![allow(dead_code)] // not every test file uses every helper

use eoc_ntk::numerics::Matrix;

/// Largest singular value via one-sided Jacobi: rotate column pairs of a
/// working copy until all columns are mutually orthogonal, then the largest
/// column norm is σ_max. Deliberately shares no code with the library's
/// power iteration.
pub fn svd_spectral_norm(a: &Matrix) -> f64 {
    // Wide inputs have rank-deficient column sets that stall the sweep;
    // singular values are transpose-invariant, so work on the tall side.
    if a.cols() > a.rows() {
        return svd_spectral_norm(&a.transpose());
    }
    let (rows, cols) = (a.rows(), a.cols());
    let mut col: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| a.get(i, j)).collect())
        .collect();
    let mut converged = false;
    for _ in 0..60 {
        converged = true;
        for p in 0..cols {
            for r in (p + 1)..cols {
                let alpha: f64 = col[p].iter().map(|v| v * v).sum();
                let beta: f64 = col[r].iter().map(|v| v * v).sum();
                let gamma: f64 = col[p].iter().zip(&col[r]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-13 * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = col.split_at_mut(r);
                for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (xp, yr) = (*x, *y);
                    *x = c * xp - s * yr;
                    *y = s * xp + c * yr;
                }
            }
        }
        if converged {
            break;
        }
    }
    assert!(converged, "one-sided Jacobi SVD did not converge");
    col.iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// ‖a − b‖_F / max(‖a‖_F, ‖b‖_F, tiny).
pub fn rel_frobenius_diff(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.frobenius_norm().max(b.frobenius_norm()).max(1e-300);
    a.sub(b).frobenius_norm() / scale
}

/// Asserts |got − want| ≤ tol with a diagnostic naming the quantity.
pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:.15e}, want {want:.15e} (|diff| {:.3e} > {tol:.1e})",
        (got - want).abs()
    );
}

/// Asserts |got − want| ≤ tol·max(|want|, 1), a relative bound that degrades
/// to absolute near zero.
pub fn assert_rel_close(got: f64, want: f64, tol: f64, what: &str) {
    let scale = want.abs().max(1.0);
    assert!(
        (got - want).abs() <= tol * scale,
        "{what}: got {got:.15e}, want {want:.15e} (rel {:.3e} > {tol:.1e})",
        (got - want).abs() / scale
    );
}
