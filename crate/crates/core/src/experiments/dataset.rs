//! Datasets: point collections with the geometric validation the kernel
//! concentration theory assumes (no parallel data points).

use crate::error::Error;
use crate::numerics::matrix::{dot, norm2};
use crate::numerics::rng::Rng;
use crate::Result;

/// Threshold for "parallel": pairs with |ρ₁| ≥ 1 − 1e-9 are rejected by
/// [`Dataset::validate_no_parallel`].
pub const PARALLEL_TOL: f64 = 1e-9;

/// A finite set of input points of common dimension, optionally labelled.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("Dataset: need at least one point"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("Dataset: zero-dimensional points"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "Dataset: point {} has dimension {}, expected {}",
                    i,
                    p.len(),
                    dim
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("Dataset: point {i} has non-finite entries")));
            }
        }
        Ok(Dataset { points, names: None })
    }

    pub fn with_names(points: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if names.len() != points.len() {
            return Err(Error::invalid(format!(
                "Dataset: {} names for {} points",
                names.len(),
                points.len()
            )));
        }
        let mut ds = Dataset::new(points)?;
        ds.names = Some(names);
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// τ̄ = max_i ‖x_i‖.
    pub fn tau_bar(&self) -> f64 {
        self.points.iter().map(|p| norm2(p)).fold(0.0, f64::max)
    }

    /// ρ₁(x_i, x_j); errors on zero-norm points.
    pub fn cosine(&self, i: usize, j: usize) -> Result<f64> {
        let (ni, nj) = (norm2(&self.points[i]), norm2(&self.points[j]));
        if ni == 0.0 || nj == 0.0 {
            return Err(Error::DegenerateInput {
                layer: 1,
                detail: format!("zero-norm dataset point ({i} or {j})"),
            });
        }
        Ok((dot(&self.points[i], &self.points[j]) / (ni * nj)).clamp(-1.0, 1.0))
    }

    /// Asserts the no-parallel-points hypothesis: |ρ₁(x_i, x_j)| < 1 − 1e-9
    /// for every pair i ≠ j, and no zero points.
    pub fn validate_no_parallel(&self) -> Result<()> {
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                let rho = self.cosine(i, j)?;
                if rho.abs() >= 1.0 - PARALLEL_TOL {
                    return Err(Error::invalid(format!(
                        "Dataset: points {i} and {j} are parallel (|ρ₁| = {:.12})",
                        rho.abs()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Appends the coordinate β > 0 to every point. Points that were parallel
/// but not equal become non-parallel; equal points stay equal.
pub fn lift_dataset(ds: &Dataset, beta: f64) -> Result<Dataset> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::invalid(format!("lift_dataset: β must be positive, got {beta}")));
    }
    let points = ds
        .points
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.push(beta);
            q
        })
        .collect();
    Ok(Dataset {
        points,
        names: ds.names.clone(),
    })
}

/// n i.i.d. uniform directions on the sphere of the given radius (Gaussian
/// draws normalized), from a dedicated child stream per point.
pub fn synth_sphere(rng: &Rng, n: usize, dim: usize, radius: f64) -> Result<Dataset> {
    if n == 0 || dim == 0 {
        return Err(Error::invalid(format!("synth_sphere: need n ≥ 1, dim ≥ 1 (n={n}, dim={dim})")));
    }
    if radius <= 0.0 || !radius.is_finite() {
        return Err(Error::invalid(format!("synth_sphere: radius must be positive, got {radius}")));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let stream = rng.child(i as u64);
        let z: Vec<f64> = (0..dim).map(|e| stream.normal_at(e as u64)).collect();
        let nz = norm2(&z);
        if nz == 0.0 {
            return Err(Error::DegenerateInput {
                layer: 1,
                detail: format!("synth_sphere: zero Gaussian draw for point {i}"),
            });
        }
        points.push(z.iter().map(|&v| v * radius / nz).collect());
    }
    Dataset::new(points)
}

/// Two unit vectors with inner product exactly cos(angle): e₁ and
/// cos(angle)·e₁ + sin(angle)·e₂.
pub fn synth_pair(angle: f64, dim: usize) -> Result<Dataset> {
    if dim < 2 {
        return Err(Error::invalid(format!("synth_pair: need dim ≥ 2, got {dim}")));
    }
    if !(angle > 0.0 && angle < std::f64::consts::PI) {
        return Err(Error::invalid(format!("synth_pair: angle {angle} outside (0, π)")));
    }
    let mut p1 = vec![0.0; dim];
    p1[0] = 1.0;
    let mut p2 = vec![0.0; dim];
    p2[0] = angle.cos();
    p2[1] = angle.sin();
    Dataset::new(vec![p1, p2])
}
