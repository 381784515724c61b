//! Closed-form dual maps and the limiting NTK.
//!
//! At criticality the infinite-width kernel of an (a,b)-ReLU network is an
//! explicit function of layer depth and the input cosine ρ₁ = cos∠(x1,x2):
//!
//! ```text
//! K_∞(x1,x2) = ‖x1‖‖x2‖ · Σ_{k=1}^{l} ϱ^{∘(k−1)}(ρ₁) · Π_{k'=k}^{l−1} ϱ'(ϱ^{∘(k'−1)}(ρ₁)) · I_{m_l}
//! ```
//!
//! where ϱ is the cosine dual map of the activation and ϱ' its derivative.
//! The module also exposes the cosine-distance view ζ(z) = (1 − ϱ(1−2z))/2
//! and the inverse-cosine-distance view ω(w) = ζ(w^{−2})^{−1/2}, whose fixed
//! point structure at w = 1 governs how fast geometry collapses with depth.

use crate::error::Error;
use crate::kernel::{NtkEntry, NtkMatrix};
use crate::mlp::MlpConfig;
use crate::numerics::matrix::{dot, norm2, Matrix};
use crate::Result;

use std::f64::consts::{FRAC_2_PI, PI};

/// Dual maps of an (a,b)-ReLU at the critical variance σ² = (a²+b²)^{−1}.
#[derive(Debug, Clone, Copy)]
pub struct DualMaps {
    a: f64,
    b: f64,
    sigma_sq: f64,
}

impl DualMaps {
    /// Maps for activation parameters (a, b); rejects a = b = 0.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "DualMaps: non-finite activation parameters ({a}, {b})"
            )));
        }
        let norm_sq = a * a + b * b;
        if norm_sq == 0.0 {
            return Err(Error::invalid("DualMaps: (a, b) = (0, 0) has no critical variance"));
        }
        Ok(Self { a, b, sigma_sq: 1.0 / norm_sq })
    }

    /// Maps matching a network configuration's activation. Delegates to
    /// [`DualMaps::new`] so that σ² = 1/(a²+b²) is the exact same float on
    /// both construction paths; squaring the config's σ = (a²+b²)^{−1/2}
    /// instead would perturb σ² by an ulp and break the exact fixed point
    /// ϱ(1) = ϱ'(1) = 1 that the diagonal kernel relies on.
    pub fn from_config(cfg: &MlpConfig) -> Self {
        Self::new(cfg.a(), cfg.b()).expect("config validated the activation parameters")
    }

    /// Δ_φ = b²/(a²+b²), the nonlinearity coefficient.
    pub fn delta_phi(&self) -> f64 {
        self.b * self.b * self.sigma_sq
    }

    fn check_rho(&self, rho: f64, what: &str) -> Result<()> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("{what}: cosine {rho} outside [−1, 1]")));
        }
        Ok(())
    }

    /// ϱ(ρ) = σ²(a²ρ + b²·(2/π)(√(1−ρ²) + ρ·arcsin ρ)).
    pub fn rho_map(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho, "rho_map")?;
        let root = ((1.0 - rho) * (1.0 + rho)).max(0.0).sqrt();
        let val = self.sigma_sq
            * (self.a * self.a * rho
                + self.b * self.b * FRAC_2_PI * (root + rho * rho.clamp(-1.0, 1.0).asin()));
        // The map sends [−1,1] into itself; clamp float spill at the ends.
        Ok(val.clamp(-1.0, 1.0))
    }

    /// ϱ'(ρ) = σ²(a² + b²·(2/π)·arcsin ρ).
    pub fn rho_prime(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho, "rho_prime")?;
        Ok(self.sigma_sq
            * (self.a * self.a + self.b * self.b * FRAC_2_PI * rho.clamp(-1.0, 1.0).asin()))
    }

    /// ζ(z) = (1 − ϱ(1 − 2z))/2, the cosine-distance dual map on [0, 1].
    pub fn zeta(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::invalid(format!("zeta: distance {z} outside [0, 1]")));
        }
        Ok((1.0 - self.rho_map((1.0 - 2.0 * z).clamp(-1.0, 1.0))?) / 2.0)
    }

    /// ω(w) = ζ(w^{−2})^{−1/2}, the inverse-cosine-distance dual map on
    /// (1, ∞); errors with a divergent-map failure if the image distance
    /// ζ(w^{−2}) collapses to zero, i.e. one layer makes the directions
    /// exactly parallel.
    pub fn omega(&self, w: f64) -> Result<f64> {
        if !w.is_finite() || w <= 1.0 {
            return Err(Error::invalid(format!("omega: argument {w} outside (1, ∞)")));
        }
        let z = (w * w).recip();
        let image = self.zeta(z)?;
        if image <= 0.0 {
            return Err(Error::NumericFailure {
                detail: format!("omega: ζ({z:.6e}) = {image:.6e}, map diverges"),
                last: image,
            });
        }
        Ok(image.sqrt().recip())
    }

    /// k-fold iterate ϱ^{∘k}(ρ); k = 0 returns ρ unchanged.
    pub fn rho_iterate(&self, rho: f64, k: usize) -> Result<f64> {
        self.check_rho(rho, "rho_iterate")?;
        let mut cur = rho;
        for _ in 0..k {
            cur = self.rho_map(cur)?;
        }
        Ok(cur)
    }

    /// Slope of ω at a point, via the closed second-derivative form
    /// ϱ''(ρ) = σ²b²·(2/π)·(1−ρ²)^{−1/2}; exposed for fixed-point analysis.
    pub fn rho_second(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho, "rho_second")?;
        let gap = (1.0 - rho) * (1.0 + rho);
        if gap <= 0.0 {
            return Err(Error::invalid(format!("rho_second: curvature diverges at ρ = {rho}")));
        }
        Ok(self.sigma_sq * self.b * self.b * FRAC_2_PI / gap.sqrt())
    }

    /// The universal ω-slope limit Δ_φ·4/(3π) approached as w ↓ 1.
    pub fn omega_slope_limit(&self) -> f64 {
        self.delta_phi() * 4.0 / (3.0 * PI)
    }
}

/// Per-entry limiting kernel K_∞(x1, x2) = τ₁τ₂·Θ_l(ρ₁)·I_{m_l} with the
/// depth sum evaluated through one suffix-product pass over the iterates.
pub fn limiting_ntk_entry(
    maps: &DualMaps,
    x1: &[f64],
    x2: &[f64],
    l: usize,
    m_l: usize,
) -> Result<NtkEntry> {
    if l < 2 {
        return Err(Error::invalid(format!("limiting_ntk_entry: depth {l} < 2")));
    }
    if m_l == 0 {
        return Err(Error::invalid("limiting_ntk_entry: zero output dimension"));
    }
    if x1.len() != x2.len() || x1.is_empty() {
        return Err(Error::invalid(format!(
            "limiting_ntk_entry: input dimensions {} and {} must match and be positive",
            x1.len(),
            x2.len()
        )));
    }
    let tau1 = norm2(x1);
    let tau2 = norm2(x2);
    if tau1 == 0.0 || tau2 == 0.0 {
        return Err(Error::DegenerateInput {
            layer: 1,
            detail: "limiting_ntk_entry: zero-norm input".into(),
        });
    }
    // Identical inputs have cosine 1 by definition; bypassing the division
    // keeps the diagonal exact (K_∞(x,x) = l·τ²·I bit for bit).
    let rho1 = if x1 == x2 {
        1.0
    } else {
        (dot(x1, x2) / (tau1 * tau2)).clamp(-1.0, 1.0)
    };

    // iterates[i] = ϱ^{∘i}(ρ₁) for i ∈ [0, l−1].
    let mut iterates = Vec::with_capacity(l);
    let mut cur = rho1;
    iterates.push(cur);
    for _ in 1..l {
        cur = maps.rho_map(cur)?;
        iterates.push(cur);
    }
    // suffix[k−1] = Π_{k'=k}^{l−1} ϱ'(ϱ^{∘(k'−1)}(ρ₁)), built from k = l down.
    let mut scalar = 0.0;
    let mut suffix = 1.0;
    for k in (1..=l).rev() {
        scalar += iterates[k - 1] * suffix;
        if k >= 2 {
            suffix *= maps.rho_prime(iterates[k - 2])?;
        }
    }
    Ok(NtkEntry {
        values: Matrix::scaled_identity(m_l, tau1 * tau2 * scalar),
    })
}

/// K_∞ over a dataset, blocks scaled by 1/n to match [`crate::kernel::ntk_matrix`].
pub fn limiting_ntk_matrix(
    maps: &DualMaps,
    points: &[Vec<f64>],
    l: usize,
    m_l: usize,
) -> Result<NtkMatrix> {
    if points.is_empty() {
        return Err(Error::invalid("limiting_ntk_matrix: empty dataset"));
    }
    let n = points.len();
    let inv_n = 1.0 / n as f64;
    let mut values = Matrix::zeros(n * m_l, n * m_l);
    for i1 in 0..n {
        for i2 in i1..n {
            let entry = limiting_ntk_entry(maps, &points[i1], &points[i2], l, m_l)?;
            let scaled = entry.values.scaled(inv_n);
            values.set_block(i1 * m_l, i2 * m_l, &scaled);
            if i1 != i2 {
                // Scalar multiples of I are symmetric; mirror directly.
                values.set_block(i2 * m_l, i1 * m_l, &scaled);
            }
        }
    }
    Ok(NtkMatrix {
        n,
        block_dim: m_l,
        values,
    })
}
