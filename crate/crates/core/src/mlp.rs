//! MLP configuration, EOC initialization, and the traced forward pass.
//!
//! The network has depth `l ≥ 2`, widths m_0 (input), m_k = γ_k·m for the
//! hidden layers k ∈ [1, l−1], and m_l (output). With the (a,b)-ReLU
//! activation φ(s) = a·s + b·|s| and the edge-of-chaos scale
//! σ = (a²+b²)^{−1/2}, layer matrices are initialized A_k ~ N(0, σ²·m^{−q})
//! entrywise and the forward recursion is
//!
//! ```text
//! N_k = m^{q/2} · A_k · x_k,     x_{k+1} = m_k^{−1/2} · φ(N_k),
//! x_1 = input,                   output = A_l · x_l .
//! ```
//!
//! The traced forward pass also records x'_{k+1} = m_k^{−1/2}·φ'(N_k), the
//! diagonal of every backpropagation matrix, and per-layer norms τ_k = ‖x_k‖.

use crate::error::Error;
use crate::numerics::matrix::{dot, norm2, Matrix};
use crate::numerics::rng::{gaussian_matrix, Rng};
use crate::Result;

/// (a,b)-ReLU: φ(s) = a·s + b·|s|.
#[inline(always)]
pub fn phi(s: f64, a: f64, b: f64) -> f64 {
    a * s + b * s.abs()
}

/// φ'(s) = a + b·sgn(s), with sgn(0) = 0 so that φ'(0) = a exactly.
#[inline(always)]
pub fn phi_prime(s: f64, a: f64, b: f64) -> f64 {
    a + b * sign(s)
}

#[inline(always)]
fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Architecture and activation hyperparameters, with derived constants.
#[derive(Debug, Clone)]
pub struct MlpConfig {
    l: usize,
    m: usize,
    gammas: Vec<usize>,
    q: f64,
    a: f64,
    b: f64,
    sigma: f64,
    delta_phi: f64,
    kappa_phi: f64,
    /// Materialized widths m_0..m_l (length l+1).
    widths: Vec<usize>,
}

impl MlpConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        l: usize,
        m0: usize,
        m_out: usize,
        m: usize,
        gammas: Vec<usize>,
        q: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        if l < 2 {
            return Err(Error::invalid(format!("depth l must be ≥ 2, got {l}")));
        }
        if m0 < 1 || m_out < 1 || m < 1 {
            return Err(Error::invalid(format!(
                "dimensions must be ≥ 1 (m0={m0}, m_l={m_out}, m={m})"
            )));
        }
        if gammas.len() != l - 1 {
            return Err(Error::invalid(format!(
                "need l−1 = {} width factors, got {}",
                l - 1,
                gammas.len()
            )));
        }
        if gammas.iter().any(|&g| g < 1) {
            return Err(Error::invalid("width factors must be ≥ 1"));
        }
        if a == 0.0 && b == 0.0 {
            return Err(Error::invalid("(a,b) = (0,0) has no EOC scale"));
        }
        if !q.is_finite() || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("q, a, b must be finite"));
        }
        let norm_sq = a * a + b * b;
        let mut widths = Vec::with_capacity(l + 1);
        widths.push(m0);
        for &g in &gammas {
            widths.push(g * m);
        }
        widths.push(m_out);
        Ok(MlpConfig {
            l,
            m,
            gammas,
            q,
            a,
            b,
            sigma: norm_sq.powf(-0.5),
            delta_phi: b * b / norm_sq,
            kappa_phi: (a.abs() + b.abs()) / norm_sq.sqrt(),
            widths,
        })
    }

    pub fn depth(&self) -> usize {
        self.l
    }

    pub fn width_base(&self) -> usize {
        self.m
    }

    pub fn gammas(&self) -> &[usize] {
        &self.gammas
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    pub fn kappa_phi(&self) -> f64 {
        self.kappa_phi
    }

    /// Width m_k for k ∈ [0, l].
    pub fn width(&self, k: usize) -> usize {
        self.widths[k]
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.l]
    }

    /// Entry standard deviation of every A_k: σ·m^{−q/2}.
    pub fn layer_std(&self) -> f64 {
        self.sigma * (self.m as f64).powf(-0.5 * self.q)
    }

    /// The pre-activation scale m^{q/2} applied ahead of each A_k.
    pub fn pre_scale(&self) -> f64 {
        (self.m as f64).powf(0.5 * self.q)
    }

    pub fn phi(&self, s: f64) -> f64 {
        phi(s, self.a, self.b)
    }

    pub fn phi_prime(&self, s: f64) -> f64 {
        phi_prime(s, self.a, self.b)
    }

    /// Total parameter count Σ_k m_k·m_{k−1}.
    pub fn parameter_count(&self) -> usize {
        (1..=self.l)
            .map(|k| self.widths[k] * self.widths[k - 1])
            .sum()
    }
}

/// The layer matrices A_1..A_l.
#[derive(Debug, Clone)]
pub struct Parameter {
    layers: Vec<Matrix>,
}

impl Parameter {
    pub fn from_layers(cfg: &MlpConfig, layers: Vec<Matrix>) -> Result<Self> {
        if layers.len() != cfg.depth() {
            return Err(Error::invalid(format!(
                "expected {} layer matrices, got {}",
                cfg.depth(),
                layers.len()
            )));
        }
        for (k, a) in layers.iter().enumerate() {
            let (want_r, want_c) = (cfg.width(k + 1), cfg.width(k));
            if a.rows() != want_r || a.cols() != want_c {
                return Err(Error::invalid(format!(
                    "layer {} must be {}x{}, got {}x{}",
                    k + 1,
                    want_r,
                    want_c,
                    a.rows(),
                    a.cols()
                )));
            }
            if !a.is_finite() {
                return Err(Error::invalid(format!("layer {} has non-finite entries", k + 1)));
            }
        }
        Ok(Parameter { layers })
    }

    /// A_k, 1-based.
    pub fn layer(&self, k: usize) -> &Matrix {
        &self.layers[k - 1]
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    /// The first l−1 layers — everything except the output matrix A_l.
    pub fn head(&self) -> &[Matrix] {
        &self.layers[..self.layers.len() - 1]
    }
}

/// EOC-scaled Gaussian initialization; layer k draws from child stream k of
/// the seed, so layers are independent and the whole parameter is a pure
/// function of `(cfg, seed)`.
pub fn init_parameter(cfg: &MlpConfig, seed: u64) -> Parameter {
    let root = Rng::new(seed);
    let std = cfg.layer_std();
    let layers = (1..=cfg.depth())
        .map(|k| {
            gaussian_matrix(&root.child(k as u64), cfg.width(k), cfg.width(k - 1), std)
                .expect("config widths are validated positive")
        })
        .collect();
    Parameter { layers }
}

/// Per-layer record of one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// x_1..x_l; x_1 is the input, x_k ∈ R^{m_{k−1}} for k ≥ 2.
    activations: Vec<Vec<f64>>,
    /// N_1..N_{l−1}.
    preactivations: Vec<Vec<f64>>,
    /// x'_2..x'_l with entries m_{k−1}^{−1/2}·φ'(N_{k−1}).
    derivative_vectors: Vec<Vec<f64>>,
    /// τ_1..τ_l with τ_k = ‖x_k‖.
    norms: Vec<f64>,
    /// A_l·x_l ∈ R^{m_l}.
    output: Vec<f64>,
}

impl ForwardTrace {
    /// x_k, 1-based, k ∈ [1, l].
    pub fn activation(&self, k: usize) -> &[f64] {
        &self.activations[k - 1]
    }

    /// N_k, 1-based, k ∈ [1, l−1].
    pub fn preactivation(&self, k: usize) -> &[f64] {
        &self.preactivations[k - 1]
    }

    /// x'_k, 1-based, k ∈ [2, l].
    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivative_vectors[k - 2]
    }

    /// τ_k = ‖x_k‖, 1-based.
    pub fn norm(&self, k: usize) -> f64 {
        self.norms[k - 1]
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn depth(&self) -> usize {
        self.activations.len()
    }
}

/// Layerwise forward pass recording activations, preactivations, derivative
/// vectors, and norms.
pub fn forward(cfg: &MlpConfig, theta: &Parameter, x: &[f64]) -> Result<ForwardTrace> {
    if x.len() != cfg.input_dim() {
        return Err(Error::invalid(format!(
            "forward: input has dimension {}, config wants {}",
            x.len(),
            cfg.input_dim()
        )));
    }
    let l = cfg.depth();
    let pre_scale = cfg.pre_scale();
    let mut activations = Vec::with_capacity(l);
    let mut preactivations = Vec::with_capacity(l - 1);
    let mut derivative_vectors = Vec::with_capacity(l - 1);
    let mut norms = Vec::with_capacity(l);

    activations.push(x.to_vec());
    norms.push(norm2(x));
    for k in 1..l {
        let n_k: Vec<f64> = theta
            .layer(k)
            .matvec(activations.last().expect("nonempty"))
            .into_iter()
            .map(|v| pre_scale * v)
            .collect();
        let inv_sqrt_width = (cfg.width(k) as f64).powf(-0.5);
        let x_next: Vec<f64> = n_k.iter().map(|&s| inv_sqrt_width * cfg.phi(s)).collect();
        let x_prime: Vec<f64> = n_k
            .iter()
            .map(|&s| inv_sqrt_width * cfg.phi_prime(s))
            .collect();
        norms.push(norm2(&x_next));
        preactivations.push(n_k);
        derivative_vectors.push(x_prime);
        activations.push(x_next);
    }
    let output = theta.layer(l).matvec(activations.last().expect("nonempty"));
    Ok(ForwardTrace {
        activations,
        preactivations,
        derivative_vectors,
        norms,
        output,
    })
}

/// Layerwise inner products, cosines, and cosine-distance transforms for a
/// pair of traces.
#[derive(Debug, Clone)]
pub struct PairStats {
    inner_products: Vec<f64>,
    cosines: Vec<f64>,
    cosine_distances: Vec<f64>,
    inverse_cosine_distances: Vec<Option<f64>>,
}

impl PairStats {
    /// X_k = ⟨x_k(x1), x_k(x2)⟩, 1-based.
    pub fn inner_product(&self, k: usize) -> f64 {
        self.inner_products[k - 1]
    }

    /// ρ_k, clamped to [−1, 1].
    pub fn cosine(&self, k: usize) -> f64 {
        self.cosines[k - 1]
    }

    /// z_k = (1−ρ_k)/2.
    pub fn cosine_distance(&self, k: usize) -> f64 {
        self.cosine_distances[k - 1]
    }

    /// w_k = z_k^{−1/2}; `None` when z_k = 0 (parallel activations).
    pub fn inverse_cosine_distance(&self, k: usize) -> Option<f64> {
        self.inverse_cosine_distances[k - 1]
    }

    pub fn depth(&self) -> usize {
        self.inner_products.len()
    }
}

/// Pairwise statistics for two traces of the same network. Fails with a
/// layer-naming error if either trace has a zero-norm activation, since the
/// cosine is undefined there.
pub fn pair_stats(t1: &ForwardTrace, t2: &ForwardTrace) -> Result<PairStats> {
    assert_eq!(t1.depth(), t2.depth(), "pair_stats: traces of different depth");
    let l = t1.depth();
    let mut inner_products = Vec::with_capacity(l);
    let mut cosines = Vec::with_capacity(l);
    let mut cosine_distances = Vec::with_capacity(l);
    let mut inverse_cosine_distances = Vec::with_capacity(l);
    for k in 1..=l {
        let (tau1, tau2) = (t1.norm(k), t2.norm(k));
        if tau1 <= 0.0 || tau2 <= 0.0 {
            return Err(Error::DegenerateInput {
                layer: k,
                detail: format!("zero-norm activation (τ_k = {:.3e}, {:.3e})", tau1, tau2),
            });
        }
        let x_k = dot(t1.activation(k), t2.activation(k));
        let rho = (x_k / (tau1 * tau2)).clamp(-1.0, 1.0);
        let z = (1.0 - rho) / 2.0;
        inner_products.push(x_k);
        cosines.push(rho);
        cosine_distances.push(z);
        inverse_cosine_distances.push(if z > 0.0 { Some(z.powf(-0.5)) } else { None });
    }
    Ok(PairStats {
        inner_products,
        cosines,
        cosine_distances,
        inverse_cosine_distances,
    })
}
