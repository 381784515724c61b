//! Backpropagation matrices and the empirical NTK.
//!
//! For traces of two inputs the NTK entry is computed from the layerwise
//! decomposition
//!
//! ```text
//! K_θ(x1,x2) = σ^{−2} Σ_{k=1}^{l−1} m^{q} X_k · (A_l B_{k+1,l}(x1)) (A_l B_{k+1,l}(x2))* + X_l·I
//! ```
//!
//! with B_{k1,k2} = σ·D_{x'_{k2}}·(m^{q/2}A_{k2−1})·D_{x'_{k2−1}} ⋯
//! (m^{q/2}A_{k1})·D_{x'_{k1}} and X_k = ⟨x_k(x1), x_k(x2)⟩. Since the
//! formula only ever consumes A_l·B_{k+1,l}, `ntk_entry` runs one backward
//! sweep over the chain already projected by A_l (cost comparable to a
//! forward pass per m_l output row); the unprojected sweep that materializes
//! every B_{k,l} feeds the expectation formula and the diagnostic matrix.
//! `ntk_entry_via_jacobian` is the independent ground-truth path: it
//! materializes each layer's dense Jacobian block and sums raw Gram products.

use crate::error::Error;
use crate::mlp::{forward, ForwardTrace, MlpConfig, Parameter};
use crate::numerics::matrix::{dot, Matrix};
use crate::Result;

/// Default element budget for a single dense Jacobian block.
pub const DEFAULT_JACOBIAN_BUDGET: usize = 100_000_000;

/// B_{k1,k2} with its index pair.
#[derive(Debug, Clone)]
pub struct BackpropMatrix {
    pub k1: usize,
    pub k2: usize,
    /// Shape m_{k2−1} × m_{k1−1}.
    pub values: Matrix,
}

/// One m_l × m_l kernel block K_θ(x1,x2).
#[derive(Debug, Clone)]
pub struct NtkEntry {
    pub values: Matrix,
}

/// The n·m_l × n·m_l kernel matrix with the 1/n block normalization.
#[derive(Debug, Clone)]
pub struct NtkMatrix {
    pub n: usize,
    pub block_dim: usize,
    pub values: Matrix,
}

impl NtkMatrix {
    /// Block (i1, i2) as a fresh matrix.
    pub fn block(&self, i1: usize, i2: usize) -> Matrix {
        let d = self.block_dim;
        let mut out = Matrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                out.set(r, c, self.values.get(i1 * d + r, i2 * d + c));
            }
        }
        out
    }
}

/// Scales `x'_j` by the m^{q/2} weight-matrix factor so diagonal and matrix
/// factors can be fused into row/column scalings.
fn scaled_derivative(trace: &ForwardTrace, j: usize, extra: f64) -> Vec<f64> {
    trace.derivative(j).iter().map(|&v| extra * v).collect()
}

/// B_{k1,k2} for 2 ≤ k1 ≤ k2 ≤ l, built by right-to-left chain products.
pub fn backprop_matrix(
    cfg: &MlpConfig,
    theta: &Parameter,
    trace: &ForwardTrace,
    k1: usize,
    k2: usize,
) -> Result<BackpropMatrix> {
    let l = cfg.depth();
    if !(2 <= k1 && k1 <= k2 && k2 <= l) {
        return Err(Error::invalid(format!(
            "backprop_matrix: need 2 ≤ k1 ≤ k2 ≤ l = {l}, got k1 = {k1}, k2 = {k2}"
        )));
    }
    let sigma = cfg.sigma();
    if k1 == k2 {
        let d = trace.derivative(k1);
        let mut values = Matrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            values.set(i, i, sigma * v);
        }
        return Ok(BackpropMatrix { k1, k2, values });
    }
    let pre = cfg.pre_scale();
    // σ·D_{x'_{k2}}·(m^{q/2}A_{k2−1})·D_{x'_{k2−1}} as fused row/col scalings.
    let mut b = theta
        .layer(k2 - 1)
        .scale_rows(&scaled_derivative(trace, k2, sigma * pre))
        .scale_cols(trace.derivative(k2 - 1));
    for j in (k1..k2 - 1).rev() {
        b = b
            .matmul(theta.layer(j))
            .scale_cols(&scaled_derivative(trace, j, pre));
    }
    Ok(BackpropMatrix { k1, k2, values: b })
}

/// All B_{k,l} for k ∈ [2, l] in one shared backward sweep (each partial
/// product is extended once as k decreases). Takes the first l−1 layer
/// matrices; A_l never appears in these chains.
pub fn backprop_sweep(
    cfg: &MlpConfig,
    head: &[Matrix],
    trace: &ForwardTrace,
) -> Vec<BackpropMatrix> {
    let l = cfg.depth();
    assert_eq!(head.len(), l - 1, "backprop_sweep: head must hold A_1..A_{{l-1}}");
    let sigma = cfg.sigma();
    let pre = cfg.pre_scale();
    let mut descending: Vec<BackpropMatrix> = Vec::with_capacity(l - 1);

    let d_l = trace.derivative(l);
    let mut diag = Matrix::zeros(d_l.len(), d_l.len());
    for (i, &v) in d_l.iter().enumerate() {
        diag.set(i, i, sigma * v);
    }
    descending.push(BackpropMatrix { k1: l, k2: l, values: diag });

    if l >= 3 {
        let mut cur = head[l - 2]
            .scale_rows(&scaled_derivative(trace, l, sigma * pre))
            .scale_cols(trace.derivative(l - 1));
        descending.push(BackpropMatrix { k1: l - 1, k2: l, values: cur.clone() });
        for j in (2..l - 1).rev() {
            cur = cur
                .matmul(&head[j - 1])
                .scale_cols(&scaled_derivative(trace, j, pre));
            descending.push(BackpropMatrix { k1: j, k2: l, values: cur.clone() });
        }
    }
    descending.reverse();
    descending
}

/// tr(B1·B2*) as an entrywise product sum; no product matrix is formed.
pub fn bwd_inner(b1: &BackpropMatrix, b2: &BackpropMatrix) -> Result<f64> {
    if (b1.k1, b1.k2) != (b2.k1, b2.k2)
        || b1.values.rows() != b2.values.rows()
        || b1.values.cols() != b2.values.cols()
    {
        return Err(Error::invalid(format!(
            "bwd_inner: mismatched matrices B_{{{},{}}} ({}x{}) vs B_{{{},{}}} ({}x{})",
            b1.k1,
            b1.k2,
            b1.values.rows(),
            b1.values.cols(),
            b2.k1,
            b2.k2,
            b2.values.rows(),
            b2.values.cols()
        )));
    }
    Ok(b1.values.entrywise_dot(&b2.values))
}

/// The A_l-projected chains V_{k} = A_l·D_{x'_l}·(m^{q/2}A_{l−1}) ⋯
/// D_{x'_k}, for k ∈ [2, l], sharing one backward sweep. σ is left out so
/// that A_l·B_{k,l} = σ·V_k.
fn projected_sweep(cfg: &MlpConfig, theta: &Parameter, trace: &ForwardTrace) -> Vec<Matrix> {
    let l = cfg.depth();
    let pre = cfg.pre_scale();
    let mut descending = Vec::with_capacity(l - 1);
    let mut cur = theta.layer(l).scale_cols(trace.derivative(l));
    descending.push(cur.clone());
    for j in (2..l).rev() {
        cur = cur
            .matmul(theta.layer(j))
            .scale_cols(&scaled_derivative(trace, j, pre));
        descending.push(cur.clone());
    }
    descending.reverse(); // index 0 ↔ V_2, ..., index l−2 ↔ V_l
    descending
}

/// K_θ(x1, x2) via the layerwise decomposition.
pub fn ntk_entry(
    cfg: &MlpConfig,
    theta: &Parameter,
    t1: &ForwardTrace,
    t2: &ForwardTrace,
) -> NtkEntry {
    let l = cfg.depth();
    let m_l = cfg.output_dim();
    let mq = (cfg.width_base() as f64).powf(cfg.q());
    let v1 = projected_sweep(cfg, theta, t1);
    let v2 = projected_sweep(cfg, theta, t2);
    let mut values = Matrix::zeros(m_l, m_l);
    for k in 1..l {
        let x_k = dot(t1.activation(k), t2.activation(k));
        if x_k == 0.0 {
            continue;
        }
        // v index 0 holds V_2; term k needs V_{k+1}.
        let gram = v1[k - 1].matmul_transpose_b(&v2[k - 1]);
        values.add_assign_scaled(&gram, mq * x_k);
    }
    let x_l = dot(t1.activation(l), t2.activation(l));
    for i in 0..m_l {
        let v = values.get(i, i);
        values.set(i, i, v + x_l);
    }
    NtkEntry { values }
}

/// Ground-truth K_θ(x1, x2) = Σ_k (layer-k Jacobian block)(layer-k Jacobian
/// block)*, materializing each m_l × (m_k·m_{k−1}) block densely. Runs its
/// own forward passes from the raw inputs.
pub fn ntk_entry_via_jacobian(
    cfg: &MlpConfig,
    theta: &Parameter,
    x1: &[f64],
    x2: &[f64],
) -> Result<NtkEntry> {
    ntk_entry_via_jacobian_budgeted(cfg, theta, x1, x2, DEFAULT_JACOBIAN_BUDGET)
}

/// As [`ntk_entry_via_jacobian`] with an explicit per-block element budget.
pub fn ntk_entry_via_jacobian_budgeted(
    cfg: &MlpConfig,
    theta: &Parameter,
    x1: &[f64],
    x2: &[f64],
    element_budget: usize,
) -> Result<NtkEntry> {
    let l = cfg.depth();
    let m_l = cfg.output_dim();
    let largest = (1..=l)
        .map(|k| m_l * cfg.width(k) * cfg.width(k - 1))
        .max()
        .expect("depth ≥ 2");
    if largest > element_budget {
        return Err(Error::invalid(format!(
            "ntk_entry_via_jacobian: largest Jacobian block has {largest} elements, budget is {element_budget}"
        )));
    }
    let t1 = forward(cfg, theta, x1)?;
    let t2 = forward(cfg, theta, x2)?;
    let pre = cfg.pre_scale();

    // Top-down chains C_k = A_l·D_{x'_l}·(m^{q/2}A_{l−1}) ⋯ D_{x'_{k+1}},
    // assembled independently per trace; chains[k−1] is C_k (m_l × m_k).
    let chains = |t: &ForwardTrace| -> Vec<Matrix> {
        let mut down = Vec::with_capacity(l - 1);
        let mut cur = theta.layer(l).scale_cols(t.derivative(l));
        down.push(cur.clone()); // C_{l−1}
        for j in (2..l).rev() {
            cur = cur
                .matmul(theta.layer(j))
                .scale_cols(&scaled_derivative(t, j, pre));
            down.push(cur.clone()); // C_{j−1}
        }
        down.reverse(); // index k−1 ↔ C_k for k ∈ [1, l−1]
        down
    };
    let c1 = chains(&t1);
    let c2 = chains(&t2);

    // Dense layer-k block: entry (r, j1·m_{k−1}+j2) = m^{q/2}·C_k[r,j1]·x_k[j2]
    // for k < l, and δ_{r,j1}·x_l[j2] for the last layer.
    let block = |chain: Option<&Matrix>, x_k: &[f64]| -> Matrix {
        match chain {
            Some(c) => {
                let (rows, mk) = (c.rows(), c.cols());
                let mut out = Matrix::zeros(rows, mk * x_k.len());
                for r in 0..rows {
                    for j1 in 0..mk {
                        let lead = pre * c.get(r, j1);
                        let row = out.row_mut(r);
                        for (j2, &xv) in x_k.iter().enumerate() {
                            row[j1 * x_k.len() + j2] = lead * xv;
                        }
                    }
                }
                out
            }
            None => {
                let mut out = Matrix::zeros(m_l, m_l * x_k.len());
                for r in 0..m_l {
                    let row = out.row_mut(r);
                    for (j2, &xv) in x_k.iter().enumerate() {
                        row[r * x_k.len() + j2] = xv;
                    }
                }
                out
            }
        }
    };

    let mut values = Matrix::zeros(m_l, m_l);
    for k in 1..=l {
        let chain_pair = if k < l { (Some(&c1[k - 1]), Some(&c2[k - 1])) } else { (None, None) };
        let b1 = block(chain_pair.0, t1.activation(k));
        let b2 = block(chain_pair.1, t2.activation(k));
        values.add_assign_scaled(&b1.matmul_transpose_b(&b2), 1.0);
    }
    Ok(NtkEntry { values })
}

/// E_{A_l} K_θ(x1,x2) = (Σ_{k=1}^{l−1} X_k·X'_{k+1,l} + X_l)·I, using only
/// the first l−1 layers (`head`); the m^{q_k−q_l} weights cancel because all
/// scalings share one exponent q.
pub fn expected_ntk_entry(
    cfg: &MlpConfig,
    head: &[Matrix],
    t1: &ForwardTrace,
    t2: &ForwardTrace,
) -> Result<NtkEntry> {
    let l = cfg.depth();
    let s1 = backprop_sweep(cfg, head, t1);
    let s2 = backprop_sweep(cfg, head, t2);
    let mut scalar = dot(t1.activation(l), t2.activation(l));
    for k in 1..l {
        let x_k = dot(t1.activation(k), t2.activation(k));
        // sweeps are ascending: index 0 ↔ B_{2,l}, so B_{k+1,l} is index k−1.
        scalar += x_k * bwd_inner(&s1[k - 1], &s2[k - 1])?;
    }
    Ok(NtkEntry {
        values: Matrix::scaled_identity(cfg.output_dim(), scalar),
    })
}

/// J(x1,x2,θ_{1:l−1}) = Σ_{k=1}^{l−1} X_k·B_{k+1,l}(x1)·B_{k+1,l}(x2)*,
/// an m_{l−1} × m_{l−1} diagnostic whose norms drive last-layer
/// concentration.
pub fn diagnostic_j(
    cfg: &MlpConfig,
    head: &[Matrix],
    t1: &ForwardTrace,
    t2: &ForwardTrace,
) -> Result<Matrix> {
    let l = cfg.depth();
    let s1 = backprop_sweep(cfg, head, t1);
    let s2 = backprop_sweep(cfg, head, t2);
    let dim = cfg.width(l - 1);
    let mut j_mat = Matrix::zeros(dim, dim);
    for k in 1..l {
        let x_k = dot(t1.activation(k), t2.activation(k));
        if x_k == 0.0 {
            continue;
        }
        let gram = s1[k - 1].values.matmul_transpose_b(&s2[k - 1].values);
        j_mat.add_assign_scaled(&gram, x_k);
    }
    Ok(j_mat)
}

/// K(θ) over a dataset: n×n grid of entry blocks scaled by 1/n. Forward
/// traces are computed once per point, entries once per unordered pair and
/// mirrored.
pub fn ntk_matrix(cfg: &MlpConfig, theta: &Parameter, points: &[Vec<f64>]) -> Result<NtkMatrix> {
    if points.is_empty() {
        return Err(Error::invalid("ntk_matrix: empty dataset"));
    }
    let n = points.len();
    let m_l = cfg.output_dim();
    let traces: Vec<ForwardTrace> = points
        .iter()
        .map(|x| forward(cfg, theta, x))
        .collect::<Result<_>>()?;
    let inv_n = 1.0 / n as f64;
    let mut values = Matrix::zeros(n * m_l, n * m_l);
    for i1 in 0..n {
        for i2 in i1..n {
            let entry = ntk_entry(cfg, theta, &traces[i1], &traces[i2]);
            let scaled = entry.values.scaled(inv_n);
            values.set_block(i1 * m_l, i2 * m_l, &scaled);
            if i1 != i2 {
                values.set_block(i2 * m_l, i1 * m_l, &scaled.transpose());
            }
        }
    }
    // Mirroring assumes K_θ(x1,x2)* = K_θ(x2,x1); spot-check it on one
    // off-diagonal pair (deterministic pick keeps runs reproducible).
    if n >= 2 {
        let (i1, i2) = (0, n - 1);
        let direct = ntk_entry(cfg, theta, &traces[i2], &traces[i1]).values.scaled(inv_n);
        let mirrored = {
            let d = m_l;
            let mut out = Matrix::zeros(d, d);
            for r in 0..d {
                for c in 0..d {
                    out.set(r, c, values.get(i2 * d + r, i1 * d + c));
                }
            }
            out
        };
        let defect = direct.sub(&mirrored).max_abs();
        let scale = direct.max_abs().max(1.0);
        assert!(
            defect <= 1e-10 * scale,
            "ntk_matrix: transpose-mirror check failed (defect {defect:.3e})"
        );
    }
    Ok(NtkMatrix {
        n,
        block_dim: m_l,
        values,
    })
}
