//! Inverse-cosine-distance drift across depth.
//!
//! For a fixed input pair, each trial draws a fresh parameter, runs both
//! points forward, and records |w_k − ω_k| per layer, where
//! w_k = ((1−ρ_k)/2)^{−1/2} is the empirical inverse cosine distance at
//! layer k and ω_k = ((1−ϱ^{∘(k−1)}(ρ_1))/2)^{−1/2} its infinite-width
//! limit seeded at the empirical input cosine.
//!
//! Deep quadratic-width stacks hold orders of magnitude more weights than
//! activations, so trials stream each weight row out of the counter RNG,
//! apply it to both points, and drop it — bit-identical to materializing
//! the parameter (same stream positions, same accumulation order) at a
//! fraction of the memory.

use crate::error::Error;
use crate::experiments::stats::{summarize, StatSummary};
use crate::experiments::ExperimentSpec;
use crate::limit::DualMaps;
use crate::mlp::phi;
use crate::mlp::MlpConfig;
use crate::numerics::matrix::{dot, norm2};
use crate::numerics::rng::{NormalStream, Rng};
use crate::Result;

use rayon::prelude::*;

/// Per-layer error statistics plus the failed-trial account.
#[derive(Debug, Clone)]
pub struct IcdResult {
    /// One cell per layer k ∈ [2, l], key = k.
    pub cells: Vec<StatSummary>,
    pub trials: usize,
    /// Trials excluded for degenerate geometry (zero-norm or parallel
    /// activations), with a sample of reasons.
    pub failures: usize,
    pub failure_reasons: Vec<String>,
}

/// One trial: layer errors |w_k − ω_k| for k ∈ [2, l], or the reason the
/// trial degenerated.
fn icd_trial(
    cfg: &MlpConfig,
    trial_seed: u64,
    x1: &[f64],
    x2: &[f64],
    limit_w: &[f64],
) -> std::result::Result<Vec<f64>, String> {
    let l = cfg.depth();
    let std = cfg.layer_std();
    let pre = cfg.pre_scale();
    let (a, b) = (cfg.a(), cfg.b());
    let root = Rng::new(trial_seed);
    let mut x1v = x1.to_vec();
    let mut x2v = x2.to_vec();
    let mut errs = Vec::with_capacity(l - 1);
    for k in 1..l {
        let rows = cfg.width(k);
        let inv = (rows as f64).powf(-0.5);
        let mut stream = NormalStream::new(&root.child(k as u64));
        let mut x1n = Vec::with_capacity(rows);
        let mut x2n = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut acc1 = 0.0;
            let mut acc2 = 0.0;
            for (&u1, &u2) in x1v.iter().zip(&x2v) {
                let v = std * stream.next_normal();
                acc1 += v * u1;
                acc2 += v * u2;
            }
            let n1 = pre * acc1;
            let n2 = pre * acc2;
            x1n.push(inv * phi(n1, a, b));
            x2n.push(inv * phi(n2, a, b));
        }
        let (tau1, tau2) = (norm2(&x1n), norm2(&x2n));
        if tau1 <= 0.0 || tau2 <= 0.0 {
            return Err(format!("zero-norm activation at layer {}", k + 1));
        }
        let rho = (dot(&x1n, &x2n) / (tau1 * tau2)).clamp(-1.0, 1.0);
        let z = (1.0 - rho) / 2.0;
        if z <= 0.0 {
            return Err(format!("parallel activations at layer {}", k + 1));
        }
        errs.push((z.powf(-0.5) - limit_w[k - 1]).abs());
        x1v = x1n;
        x2v = x2n;
    }
    Ok(errs)
}

/// Runs the experiment over `spec.trials` parameter draws; one summary per
/// layer k ∈ [2, l].
pub fn run_icd_experiment(spec: &ExperimentSpec) -> Result<IcdResult> {
    spec.validate_common()?;
    let m = spec.single_width()?;
    let cfg = spec.config_for(m)?;
    let ds = &spec.dataset;
    if ds.n() != 2 {
        return Err(Error::invalid(format!(
            "icd: need exactly two data points, got {}",
            ds.n()
        )));
    }
    ds.validate_no_parallel()?;
    let rho1 = ds.cosine(0, 1)?;
    let maps = DualMaps::from_config(&cfg);

    let l = cfg.depth();
    let mut limit_w = Vec::with_capacity(l - 1);
    let mut iterate = rho1;
    for k in 2..=l {
        iterate = maps.rho_map(iterate)?;
        let z = (1.0 - iterate) / 2.0;
        if z <= 0.0 {
            return Err(Error::NumericFailure {
                detail: format!("icd: limiting inverse cosine distance diverges at layer {k}"),
                last: iterate,
            });
        }
        limit_w.push(z.powf(-0.5));
    }

    let x1 = ds.point(0).to_vec();
    let x2 = ds.point(1).to_vec();
    let outcomes: Vec<std::result::Result<Vec<f64>, String>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| icd_trial(&cfg, Rng::derive_seed(spec.seed, t as u64), &x1, &x2, &limit_w))
        .collect();

    let mut per_layer: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.trials); l - 1];
    let mut failures = 0usize;
    let mut failure_reasons = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(errs) => {
                for (cell, e) in per_layer.iter_mut().zip(errs) {
                    cell.push(e);
                }
            }
            Err(reason) => {
                failures += 1;
                if failure_reasons.len() < 5 {
                    failure_reasons.push(reason);
                }
            }
        }
    }
    let cells = per_layer
        .iter()
        .enumerate()
        .map(|(idx, values)| summarize((idx + 2) as u64, values))
        .collect::<Result<Vec<StatSummary>>>()?;
    Ok(IcdResult {
        cells,
        trials: spec.trials,
        failures,
        failure_reasons,
    })
}
