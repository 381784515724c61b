//! Monte-Carlo experiment harness: datasets, width schedules, the three
//! headline experiments (inverse-cosine-distance drift, NTK concentration,
//! gradient independence), and statistical aggregation.
//!
//! Trial `t` of a run always draws from child stream `(seed, t)`, so results
//! are independent of scheduling: outer trials may run on any number of
//! rayon workers and the aggregated output is bit-identical.

pub mod concentration;
pub mod dataset;
pub mod gia;
pub mod icd;
pub mod stats;

pub use concentration::{run_concentration_experiment, ConcentrationResult};
pub use dataset::{lift_dataset, synth_pair, synth_sphere, Dataset};
pub use gia::{conditional_bwd_estimate, run_gia_experiment, GiaCell, GiaEstimate, GiaResult};
pub use icd::{run_icd_experiment, IcdResult};
pub use stats::{summarize, StatSummary};

use crate::error::Error;
use crate::mlp::MlpConfig;
use crate::Result;

/// Hidden-width profile: γ_k multipliers on the base width m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WidthPattern {
    /// γ_k = 1.
    Constant,
    /// γ_k = k.
    Linear,
    /// γ_k = k².
    Quadratic,
    /// User-supplied γ_1..γ_{l−1}.
    Explicit(Vec<usize>),
}

/// The width-factor list γ_1..γ_{l−1} for a depth-l network.
pub fn width_schedule(pattern: &WidthPattern, m: usize, l: usize) -> Result<Vec<usize>> {
    if l < 2 {
        return Err(Error::invalid(format!("width_schedule: depth l must be ≥ 2, got {l}")));
    }
    if m < 1 {
        return Err(Error::invalid("width_schedule: base width must be ≥ 1"));
    }
    match pattern {
        WidthPattern::Constant => Ok(vec![1; l - 1]),
        WidthPattern::Linear => Ok((1..l).collect()),
        WidthPattern::Quadratic => Ok((1..l).map(|k| k * k).collect()),
        WidthPattern::Explicit(gammas) => {
            if gammas.len() != l - 1 {
                return Err(Error::invalid(format!(
                    "width_schedule: explicit list has {} factors, depth {} needs {}",
                    gammas.len(),
                    l,
                    l - 1
                )));
            }
            if gammas.iter().any(|&g| g < 1) {
                return Err(Error::invalid("width_schedule: explicit factors must be ≥ 1"));
            }
            Ok(gammas.clone())
        }
    }
}

/// Which experiment a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Icd,
    Concentration,
    Gia,
}

/// Declarative description of one Monte-Carlo sweep.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub l: usize,
    pub pattern: WidthPattern,
    /// Base widths m to sweep; icd and gia use exactly one, concentration
    /// any number.
    pub widths: Vec<usize>,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    /// Output dimension m_l.
    pub m_l: usize,
    pub trials: usize,
    pub seed: u64,
    pub dataset: Dataset,
    /// Inner Monte-Carlo draws for the gia experiment.
    pub inner_draws: usize,
}

impl ExperimentSpec {
    /// Network configuration for one base width; the dataset fixes m_0.
    pub fn config_for(&self, m: usize) -> Result<MlpConfig> {
        let gammas = width_schedule(&self.pattern, m, self.l)?;
        MlpConfig::new(
            self.l,
            self.dataset.dim(),
            self.m_l,
            m,
            gammas,
            self.q,
            self.a,
            self.b,
        )
    }

    pub(crate) fn validate_common(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("ExperimentSpec: trials must be ≥ 1"));
        }
        if self.widths.is_empty() {
            return Err(Error::invalid("ExperimentSpec: empty width sweep"));
        }
        Ok(())
    }

    pub(crate) fn single_width(&self) -> Result<usize> {
        if self.widths.len() != 1 {
            return Err(Error::invalid(format!(
                "this experiment sweeps layers, not widths; give exactly one m (got {:?})",
                self.widths
            )));
        }
        Ok(self.widths[0])
    }
}
