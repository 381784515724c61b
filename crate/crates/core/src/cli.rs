//! Command-line front end: JSON config with flag overrides, dataset loading
//! (CSV, IDX, synthetic), experiment dispatch, and atomic CSV/manifest
//! emission.
//!
//! Every run writes its artifacts into `--out` (default `runs/`): one or
//! more `Step,Value,Std` CSV files plus `manifest.json` holding the fully
//! resolved configuration, seed, and artifact version — enough to reproduce
//! the run byte for byte. Files are written to a temporary sibling and
//! renamed into place. Exit code 0 means all cells completed; with
//! `--check`, runs that complete but flag violations (gia bound violations,
//! icd degenerate trials) exit with code 2.

use crate::error::Error;
use crate::experiments::{
    lift_dataset, run_concentration_experiment, run_gia_experiment, run_icd_experiment,
    synth_pair, synth_sphere, Dataset, ExperimentKind, ExperimentSpec, WidthPattern,
};
use crate::kernel::ntk_matrix;
use crate::limit::{limiting_ntk_matrix, DualMaps};
use crate::mlp::init_parameter;
use crate::numerics::matrix::Matrix;
use crate::numerics::rng::Rng;
use crate::Result;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Exit code for completed runs whose `--check` predicate failed.
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "eoc-ntk",
    version,
    about = "Finite-width NTK experiments for (a,b)-ReLU networks at the edge of chaos"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the resolved architecture and activation constants.
    Describe(CommonArgs),
    /// Inverse-cosine-distance drift across depth (one CSV row per layer).
    Icd(CommonArgs),
    /// ‖K(θ) − K_∞‖ across widths (one CSV row per width).
    Concentration(CommonArgs),
    /// Gradient-independence error vs bound (one CSV per k2, rows k1).
    Gia(CommonArgs),
    /// Dump K(θ) and K_∞ for a dataset to CSV.
    Kernel(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Describe(a)
            | Command::Icd(a)
            | Command::Concentration(a)
            | Command::Gia(a)
            | Command::Kernel(a) => a,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Command::Describe(_) => "describe",
            Command::Icd(_) => "icd",
            Command::Concentration(_) => "concentration",
            Command::Gia(_) => "gia",
            Command::Kernel(_) => "kernel",
        }
    }
}

/// Flags shared by every subcommand; each one overrides the matching config
/// key.
#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory for CSV files and the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Width pattern: constant | linear | quadratic.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Base width m (repeat for a sweep: --m 8 --m 32).
    #[arg(long)]
    pub m: Vec<usize>,
    /// Depth l.
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Output dimension m_l.
    #[arg(long)]
    pub m_l: Option<usize>,
    /// Dataset file (CSV or IDX); omitting it uses the synthetic default.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Dataset file format: csv | idx (default: inferred from extension).
    #[arg(long)]
    pub format: Option<String>,
    /// Normalize each point to unit norm after loading.
    #[arg(long)]
    pub normalize: bool,
    /// Append the coordinate β to every point (after normalization).
    #[arg(long)]
    pub lift: Option<f64>,
    /// Keep only the first N points.
    #[arg(long)]
    pub limit_n: Option<usize>,
    /// Exit nonzero if the run completes but flags violations.
    #[arg(long)]
    pub check: bool,
    /// Rayon worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Inner Monte-Carlo draws for gia.
    #[arg(long)]
    pub inner_draws: Option<usize>,
}

/// `m` in JSON: a single width or a sweep list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WidthsField {
    One(usize),
    Sweep(Vec<usize>),
}

impl WidthsField {
    fn to_vec(&self) -> Vec<usize> {
        match self {
            WidthsField::One(m) => vec![*m],
            WidthsField::Sweep(v) => v.clone(),
        }
    }
}

/// `pattern` in JSON: a name or an explicit γ list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternField {
    Name(String),
    Explicit(Vec<usize>),
}

/// Dataset source descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Two unit vectors at an exact angle (radians).
    Pair { angle: f64, dim: usize },
    /// n uniform directions scaled to `radius`.
    Sphere { n: usize, dim: usize, radius: f64, seed: u64 },
    /// A CSV or IDX file on disk.
    File {
        path: PathBuf,
        format: Option<String>,
        #[serde(default)]
        normalize: bool,
        #[serde(default)]
        lift: Option<f64>,
        #[serde(default)]
        limit_n: Option<usize>,
    },
}

/// One JSON document describing a run; unknown keys are rejected. Every
/// field is optional so flags and per-command defaults can fill it in; the
/// fully resolved form is what lands in the manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Experiment discriminator; must match the subcommand when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<WidthsField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a JSON document, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("config: {e}")))
    }

    fn apply_flags(&mut self, args: &CommonArgs) -> Result<()> {
        if let Some(s) = args.seed {
            self.seed = Some(s);
        }
        if let Some(t) = args.trials {
            self.trials = Some(t);
        }
        if let Some(o) = &args.out {
            self.out = Some(o.clone());
        }
        if let Some(p) = &args.pattern {
            self.pattern = Some(PatternField::Name(p.clone()));
        }
        if !args.m.is_empty() {
            self.m = Some(if args.m.len() == 1 {
                WidthsField::One(args.m[0])
            } else {
                WidthsField::Sweep(args.m.clone())
            });
        }
        if let Some(l) = args.l {
            self.l = Some(l);
        }
        if let Some(v) = args.a {
            self.a = Some(v);
        }
        if let Some(v) = args.b {
            self.b = Some(v);
        }
        if let Some(v) = args.q {
            self.q = Some(v);
        }
        if let Some(v) = args.m_l {
            self.m_l = Some(v);
        }
        if let Some(v) = args.inner_draws {
            self.inner_draws = Some(v);
        }
        if let Some(path) = &args.dataset {
            self.dataset = Some(DatasetConfig::File {
                path: path.clone(),
                format: args.format.clone(),
                normalize: args.normalize,
                lift: args.lift,
                limit_n: args.limit_n,
            });
        } else if args.normalize || args.lift.is_some() || args.limit_n.is_some() {
            // Dataset post-processing flags only make sense with a file
            // source, either from --dataset or from the config.
            match &mut self.dataset {
                Some(DatasetConfig::File { normalize, lift, limit_n, .. }) => {
                    if args.normalize {
                        *normalize = true;
                    }
                    if args.lift.is_some() {
                        *lift = args.lift;
                    }
                    if args.limit_n.is_some() {
                        *limit_n = args.limit_n;
                    }
                }
                _ => {
                    return Err(Error::invalid(
                        "--normalize/--lift/--limit-n need a file dataset (--dataset or config)",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fills whatever is still unset with the command's defaults.
    fn apply_defaults(&mut self, kind: &str) {
        let d = |v: f64| Some(v);
        self.seed = self.seed.or(Some(0));
        self.q = self.q.or(d(0.0));
        self.m_l = self.m_l.or(Some(1));
        self.out = self.out.clone().or_else(|| Some(PathBuf::from("runs")));
        match kind {
            "icd" => {
                self.l = self.l.or(Some(32));
                self.m = self.m.clone().or(Some(WidthsField::One(16)));
                self.pattern = self
                    .pattern
                    .clone()
                    .or(Some(PatternField::Name("quadratic".into())));
                self.a = self.a.or(d(0.0));
                self.b = self.b.or(d(1.0));
                self.trials = self.trials.or(Some(200));
            }
            "concentration" => {
                self.l = self.l.or(Some(8));
                self.m = self.m.clone().or(Some(WidthsField::Sweep(vec![8, 16, 32])));
                self.pattern = self
                    .pattern
                    .clone()
                    .or(Some(PatternField::Name("quadratic".into())));
                self.a = self.a.or(d(0.0));
                self.b = self.b.or(d(1.0));
                self.q = self.q.or(d(1.0));
                self.trials = self.trials.or(Some(100));
            }
            "gia" => {
                self.l = self.l.or(Some(5));
                self.m = self.m.clone().or(Some(WidthsField::One(16)));
                self.pattern = self
                    .pattern
                    .clone()
                    .or(Some(PatternField::Name("quadratic".into())));
                self.a = self.a.or(d(1.0));
                self.b = self.b.or(d(1.0));
                self.trials = self.trials.or(Some(1));
                self.inner_draws = self.inner_draws.or(Some(10_000));
            }
            _ => {
                self.l = self.l.or(Some(3));
                self.m = self.m.clone().or(Some(WidthsField::One(8)));
                self.pattern = self
                    .pattern
                    .clone()
                    .or(Some(PatternField::Name("constant".into())));
                self.a = self.a.or(d(1.0));
                self.b = self.b.or(d(1.0));
                self.trials = self.trials.or(Some(1));
            }
        }
        if self.dataset.is_none() {
            self.dataset = Some(match kind {
                "concentration" | "kernel" => DatasetConfig::Sphere {
                    n: 4,
                    dim: 16,
                    radius: 1.0,
                    seed: self.seed.unwrap_or(0) ^ 0x5eed,
                },
                _ => DatasetConfig::Pair {
                    angle: std::f64::consts::FRAC_PI_2,
                    dim: 16,
                },
            });
        }
        if self.kind.is_none() {
            self.kind = Some(kind.to_string());
        }
    }

    fn pattern_value(&self) -> Result<WidthPattern> {
        match self.pattern.as_ref().expect("defaulted") {
            PatternField::Name(name) => match name.as_str() {
                "constant" => Ok(WidthPattern::Constant),
                "linear" => Ok(WidthPattern::Linear),
                "quadratic" => Ok(WidthPattern::Quadratic),
                other => Err(Error::invalid(format!(
                    "pattern must be constant|linear|quadratic or an explicit γ list, got {other:?}"
                ))),
            },
            PatternField::Explicit(gammas) => Ok(WidthPattern::Explicit(gammas.clone())),
        }
    }
}

/// Loads a dataset file with the requested options; `format` falls back to
/// the file extension (".idx" → IDX, otherwise CSV).
pub fn load_dataset(
    path: &Path,
    format: Option<&str>,
    normalize: bool,
    lift: Option<f64>,
    limit_n: Option<usize>,
) -> Result<Dataset> {
    let fmt = match format {
        Some("csv") => "csv",
        Some("idx") => "idx",
        Some(other) => return Err(Error::parse(format!("unknown dataset format {other:?}"))),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("idx") | Some("ubyte") => "idx",
            _ => "csv",
        },
    };
    let mut points = if fmt == "csv" {
        load_csv_points(path)?
    } else {
        load_idx_points(path)?
    };
    if let Some(n) = limit_n {
        if n == 0 {
            return Err(Error::invalid("limit_n must be ≥ 1"));
        }
        points.truncate(n);
    }
    if normalize {
        for (i, p) in points.iter_mut().enumerate() {
            let norm = crate::numerics::matrix::norm2(p);
            if norm == 0.0 {
                return Err(Error::parse(format!(
                    "{}: record {} is a zero vector, cannot normalize",
                    path.display(),
                    i
                )));
            }
            for v in p.iter_mut() {
                *v /= norm;
            }
        }
    }
    let ds = Dataset::new(points)?;
    match lift {
        Some(beta) => lift_dataset(&ds, beta),
        None => Ok(ds),
    }
}

fn load_csv_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::parse(format!(
                        "{}: line {}: bad decimal {:?}",
                        path.display(),
                        lineno + 1,
                        cell.trim()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = points.first() {
            let first: &Vec<f64> = first;
            if row.len() != first.len() {
                return Err(Error::parse(format!(
                    "{}: line {}: {} fields, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        points.push(row);
    }
    if points.is_empty() {
        return Err(Error::parse(format!("{}: no data rows", path.display())));
    }
    Ok(points)
}

/// IDX magic for the 3-D unsigned-byte tensor variant (MNIST images).
pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

fn load_idx_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
            .ok_or_else(|| Error::parse(format!("{}: truncated IDX header", path.display())))
    };
    let magic = word(0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::parse(format!(
            "{}: bad IDX magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}",
            path.display()
        )));
    }
    let n = word(4)? as usize;
    let rows = word(8)? as usize;
    let cols = word(12)? as usize;
    let dim = rows * cols;
    if n == 0 || dim == 0 {
        return Err(Error::parse(format!("{}: empty IDX tensor", path.display())));
    }
    let data = &bytes[16..];
    if data.len() != n * dim {
        return Err(Error::parse(format!(
            "{}: IDX payload has {} bytes, header promises {}",
            path.display(),
            data.len(),
            n * dim
        )));
    }
    Ok(data
        .chunks_exact(dim)
        .map(|chunk| chunk.iter().map(|&b| b as f64 / 255.0).collect())
        .collect())
}

fn resolve_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    match cfg {
        DatasetConfig::Pair { angle, dim } => synth_pair(*angle, *dim),
        DatasetConfig::Sphere { n, dim, radius, seed } => {
            synth_sphere(&Rng::new(*seed), *n, *dim, *radius)
        }
        DatasetConfig::File {
            path,
            format,
            normalize,
            lift,
            limit_n,
        } => load_dataset(path, format.as_deref(), *normalize, *lift, *limit_n),
    }
}

fn build_spec(kind: ExperimentKind, cfg: &RunConfig) -> Result<ExperimentSpec> {
    Ok(ExperimentSpec {
        kind,
        l: cfg.l.expect("defaulted"),
        pattern: cfg.pattern_value()?,
        widths: cfg.m.as_ref().expect("defaulted").to_vec(),
        q: cfg.q.expect("defaulted"),
        a: cfg.a.expect("defaulted"),
        b: cfg.b.expect("defaulted"),
        m_l: cfg.m_l.expect("defaulted"),
        trials: cfg.trials.expect("defaulted"),
        seed: cfg.seed.expect("defaulted"),
        dataset: resolve_dataset(cfg.dataset.as_ref().expect("defaulted"))?,
        inner_draws: cfg.inner_draws.unwrap_or(10_000),
    })
}

/// Writes `contents` to `path` atomically (temp sibling + rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_from_rows(rows: &[(u64, f64, f64)]) -> String {
    let mut out = String::from("Step,Value,Std\n");
    for (step, value, std) in rows {
        let _ = writeln!(out, "{step},{value},{std}");
    }
    out
}

fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn write_manifest(out_dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        command: &'a str,
        artifact_version: &'a str,
        config: &'a RunConfig,
    }
    let manifest = Manifest {
        command,
        artifact_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::parse(format!("manifest serialization: {e}")))?;
    write_atomic(&out_dir.join("manifest.json"), &(text + "\n"))
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let args = cli.command.args();
    let kind_name = cli.command.kind_name();

    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(kind) = &cfg.kind {
        if kind != kind_name && kind_name != "describe" && kind_name != "kernel" {
            return Err(Error::invalid(format!(
                "config kind {kind:?} does not match command {kind_name:?}"
            )));
        }
    }
    cfg.apply_flags(args)?;
    cfg.apply_defaults(kind_name);

    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(Error::invalid("--threads must be ≥ 1"));
        }
        // Ignore the error if a pool already exists (repeated calls in-process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let out_dir = cfg.out.clone().expect("defaulted");
    match &cli.command {
        Command::Describe(_) => {
            let spec = build_spec(ExperimentKind::Icd, &cfg)?;
            let mut report = String::new();
            for &m in &spec.widths {
                let net = spec.config_for(m)?;
                let widths: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
                let _ = writeln!(report, "widths: {}", widths.join(","));
                let _ = writeln!(report, "sigma: {}", net.sigma());
                let _ = writeln!(report, "delta_phi: {}", net.delta_phi());
                let _ = writeln!(report, "kappa_phi: {}", net.kappa_phi());
                let _ = writeln!(report, "parameters: {}", net.parameter_count());
            }
            print!("{report}");
            Ok(0)
        }
        Command::Icd(a) => {
            let spec = build_spec(ExperimentKind::Icd, &cfg)?;
            let result = run_icd_experiment(&spec)?;
            let rows: Vec<(u64, f64, f64)> = result
                .cells
                .iter()
                .map(|c| (c.key, c.mean, c.std))
                .collect();
            write_atomic(&out_dir.join("icd.csv"), &csv_from_rows(&rows))?;
            write_manifest(&out_dir, kind_name, &cfg)?;
            println!(
                "icd: {} layers, {} trials, {} failed",
                result.cells.len(),
                result.trials,
                result.failures
            );
            for reason in &result.failure_reasons {
                println!("  failed trial: {reason}");
            }
            Ok(if a.check && result.failures > 0 {
                EXIT_CHECK_FAILED
            } else {
                0
            })
        }
        Command::Concentration(_) => {
            let spec = build_spec(ExperimentKind::Concentration, &cfg)?;
            let result = run_concentration_experiment(&spec)?;
            let rows: Vec<(u64, f64, f64)> = result
                .cells
                .iter()
                .map(|c| (c.key, c.median, c.std))
                .collect();
            write_atomic(&out_dir.join("concentration.csv"), &csv_from_rows(&rows))?;
            write_manifest(&out_dir, kind_name, &cfg)?;
            println!(
                "concentration: {} widths, {} trials",
                result.cells.len(),
                result.trials
            );
            for c in &result.cells {
                println!("  m={}: median {:.6e} (std {:.3e})", c.key, c.median, c.std);
            }
            Ok(0)
        }
        Command::Gia(a) => {
            let spec = build_spec(ExperimentKind::Gia, &cfg)?;
            let result = run_gia_experiment(&spec)?;
            let l = spec.l;
            for k2 in 3..=l {
                let rows: Vec<(u64, f64, f64)> = result
                    .cells
                    .iter()
                    .filter(|c| c.k2 == k2)
                    .map(|c| (c.k1 as u64, c.mean_error, c.std_error))
                    .collect();
                write_atomic(&out_dir.join(format!("gia_k2_{k2}.csv")), &csv_from_rows(&rows))?;
            }
            write_manifest(&out_dir, kind_name, &cfg)?;
            let violations: usize = result.cells.iter().map(|c| c.violations).sum();
            let inconclusive: usize = result.cells.iter().map(|c| c.inconclusive).sum();
            println!(
                "gia: {} cells, {} trials, {} violations, {} inconclusive",
                result.cells.len(),
                result.trials,
                violations,
                inconclusive
            );
            Ok(if a.check && violations > 0 {
                EXIT_CHECK_FAILED
            } else {
                0
            })
        }
        Command::Kernel(_) => {
            let spec = build_spec(ExperimentKind::Concentration, &cfg)?;
            let m = spec.widths[0];
            let net = spec.config_for(m)?;
            let theta = init_parameter(&net, spec.seed);
            let empirical = ntk_matrix(&net, &theta, spec.dataset.points())?;
            let maps = DualMaps::new(spec.a, spec.b)?;
            let limit = limiting_ntk_matrix(&maps, spec.dataset.points(), spec.l, spec.m_l)?;
            write_atomic(&out_dir.join("kernel_empirical.csv"), &matrix_csv(&empirical.values))?;
            write_atomic(&out_dir.join("kernel_limit.csv"), &matrix_csv(&limit.values))?;
            write_manifest(&out_dir, kind_name, &cfg)?;
            let dev = empirical.values.sub(&limit.values).frobenius_norm();
            println!(
                "kernel: n={} blocks of {}x{}, ‖K−K_∞‖_F = {:.6e}",
                empirical.n, empirical.block_dim, empirical.block_dim, dev
            );
            Ok(0)
        }
    }
}
