//! Experiment configuration and the pipeline commands behind the `cnmf`
//! binary: `generate`, `compress`, `factorize`, `evaluate`, and `bench`.
//!
//! A single JSON config describes a whole experiment; every command reads
//! the same file and uses the sections it needs. All artifacts of a run
//! live under `output_dir`:
//!
//! ```text
//! output_dir/
//!   X.csv, U_true.csv, V_true.csv, generate_manifest.json   (generate)
//!   compressed/{A.csv, Y.csv, row_sums.csv, manifest.json}  (compress, one-sided)
//!   compressed/{A1,A2,Y1,Y2,Q1,Q2,row_sums,col_sums,manifest.json} (two-sided)
//!   compress_manifest.json                                  (compress)
//!   U.csv, V.csv, trace.csv, factorize_manifest.json        (factorize)
//!   metrics.json                                            (evaluate, or
//!                                  factorize when with_full_eval is set)
//!   bench.csv, runs/k{K}_lambda{L}_seed{S}/...              (bench)
//! ```
//!
//! `factorize` reads only the compressed record; it never opens the full
//! data file unless `eval.with_full_eval` is on. Manifests echo the full
//! config, the resolved parameters, and the crate version, so a run can be
//! reproduced bit for bit from its output directory alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{load_matrix, save_matrix, synthetic_lognormal, MatrixFormat, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{
    cosine_similarity, relative_error, rescaled_relative_error, residual_projection_norm,
    MetricsReport,
};
use crate::linalg::{DenseMatrix, Vector};
use crate::matio;
use crate::objectives::FactorPair;
use crate::sketching::{
    compress_one_sided, compress_two_sided, load_compressed_one_sided, load_compressed_two_sided,
    rangefinder_sketch, sample_gaussian_sketch, sample_orthonormal_sketch,
    save_compressed_one_sided, save_compressed_two_sided, shift_sigma, shift_sigma_regularized,
    shift_sigma_small_gram, CompressedOneSided, CompressedTwoSided, Side, SketchKind,
    SketchOperator,
};
use crate::solvers::{
    build_problem_one_sided_orthogonal, build_problem_one_sided_ridge, build_problem_two_sided,
    init_factors, init_factors_spectral_one_sided, init_factors_spectral_two_sided, solve, Method,
    SketchedMUProblem, SolveResult, SolverConfig, StopReason, TracePoint,
};

/// Default λ for the one-sided objectives when the config leaves it unset.
pub const DEFAULT_LAMBDA_ONE_SIDED: f64 = 0.1;
/// Default λ for the two-sided objective when the config leaves it unset.
pub const DEFAULT_LAMBDA_TWO_SIDED: f64 = 0.0;

/// Where the data comes from: generated on the fly from a synthetic spec,
/// or loaded from a file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DataConfig {
    /// Deterministic low-rank lognormal data; regenerated in memory by any
    /// command that needs the full matrix.
    Synthetic(SyntheticSpec),
    /// Data read from disk.
    File { path: PathBuf, format: MatrixFormat },
}

/// Which side(s) of the data the sketch contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchSides {
    Left,
    Right,
    Both,
}

fn default_sketch_side() -> SketchSides {
    SketchSides::Left
}

/// Sketch section of the config. For `side = "both"` the left operator uses
/// `seed` and the right operator `seed + 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchConfig {
    pub kind: SketchKind,
    #[serde(default = "default_sketch_side")]
    pub side: SketchSides,
    /// Number of sketch rows (columns for right operators).
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Entry variance for Gaussian sketches; defaults to 1/dim. Rejected
    /// for the other kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

/// Which compressed objective to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    OneSidedOrthogonal,
    OneSidedRidge,
    TwoSided,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::OneSidedOrthogonal => "one_sided_orthogonal",
            ProblemKind::OneSidedRidge => "one_sided_ridge",
            ProblemKind::TwoSided => "two_sided",
        }
    }

}

/// How an omitted σ is filled in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaVariant {
    /// Minimal shift that certifies monotone multiplicative updates
    /// (computed from the update-side Gram).
    #[default]
    Certified,
    /// Shift computed from the small k×k Gram instead. Kept for protocol
    /// comparisons; a problem build fails when it falls below the certified
    /// minimum.
    SmallGram,
}

/// Regularization section. One-sided problems read `lambda`/`sigma`;
/// the two-sided problem reads the per-side variants. Omitted λ falls back
/// to the problem default (0.1 one-sided, 0 two-sided); omitted σ is filled
/// by `sigma_variant`. Whatever was resolved lands in the run manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub sigma_variant: SigmaVariant,
}

/// How the starting factors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Seeded uniform entries at `init_scale`.
    #[default]
    Random,
    /// Spectral start computed from the compressed record
    /// ([`init_factors_spectral_one_sided`] and the two-sided analogue);
    /// `init_scale` is ignored.
    Spectral,
}

/// Solver section: method plus the knobs of [`SolverConfig`], the
/// initialization kind, and an optional initialization scale. When
/// `init_scale` is omitted the scale is `sqrt(mean(row_sums) / (m·r))`,
/// which puts the initial product `U·Vᵀ` at the magnitude of the data's
/// mean entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: Method,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub window: usize,
    pub target_objective: Option<f64>,
    pub step_alpha: f64,
    pub denom_guard: f64,
    pub seed: u64,
    pub init: InitKind,
    pub init_scale: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        SolverSection {
            method: Method::Mu,
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            window: c.window,
            target_objective: c.target_objective,
            step_alpha: c.step_alpha,
            denom_guard: c.denom_guard,
            seed: c.seed,
            init: InitKind::default(),
            init_scale: None,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            window: self.window,
            target_objective: self.target_objective,
            step_alpha: self.step_alpha,
            denom_guard: self.denom_guard,
            seed: self.seed,
        }
    }
}

/// Evaluation section. `log_every` thins trace.csv once a run exceeds
/// 10 000 recorded iterations; shorter traces are written in full.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub with_full_eval: bool,
    pub log_every: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            with_full_eval: false,
            log_every: 100,
        }
    }
}

/// Grid for `bench`: the sweep runs every (k, λ, seed) combination. Each
/// grid seed `s` derives the cell's sketch seed (`s`; `s+1` for the right
/// operator of a two-sided sketch) and initialization seed (`s+2`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// One experiment: data source, sketch, objective, parameters, solver, and
/// output location. Unknown JSON fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub sketch: SketchConfig,
    pub problem: ProblemKind,
    /// Factorization rank. Defaults to the synthetic spec's rank; required
    /// for file-backed data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies the global CLI flags. A master seed `s` re-seeds the whole
    /// experiment deterministically: synthetic data uses `s`, the sketch
    /// `s+1`, and factor initialization `s+2`.
    pub fn apply_overrides(
        &mut self,
        output: Option<PathBuf>,
        seed: Option<u64>,
        with_full_eval: bool,
    ) {
        if let Some(dir) = output {
            self.output_dir = dir;
        }
        if let Some(s) = seed {
            if let DataConfig::Synthetic(spec) = &mut self.data {
                spec.seed = s;
            }
            self.sketch.seed = s.wrapping_add(1);
            self.solver.seed = s.wrapping_add(2);
        }
        if with_full_eval {
            self.eval.with_full_eval = true;
        }
    }

    /// Structural validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        if let DataConfig::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        if self.sketch.k == 0 {
            return Err(Error::Config("sketch.k must be positive".into()));
        }
        if self.sketch.variance.is_some() && self.sketch.kind != SketchKind::GaussianIid {
            return Err(Error::Config(
                "sketch.variance only applies to gaussian_iid sketches".into(),
            ));
        }
        match self.problem {
            ProblemKind::TwoSided => {
                if self.sketch.side != SketchSides::Both {
                    return Err(Error::Config(
                        "two_sided problems need sketch.side = \"both\"".into(),
                    ));
                }
                if self.params.lambda.is_some() || self.params.sigma.is_some() {
                    return Err(Error::Config(
                        "two_sided problems use lambda1/lambda2 and sigma1/sigma2, \
                         not lambda/sigma"
                            .into(),
                    ));
                }
            }
            ProblemKind::OneSidedOrthogonal | ProblemKind::OneSidedRidge => {
                if self.sketch.side != SketchSides::Left {
                    return Err(Error::Config(
                        "one-sided problems compress from the left; set sketch.side = \"left\""
                            .into(),
                    ));
                }
                if self.params.lambda1.is_some()
                    || self.params.lambda2.is_some()
                    || self.params.sigma1.is_some()
                    || self.params.sigma2.is_some()
                {
                    return Err(Error::Config(
                        "one-sided problems use lambda/sigma, not the per-side variants".into(),
                    ));
                }
                if self.problem == ProblemKind::OneSidedOrthogonal
                    && self.sketch.kind == SketchKind::GaussianIid
                {
                    return Err(Error::Config(
                        "one_sided_orthogonal needs a sketch with orthonormal rows \
                         (orthonormal_rows or rangefinder)"
                            .into(),
                    ));
                }
            }
        }
        if let Some(r) = self.rank {
            if r == 0 {
                return Err(Error::Config("rank must be positive".into()));
            }
        } else if matches!(self.data, DataConfig::File { .. }) {
            return Err(Error::Config(
                "rank is required when data comes from a file".into(),
            ));
        }
        if self.eval.log_every == 0 {
            return Err(Error::Config("eval.log_every must be positive".into()));
        }
        if let Some(bench) = &self.bench {
            if bench.k.is_empty() || bench.lambda.is_empty() || bench.seeds.is_empty() {
                return Err(Error::Config(
                    "bench grid needs non-empty k, lambda, and seeds lists".into(),
                ));
            }
        }
        self.solver.to_config().validate()?;
        Ok(())
    }

    fn resolved_rank(&self) -> Result<usize> {
        match (self.rank, &self.data) {
            (Some(r), _) => Ok(r),
            (None, DataConfig::Synthetic(spec)) => Ok(spec.r),
            (None, DataConfig::File { .. }) => Err(Error::Config(
                "rank is required when data comes from a file".into(),
            )),
        }
    }

    fn compressed_dir(&self) -> PathBuf {
        self.output_dir.join("compressed")
    }
}

/// Loads the full data matrix: from disk for file-backed configs, or by
/// regenerating the synthetic spec (bit-identical for a fixed seed).
fn load_or_generate_x(config: &ExperimentConfig) -> Result<DenseMatrix> {
    match &config.data {
        DataConfig::Synthetic(spec) => Ok(synthetic_lognormal(spec)?.0),
        DataConfig::File { path, format } => load_matrix(path, *format),
    }
}

fn make_operator(
    kind: SketchKind,
    k: usize,
    dim: usize,
    seed: u64,
    variance: Option<f64>,
    side: Side,
    x: &DenseMatrix,
) -> Result<SketchOperator> {
    match kind {
        SketchKind::GaussianIid => sample_gaussian_sketch(k, dim, seed, variance, side),
        SketchKind::OrthonormalRows => sample_orthonormal_sketch(k, dim, seed, side),
        SketchKind::Rangefinder => rangefinder_sketch(x, k, seed, side),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn crate_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Resolved one-sided regularization: what the run actually used plus the
/// certified minimum it was checked against.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedOneSided {
    pub lambda: f64,
    pub sigma: f64,
    pub sigma_certified_minimum: f64,
}

/// Resolved two-sided regularization.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedTwoSided {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma1_certified_minimum: f64,
    pub sigma2_certified_minimum: f64,
}

/// Rejects a user-supplied shift below the certified minimum up front, so
/// a bad value fails at `compress` instead of surfacing later from the
/// problem builder. Automatically resolved shifts (including the small-Gram
/// variant, which may legitimately sit below the minimum) pass through and
/// are judged at build time.
fn check_explicit_sigma(
    explicit: Option<f64>,
    required: f64,
    side: &'static str,
) -> Result<()> {
    match explicit {
        Some(sigma) if sigma < required - 1e-12 => Err(Error::InsufficientSigma {
            side,
            given: sigma,
            required,
        }),
        _ => Ok(()),
    }
}

fn resolve_one_sided(
    params: &ParamsConfig,
    record: &CompressedOneSided,
) -> Result<ResolvedOneSided> {
    let lambda = params.lambda.unwrap_or(DEFAULT_LAMBDA_ONE_SIDED);
    let required = shift_sigma(&record.a).value;
    check_explicit_sigma(params.sigma, required, "left")?;
    let sigma = params.sigma.unwrap_or(match params.sigma_variant {
        SigmaVariant::Certified => required,
        SigmaVariant::SmallGram => shift_sigma_small_gram(&record.a).value,
    });
    Ok(ResolvedOneSided {
        lambda,
        sigma,
        sigma_certified_minimum: required,
    })
}

fn resolve_two_sided(
    params: &ParamsConfig,
    record: &CompressedTwoSided,
) -> Result<ResolvedTwoSided> {
    let lambda1 = params.lambda1.unwrap_or(DEFAULT_LAMBDA_TWO_SIDED);
    let lambda2 = params.lambda2.unwrap_or(DEFAULT_LAMBDA_TWO_SIDED);
    let required1 = shift_sigma_regularized(&record.a1, lambda1, &record.q1)?.value;
    let required2 = shift_sigma_regularized(&record.a2, lambda2, &record.q2)?.value;
    check_explicit_sigma(params.sigma1, required1, "left")?;
    check_explicit_sigma(params.sigma2, required2, "right")?;
    let auto = |required: f64, op: &SketchOperator| match params.sigma_variant {
        SigmaVariant::Certified => required,
        SigmaVariant::SmallGram => shift_sigma_small_gram(op).value,
    };
    Ok(ResolvedTwoSided {
        lambda1,
        lambda2,
        sigma1: params.sigma1.unwrap_or_else(|| auto(required1, &record.a1)),
        sigma2: params.sigma2.unwrap_or_else(|| auto(required2, &record.a2)),
        sigma1_certified_minimum: required1,
        sigma2_certified_minimum: required2,
    })
}

/// Default initialization scale `sqrt(mean(row_sums) / (m·r))`.
fn default_init_scale(row_sums: &Vector, m: usize, r: usize) -> Result<f64> {
    let n = row_sums.as_slice().len().max(1);
    let mean = row_sums.as_slice().iter().sum::<f64>() / n as f64;
    let scale = (mean / (m as f64 * r as f64)).sqrt();
    if !(scale > 0.0) {
        return Err(Error::Config(
            "cannot infer an initialization scale from all-zero data; set solver.init_scale"
                .into(),
        ));
    }
    Ok(scale)
}

/// Writes trace.csv with columns `iter,objective,term:<name>...,wall_ms`.
/// Traces shorter than 10 000 points are written in full; longer ones keep
/// every `log_every`-th point. The final point is always written.
fn write_trace_csv(
    path: &Path,
    trace: &[TracePoint],
    term_names: &[String],
    log_every: usize,
) -> Result<()> {
    use std::io::Write;
    let stride = if trace.len() < 10_000 {
        1
    } else {
        log_every.max(1)
    };
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = String::from("iter,objective");
    for name in term_names {
        header.push_str(",term:");
        header.push_str(name);
    }
    header.push_str(",wall_ms");
    writeln!(w, "{header}")?;
    for (idx, pt) in trace.iter().enumerate() {
        if idx % stride != 0 && idx + 1 != trace.len() {
            continue;
        }
        let mut row = format!("{},{}", pt.iter, matio::fmt_f64(pt.objective));
        for t in &pt.terms {
            row.push(',');
            row.push_str(&matio::fmt_f64(*t));
        }
        row.push(',');
        row.push_str(&matio::fmt_f64(pt.wall_ms));
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Generates the synthetic data of the config and saves `X.csv`,
/// `U_true.csv`, `V_true.csv`, and a manifest into the output directory.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<()> {
    let spec = match &config.data {
        DataConfig::Synthetic(spec) => spec,
        DataConfig::File { .. } => {
            return Err(Error::Config(
                "generate needs a synthetic data section; file-backed data already exists".into(),
            ))
        }
    };
    let (x, truth) = synthetic_lognormal(spec)?;
    std::fs::create_dir_all(&config.output_dir)?;
    save_matrix(
        &config.output_dir.join("X.csv"),
        &x,
        MatrixFormat::CsvDense,
    )?;
    matio::write_csv_matrix(&config.output_dir.join("U_true.csv"), truth.u())?;
    matio::write_csv_matrix(&config.output_dir.join("V_true.csv"), truth.v())?;
    let manifest = serde_json::json!({
        "command": "generate",
        "crate_version": crate_version(),
        "config": serde_json::to_value(config)?,
        "data": {"m": spec.m, "n": spec.n, "r": spec.r, "seed": spec.seed},
        "x_frob": x.frob_norm(),
    });
    write_json(&config.output_dir.join("generate_manifest.json"), &manifest)
}

fn elements_json(parts: &[(&str, usize)], dense: usize) -> serde_json::Value {
    let total: usize = parts.iter().map(|(_, c)| c).sum();
    let mut map = serde_json::Map::new();
    for (name, count) in parts {
        map.insert((*name).to_string(), serde_json::json!(count));
    }
    map.insert("total".into(), serde_json::json!(total));
    map.insert("dense_data".into(), serde_json::json!(dense));
    map.insert(
        "compression_ratio".into(),
        serde_json::json!(total as f64 / dense.max(1) as f64),
    );
    serde_json::Value::Object(map)
}

/// Builds the sketch operator(s), compresses the data, and saves the
/// compressed record under `output_dir/compressed/`. The manifest records
/// the certified minimal shifts and an element-count memory accounting.
pub fn cmd_compress(config: &ExperimentConfig) -> Result<()> {
    let x = load_or_generate_x(config)?;
    let (m, n) = (x.rows(), x.cols());
    std::fs::create_dir_all(&config.output_dir)?;
    let dir = config.compressed_dir();
    let sk = &config.sketch;
    let (sigmas, elements) = match sk.side {
        SketchSides::Both => {
            let a1 = make_operator(sk.kind, sk.k, m, sk.seed, sk.variance, Side::Left, &x)?;
            let a2 = make_operator(
                sk.kind,
                sk.k,
                n,
                sk.seed.wrapping_add(1),
                sk.variance,
                Side::Right,
                &x,
            )?;
            let record = compress_two_sided(&x, &a1, &a2)?;
            let resolved = resolve_two_sided(&config.params, &record)?;
            save_compressed_two_sided(&dir, &record, resolved.sigma1, resolved.sigma2)?;
            let elems = elements_json(
                &[
                    ("operator_a1", record.a1.matrix.rows() * record.a1.matrix.cols()),
                    ("operator_a2", record.a2.matrix.rows() * record.a2.matrix.cols()),
                    ("sketch_y1", record.y1.rows() * record.y1.cols()),
                    ("sketch_y2", record.y2.rows() * record.y2.cols()),
                    ("basis_q1", record.q1.rows() * record.q1.cols()),
                    ("basis_q2", record.q2.rows() * record.q2.cols()),
                    ("row_sums", record.row_sums.as_slice().len()),
                    ("col_sums", record.col_sums.as_slice().len()),
                ],
                m * n,
            );
            (serde_json::to_value(&resolved)?, elems)
        }
        SketchSides::Left => {
            let a = make_operator(sk.kind, sk.k, m, sk.seed, sk.variance, Side::Left, &x)?;
            let record = compress_one_sided(&x, &a)?;
            let resolved = resolve_one_sided(&config.params, &record)?;
            save_compressed_one_sided(&dir, &record, resolved.sigma)?;
            let elems = elements_json(
                &[
                    ("operator_a", record.a.matrix.rows() * record.a.matrix.cols()),
                    ("sketch_y", record.y.rows() * record.y.cols()),
                    ("row_sums", record.row_sums.as_slice().len()),
                ],
                m * n,
            );
            (serde_json::to_value(&resolved)?, elems)
        }
        SketchSides::Right => {
            return Err(Error::Config(
                "right-only compression is not part of the pipeline; use \"left\" or \"both\""
                    .into(),
            ))
        }
    };
    let manifest = serde_json::json!({
        "command": "compress",
        "crate_version": crate_version(),
        "config": serde_json::to_value(config)?,
        "record_dir": "compressed",
        "resolved_params": sigmas,
        "elements": elements,
    });
    write_json(&config.output_dir.join("compress_manifest.json"), &manifest)
}

enum ResolvedParams {
    One(ResolvedOneSided),
    Two(ResolvedTwoSided),
}

impl ResolvedParams {
    fn to_json(&self) -> Result<serde_json::Value> {
        Ok(match self {
            ResolvedParams::One(p) => serde_json::to_value(p)?,
            ResolvedParams::Two(p) => serde_json::to_value(p)?,
        })
    }
}

/// Loads the compressed record, builds the configured problem, and returns
/// it together with the resolved parameters, the starting factors, and the
/// scale a random start resolved to (None for spectral starts).
/// The record itself is dropped before this returns: the solver works off
/// the problem's own term storage.
fn build_configured_problem(
    config: &ExperimentConfig,
    r: usize,
) -> Result<(SketchedMUProblem, ResolvedParams, FactorPair, Option<f64>)> {
    let dir = config.compressed_dir();
    let seed = config.solver.seed;
    match config.problem {
        ProblemKind::TwoSided => {
            let (record, _) = load_compressed_two_sided(&dir)?;
            let p = resolve_two_sided(&config.params, &record)?;
            let (f0, scale) = match config.solver.init {
                InitKind::Random => {
                    let scale = match config.solver.init_scale {
                        Some(s) => s,
                        None => default_init_scale(&record.row_sums, record.m(), r)?,
                    };
                    let f0 = init_factors(record.m(), record.n(), r, seed, scale)?;
                    (f0, Some(scale))
                }
                InitKind::Spectral => (init_factors_spectral_two_sided(&record, r, seed)?, None),
            };
            let problem =
                build_problem_two_sided(&record, r, p.lambda1, p.lambda2, p.sigma1, p.sigma2)?;
            Ok((problem, ResolvedParams::Two(p), f0, scale))
        }
        ProblemKind::OneSidedOrthogonal | ProblemKind::OneSidedRidge => {
            let (record, _) = load_compressed_one_sided(&dir)?;
            let p = resolve_one_sided(&config.params, &record)?;
            let (f0, scale) = match config.solver.init {
                InitKind::Random => {
                    let scale = match config.solver.init_scale {
                        Some(s) => s,
                        None => default_init_scale(&record.row_sums, record.m, r)?,
                    };
                    let f0 = init_factors(record.m, record.n, r, seed, scale)?;
                    (f0, Some(scale))
                }
                InitKind::Spectral => (init_factors_spectral_one_sided(&record, r, seed)?, None),
            };
            let problem = match config.problem {
                ProblemKind::OneSidedOrthogonal => {
                    build_problem_one_sided_orthogonal(&record, r, p.lambda, p.sigma)?
                }
                _ => build_problem_one_sided_ridge(&record, r, p.lambda, p.sigma)?,
            };
            Ok((problem, ResolvedParams::One(p), f0, scale))
        }
    }
}

fn solve_summary(result: &SolveResult) -> (usize, f64) {
    let last = result.trace.last().expect("trace is never empty");
    (last.iter, last.objective)
}

/// Runs the configured solver against the compressed record in
/// `output_dir/compressed/` and writes `U.csv`, `V.csv`, `trace.csv`, and a
/// manifest. The full data file is never opened unless
/// `eval.with_full_eval` is set, in which case `metrics.json` is written
/// too. Returns the stop reason so callers can map divergence to an exit
/// code.
pub fn cmd_factorize(config: &ExperimentConfig) -> Result<StopReason> {
    let solver_config = config.solver.to_config();
    solver_config.validate()?;
    let r = config.resolved_rank()?;
    let (problem, params, f0, init_scale) = build_configured_problem(config, r)?;
    let result = solve(&problem, f0, &solver_config, config.solver.method)?;

    std::fs::create_dir_all(&config.output_dir)?;
    matio::write_csv_matrix(&config.output_dir.join("U.csv"), result.factors.u())?;
    matio::write_csv_matrix(&config.output_dir.join("V.csv"), result.factors.v())?;
    let term_names = problem.term_names();
    write_trace_csv(
        &config.output_dir.join("trace.csv"),
        &result.trace,
        &term_names,
        config.eval.log_every,
    )?;
    let (iterations, final_objective) = solve_summary(&result);
    let manifest = serde_json::json!({
        "command": "factorize",
        "crate_version": crate_version(),
        "config": serde_json::to_value(config)?,
        "rank": r,
        "resolved_params": params.to_json()?,
        "init": config.solver.init,
        "init_scale": init_scale,
        "method": config.solver.method,
        "stop_reason": result.stop_reason.as_str(),
        "iterations": iterations,
        "final_objective": final_objective,
        "term_names": term_names,
    });
    write_json(
        &config.output_dir.join("factorize_manifest.json"),
        &manifest,
    )?;

    if config.eval.with_full_eval {
        let x = load_or_generate_x(config)?;
        let report = evaluate_factors(config, &x, &result.factors, &problem, &term_names)?;
        write_json(
            &config.output_dir.join("metrics.json"),
            &serde_json::to_value(&report)?,
        )?;
    }
    Ok(result.stop_reason)
}

/// Full-data metrics for a factor pair against the configured problem.
fn evaluate_factors(
    config: &ExperimentConfig,
    x: &DenseMatrix,
    factors: &FactorPair,
    problem: &SketchedMUProblem,
    term_names: &[String],
) -> Result<MetricsReport> {
    let values = problem.objective_terms(factors)?;
    let objective_terms: BTreeMap<String, f64> = term_names
        .iter()
        .cloned()
        .zip(values.iter().copied())
        .collect();
    let rescaled = match (config.problem, config.params.lambda) {
        (ProblemKind::OneSidedRidge, lambda) => Some(rescaled_relative_error(
            x,
            factors,
            lambda.unwrap_or(DEFAULT_LAMBDA_ONE_SIDED),
        )?),
        _ => None,
    };
    let residual_projection = match config.problem {
        ProblemKind::TwoSided => None,
        _ => {
            let (record, _) = load_compressed_one_sided(&config.compressed_dir())?;
            Some(residual_projection_norm(x, &record.a)?)
        }
    };
    Ok(MetricsReport {
        relative_error: relative_error(x, factors)?,
        cosine_similarity: cosine_similarity(x, factors)?,
        objective_terms,
        residual_projection,
        rescaled_relative_error: rescaled,
    })
}

/// Loads saved factors and the full data, computes the metric report, and
/// writes `metrics.json`.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<MetricsReport> {
    let x = load_or_generate_x(config)?;
    let r = config.resolved_rank()?;
    let u = matio::read_csv_matrix_exact(&config.output_dir.join("U.csv"), x.rows(), r)?;
    let v = matio::read_csv_matrix_exact(&config.output_dir.join("V.csv"), x.cols(), r)?;
    let factors = FactorPair::new(u, v)?;
    let (problem, _, _, _) = build_configured_problem(config, r)?;
    let term_names = problem.term_names();
    let report = evaluate_factors(config, &x, &factors, &problem, &term_names)?;
    write_json(
        &config.output_dir.join("metrics.json"),
        &serde_json::to_value(&report)?,
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
struct BenchRow {
    k: usize,
    lambda: f64,
    seed: u64,
    iters: usize,
    relative_error: f64,
    cosine_similarity: f64,
}

/// One bench cell: sketch with the cell's k and seeds, compress, solve, and
/// measure against the full data. Per-cell artifacts go into their own run
/// directory so parallel cells never contend on files.
fn run_bench_cell(
    config: &ExperimentConfig,
    x: &DenseMatrix,
    r: usize,
    k: usize,
    lambda: f64,
    seed: u64,
) -> Result<BenchRow> {
    let (m, n) = (x.rows(), x.cols());
    let sk = &config.sketch;
    let solver_seed = seed.wrapping_add(2);
    let mut solver_config = config.solver.to_config();
    solver_config.seed = solver_seed;

    let (problem, resolved, f0, scale) = match config.problem {
        ProblemKind::TwoSided => {
            let a1 = make_operator(sk.kind, k, m, seed, sk.variance, Side::Left, x)?;
            let a2 = make_operator(
                sk.kind,
                k,
                n,
                seed.wrapping_add(1),
                sk.variance,
                Side::Right,
                x,
            )?;
            let record = compress_two_sided(x, &a1, &a2)?;
            let params = ParamsConfig {
                lambda1: Some(lambda),
                lambda2: Some(lambda),
                sigma1: config.params.sigma1,
                sigma2: config.params.sigma2,
                sigma_variant: config.params.sigma_variant,
                ..ParamsConfig::default()
            };
            let p = resolve_two_sided(&params, &record)?;
            let (f0, scale) = match config.solver.init {
                InitKind::Random => {
                    let scale = match config.solver.init_scale {
                        Some(s) => s,
                        None => default_init_scale(&record.row_sums, m, r)?,
                    };
                    (init_factors(m, n, r, solver_seed, scale)?, Some(scale))
                }
                InitKind::Spectral => (
                    init_factors_spectral_two_sided(&record, r, solver_seed)?,
                    None,
                ),
            };
            let problem =
                build_problem_two_sided(&record, r, p.lambda1, p.lambda2, p.sigma1, p.sigma2)?;
            (problem, serde_json::to_value(&p)?, f0, scale)
        }
        ProblemKind::OneSidedOrthogonal | ProblemKind::OneSidedRidge => {
            let a = make_operator(sk.kind, k, m, seed, sk.variance, Side::Left, x)?;
            let record = compress_one_sided(x, &a)?;
            let params = ParamsConfig {
                lambda: Some(lambda),
                sigma: config.params.sigma,
                sigma_variant: config.params.sigma_variant,
                ..ParamsConfig::default()
            };
            let p = resolve_one_sided(&params, &record)?;
            let (f0, scale) = match config.solver.init {
                InitKind::Random => {
                    let scale = match config.solver.init_scale {
                        Some(s) => s,
                        None => default_init_scale(&record.row_sums, m, r)?,
                    };
                    (init_factors(m, n, r, solver_seed, scale)?, Some(scale))
                }
                InitKind::Spectral => (
                    init_factors_spectral_one_sided(&record, r, solver_seed)?,
                    None,
                ),
            };
            let problem = match config.problem {
                ProblemKind::OneSidedOrthogonal => {
                    build_problem_one_sided_orthogonal(&record, r, p.lambda, p.sigma)?
                }
                _ => build_problem_one_sided_ridge(&record, r, p.lambda, p.sigma)?,
            };
            (problem, serde_json::to_value(&p)?, f0, scale)
        }
    };

    let result = solve(&problem, f0, &solver_config, config.solver.method)?;
    let (iters, final_objective) = solve_summary(&result);

    let run_dir = config
        .output_dir
        .join("runs")
        .join(format!("k{k}_lambda{lambda}_seed{seed}"));
    std::fs::create_dir_all(&run_dir)?;
    matio::write_csv_matrix(&run_dir.join("U.csv"), result.factors.u())?;
    matio::write_csv_matrix(&run_dir.join("V.csv"), result.factors.v())?;
    write_trace_csv(
        &run_dir.join("trace.csv"),
        &result.trace,
        &problem.term_names(),
        config.eval.log_every,
    )?;
    let manifest = serde_json::json!({
        "command": "bench_cell",
        "crate_version": crate_version(),
        "k": k,
        "lambda": lambda,
        "seed": seed,
        "solver_seed": solver_seed,
        "rank": r,
        "resolved_params": resolved,
        "init": config.solver.init,
        "init_scale": scale,
        "stop_reason": result.stop_reason.as_str(),
        "iterations": iters,
        "final_objective": final_objective,
    });
    write_json(&run_dir.join("run_manifest.json"), &manifest)?;

    let relative = relative_error(x, &result.factors)?;
    // Diverged runs can end with all-zero factors; report NaN rather than
    // aborting the sweep.
    let cosine = cosine_similarity(x, &result.factors).unwrap_or(f64::NAN);
    Ok(BenchRow {
        k,
        lambda,
        seed,
        iters,
        relative_error: relative,
        cosine_similarity: cosine,
    })
}

/// Runs the bench grid (every combination of k × λ × seed, in parallel) and
/// writes `bench.csv` plus one run directory per cell.
pub fn cmd_bench(config: &ExperimentConfig) -> Result<()> {
    use rayon::prelude::*;
    let bench = config.bench.as_ref().ok_or_else(|| {
        Error::Config("bench needs a bench section with k, lambda, and seeds lists".into())
    })?;
    let x = load_or_generate_x(config)?;
    let r = config.resolved_rank()?;
    std::fs::create_dir_all(&config.output_dir)?;

    let mut combos = Vec::new();
    for &k in &bench.k {
        for &lambda in &bench.lambda {
            for &seed in &bench.seeds {
                combos.push((k, lambda, seed));
            }
        }
    }
    let rows: Result<Vec<BenchRow>> = combos
        .par_iter()
        .map(|&(k, lambda, seed)| run_bench_cell(config, &x, r, k, lambda, seed))
        .collect();
    let rows = rows?;

    use std::io::Write;
    let file = std::fs::File::create(config.output_dir.join("bench.csv"))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "k,lambda,seed,iters,relative_error,cosine_similarity")?;
    for row in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.k,
            matio::fmt_f64(row.lambda),
            row.seed,
            row.iters,
            matio::fmt_f64(row.relative_error),
            matio::fmt_f64(row.cosine_similarity)
        )?;
    }
    let manifest = serde_json::json!({
        "command": "bench",
        "crate_version": crate_version(),
        "config": serde_json::to_value(config)?,
        "rank": r,
        "grid": {"k": bench.k, "lambda": bench.lambda, "seeds": bench.seeds},
        "rows": rows.len(),
    });
    write_json(&config.output_dir.join("bench_manifest.json"), &manifest)
}
