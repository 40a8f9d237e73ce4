//! Subcommand implementations behind the `qform-tails` binary.
//!
//! Every subcommand reads one JSON config, writes its outputs into `out_dir`
//! and echoes the resolved config (after `--seed`) into each JSON output.
//! Relative paths inside a config are resolved against the config's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{gaussian_hw_envelope, BoundCurve, BoundKind, UniversalConstants};
use crate::calibration::{
    calibrate_constants, centered_chi_squared1_psi1_functional, centered_exponential_psi1_functional,
    default_constants, laplace_psi1_functional, matched_c_rv, standard_benchmarks, Calibration, GridSpec,
};
use crate::error::{Error, Result};
use crate::experiments::{
    run_tail_experiment, Centering, TailExperimentConfig, TailReport, Thresholds, CSV_CURVES,
};
use crate::io::{
    ensure_dir, fmt_f64, fmt_opt, fmt_opt_bool, read_csv_rows, read_square_matrix, read_text, resolve, write_json,
    write_text, CsvBuilder,
};
use crate::matrix::{matrix_norms, symmetrize, SquareMatrix};
use crate::orlicz::{
    empirical_luxemburg_norm, gaussian_vector_norms, luxemburg_norm_from_functional, ExpectationFunctional,
    NormEstimate, OrliczIndex, ANALYTIC_REL_TOL, DEFAULT_REL_TOL,
};
use crate::regression::{
    build_artifacts, excess_loss_table, hat_invariants, regression_identity_check, FixedDesign,
};
use crate::samplers::{model_stats, SeedSpec, Stream, VectorModel, VectorSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Norms,
    Bounds,
    Simulate,
    Regression,
    Calibrate,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Norms => "norms",
            Subcommand::Bounds => "bounds",
            Subcommand::Simulate => "simulate",
            Subcommand::Regression => "regression",
            Subcommand::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommandConfig {
    pub subcommand: Subcommand,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub workers: usize,
}

/// Files written and a one-line summary for stdout.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

// ---- config building blocks ----

/// A square matrix given as a CSV path or inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Path(String),
    Spec(MatrixSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MatrixSpec {
    Identity(usize),
    Zeros(usize),
    Diag(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSource {
    pub fn load(&self, base: &Path) -> Result<SquareMatrix> {
        match self {
            MatrixSource::Path(p) => read_square_matrix(&resolve(base, p)),
            MatrixSource::Spec(MatrixSpec::Identity(n)) => Ok(SquareMatrix::identity(*n)),
            MatrixSource::Spec(MatrixSpec::Zeros(n)) => Ok(SquareMatrix::zeros(*n)),
            MatrixSource::Spec(MatrixSpec::Diag(d)) => Ok(SquareMatrix::diag(d)),
            MatrixSource::Spec(MatrixSpec::Rows(r)) => SquareMatrix::from_rows(r),
        }
    }
}

/// Rectangular rows given as a CSV path or inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowsSource {
    Path(String),
    Rows(Vec<Vec<f64>>),
}

impl RowsSource {
    pub fn load(&self, base: &Path) -> Result<Vec<Vec<f64>>> {
        match self {
            RowsSource::Path(p) => read_csv_rows(&resolve(base, p)),
            RowsSource::Rows(r) => Ok(r.clone()),
        }
    }
}

/// Constants from a calibration file path or inline values; absent means the
/// shipped calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantsSource {
    Path(String),
    Inline(InlineConstants),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "cRV", default)]
    pub c_rv: Option<f64>,
}

fn load_constants(src: &Option<ConstantsSource>, base: &Path) -> Result<UniversalConstants> {
    match src {
        None => Ok(default_constants()),
        Some(ConstantsSource::Path(p)) => Calibration::load(&resolve(base, p))?.constants(),
        Some(ConstantsSource::Inline(c)) => {
            UniversalConstants::new(c.c1, c.c2, c.c_rv.unwrap_or_else(|| matched_c_rv(c.c1)))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "camelCase")]
pub enum ModelSpec {
    GaussianLinear {
        #[serde(rename = "M")]
        m: MatrixSource,
        #[serde(default)]
        mu: Option<Vec<f64>>,
    },
    RademacherLinear {
        #[serde(rename = "M")]
        m: MatrixSource,
        #[serde(default)]
        mu: Option<Vec<f64>>,
    },
    EquicorrelatedGaussian {
        n: usize,
        rho: f64,
        #[serde(default)]
        mu: Option<Vec<f64>>,
    },
}

impl ModelSpec {
    pub fn load(&self, base: &Path) -> Result<VectorModel> {
        match self {
            ModelSpec::GaussianLinear { m, mu } => VectorModel::gaussian_linear(m.load(base)?, mu.clone()),
            ModelSpec::RademacherLinear { m, mu } => VectorModel::rademacher_linear(m.load(base)?, mu.clone()),
            ModelSpec::EquicorrelatedGaussian { n, rho, mu } => VectorModel::equicorrelated(*n, *rho, mu.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    List(Vec<f64>),
    Keyword(String),
}

impl ThresholdSpec {
    fn resolve(&self) -> Result<Thresholds> {
        match self {
            ThresholdSpec::List(v) => Ok(Thresholds::Explicit(v.clone())),
            ThresholdSpec::Keyword(k) if k == "auto" => Ok(Thresholds::Auto),
            ThresholdSpec::Keyword(k) => Err(Error::Config(format!("thresholds: expected a list or \"auto\", got \"{k}\""))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    List(Vec<f64>),
    Range(TRange),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    /// Geometric spacing (requires `start > 0`).
    #[serde(default)]
    pub log: bool,
}

impl TGrid {
    fn values(&self) -> Result<Vec<f64>> {
        let ts = match self {
            TGrid::List(v) => v.clone(),
            TGrid::Range(r) => {
                if r.count == 0 || !(r.stop >= r.start) || r.start < 0.0 {
                    return Err(Error::Config(format!("bad t range {r:?}")));
                }
                if r.count == 1 {
                    vec![r.start]
                } else if r.log {
                    if !(r.start > 0.0) {
                        return Err(Error::Config("log t range needs start > 0".into()));
                    }
                    let ratio = (r.stop / r.start).ln();
                    (0..r.count)
                        .map(|i| r.start * (ratio * i as f64 / (r.count - 1) as f64).exp())
                        .collect()
                } else {
                    (0..r.count)
                        .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64)
                        .collect()
                }
            }
        };
        if ts.is_empty() || ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("t grid must be a nonempty list of finite t >= 0".into()));
        }
        Ok(ts)
    }
}

fn parse_curves(names: &Option<Vec<String>>) -> Result<Vec<BoundKind>> {
    match names {
        None => Ok(CSV_CURVES.to_vec()),
        Some(v) if v.is_empty() => Err(Error::Config("curves list is empty".into())),
        Some(v) => v
            .iter()
            .map(|s| BoundKind::parse(s).map_err(|e| Error::Config(e.to_string())))
            .collect(),
    }
}

// ---- per-subcommand schemas ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NormsConfig {
    /// Orlicz index for sample-based estimates.
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Inline samples.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// CSV of samples (all entries are pooled).
    #[serde(default)]
    pub samples: Option<String>,
    /// Closed-form benchmark functional by name.
    #[serde(default)]
    pub benchmark: Option<String>,
    /// Number of standard normal draws to estimate from (uses the seed).
    #[serde(default)]
    pub normal_draws: Option<usize>,
    /// Matrix whose operator, Hilbert-Schmidt and trace norms are reported.
    #[serde(default)]
    pub matrix: Option<MatrixSource>,
    /// Mixing matrix M of a Gaussian vector M g.
    #[serde(default)]
    pub gaussian_vector: Option<MatrixSource>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stream_index: Option<u64>,
}

fn default_p() -> u32 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(rename = "A")]
    pub a: MatrixSource,
    /// ψ2 bound K of the vector; defaults to that of a standard Gaussian vector.
    #[serde(rename = "K", default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub constants: Option<ConstantsSource>,
    pub t: TGrid,
    #[serde(default)]
    pub curves: Option<Vec<String>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    #[serde(rename = "A")]
    pub a: MatrixSource,
    pub sample_count: usize,
    pub thresholds: ThresholdSpec,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub constants: Option<ConstantsSource>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream_index: u64,
    pub chunk_count: usize,
    #[serde(default = "default_centering")]
    pub centering: Centering,
    #[serde(default)]
    pub curves: Option<Vec<String>>,
}

fn default_confidence() -> f64 {
    0.95
}

fn default_centering() -> Centering {
    Centering::Analytic
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub sample_count: usize,
    pub chunk_count: usize,
    #[serde(default = "default_auto")]
    pub thresholds: ThresholdSpec,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_auto() -> ThresholdSpec {
    ThresholdSpec::Keyword("auto".into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RegressionConfig {
    /// `d × n` design, one row per feature.
    #[serde(rename = "X")]
    pub x: RowsSource,
    /// Noise model (dimension n); defaults to standard Gaussian noise.
    #[serde(default)]
    pub noise: Option<ModelSpec>,
    /// ψ2 bound K of the noise; defaults to the model's centered ψ2.
    #[serde(rename = "K", default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub constants: Option<ConstantsSource>,
    #[serde(default = "default_us")]
    pub u: Vec<f64>,
    #[serde(default = "default_identity_trials")]
    pub identity_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream_index: u64,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloSpec>,
}

fn default_us() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
}

fn default_identity_trials() -> usize {
    100
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default)]
    pub grid_spec: Option<GridSpec>,
    /// Subset of the standard benchmarks by name; all when absent.
    #[serde(default)]
    pub benchmarks: Option<Vec<String>>,
    /// Accepted so `--seed` works uniformly; calibration draws nothing.
    #[serde(default)]
    pub seed: Option<u64>,
}

// ---- driver ----

struct Loaded {
    value: Value,
    base: PathBuf,
}

fn load_config(cfg: &CommandConfig) -> Result<Loaded> {
    let text = read_text(&cfg.config_path)?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", cfg.config_path.display())))?;
    if !value.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    if let Some(seed) = cfg.seed_override {
        value["seed"] = json!(seed);
    }
    let base = cfg
        .config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { value, base })
}

fn parse<T: for<'de> Deserialize<'de>>(loaded: &Loaded, what: &str) -> Result<T> {
    serde_json::from_value(loaded.value.clone()).map_err(|e| Error::Config(format!("{what} config: {e}")))
}

pub fn run_command(cfg: &CommandConfig) -> Result<CommandOutput> {
    let loaded = load_config(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    match cfg.subcommand {
        Subcommand::Norms => run_norms(&parse(&loaded, "norms")?, &loaded, &cfg.out_dir),
        Subcommand::Bounds => run_bounds(&parse(&loaded, "bounds")?, &loaded, &cfg.out_dir),
        Subcommand::Simulate => run_simulate(&parse(&loaded, "simulate")?, &loaded, &cfg.out_dir, cfg.workers),
        Subcommand::Regression => {
            run_regression(&parse(&loaded, "regression")?, &loaded, &cfg.out_dir, cfg.workers)
        }
        Subcommand::Calibrate => run_calibrate(&parse(&loaded, "calibrate")?, &loaded, &cfg.out_dir),
    }
}

/// Closed-form expectation functionals by name, with their Orlicz index.
pub fn named_functional(name: &str) -> Result<(ExpectationFunctional, OrliczIndex)> {
    Ok(match name {
        "standardNormal" => (ExpectationFunctional::standard_normal_psi2(), OrliczIndex::Psi2),
        "rademacher" => (ExpectationFunctional::new(|k| (1.0 / (k * k)).exp()), OrliczIndex::Psi2),
        "chiSquared1" => (ExpectationFunctional::chi_squared1_psi1(), OrliczIndex::Psi1),
        "centeredChiSquared1" => (centered_chi_squared1_psi1_functional(), OrliczIndex::Psi1),
        "centeredExponential" => (centered_exponential_psi1_functional(), OrliczIndex::Psi1),
        "centeredLaplace" => (laplace_psi1_functional(), OrliczIndex::Psi1),
        other => return Err(Error::Config(format!("unknown benchmark '{other}'"))),
    })
}

fn run_norms(c: &NormsConfig, loaded: &Loaded, out: &Path) -> Result<CommandOutput> {
    let p = OrliczIndex::from_p(c.p).map_err(|e| Error::Config(e.to_string()))?;
    let rel_tol = c.rel_tol.unwrap_or(DEFAULT_REL_TOL);
    let seed = SeedSpec::new(c.seed.unwrap_or(0), c.stream_index.unwrap_or(0));
    let mut results = serde_json::Map::new();
    if let Some(v) = &c.values {
        results.insert("values".into(), serde_json::to_value(empirical_luxemburg_norm(v, p, rel_tol)?)?);
    }
    if let Some(path) = &c.samples {
        let pooled: Vec<f64> = read_csv_rows(&resolve(&loaded.base, path))?.into_iter().flatten().collect();
        results.insert("samples".into(), serde_json::to_value(empirical_luxemburg_norm(&pooled, p, rel_tol)?)?);
    }
    if let Some(name) = &c.benchmark {
        let (h, index) = named_functional(name)?;
        let est: NormEstimate = luxemburg_norm_from_functional(&h, index, ANALYTIC_REL_TOL)?;
        results.insert(
            "benchmark".into(),
            json!({ "name": name, "p": index.p(), "estimate": est }),
        );
    }
    if let Some(count) = c.normal_draws {
        let mut stream = Stream::new(seed);
        let draws: Vec<f64> = (0..count).map(|_| stream.normal()).collect();
        results.insert("normalDraws".into(), serde_json::to_value(empirical_luxemburg_norm(&draws, p, rel_tol)?)?);
    }
    if let Some(m) = &c.matrix {
        results.insert("matrix".into(), serde_json::to_value(matrix_norms(&m.load(&loaded.base)?)?)?);
    }
    if let Some(m) = &c.gaussian_vector {
        results.insert(
            "gaussianVector".into(),
            serde_json::to_value(gaussian_vector_norms(&m.load(&loaded.base)?)?)?,
        );
    }
    if results.is_empty() {
        return Err(Error::Config(
            "norms config needs one of values, samples, benchmark, normalDraws, matrix, gaussianVector".into(),
        ));
    }
    let doc = json!({ "config": loaded.value, "seed": seed, "results": results });
    let path = out.join("norms.json");
    write_json(&path, &doc)?;
    Ok(CommandOutput {
        files: vec![path],
        summary: json!({ "results": doc["results"] }),
    })
}

/// Curves for a vector with ψ2 bound `k`; the envelope-based and Gaussian
/// curves treat the vector as standard Gaussian and use `sym(A)`.
fn bounds_curves(a: &SquareMatrix, k: f64, consts: &UniversalConstants, kinds: &[BoundKind]) -> Result<Vec<Option<BoundCurve>>> {
    let norms = matrix_norms(a)?;
    let sym_norms = matrix_norms(&symmetrize(a))?;
    let envelope = if sym_norms.is_zero() {
        None
    } else {
        Some(gaussian_hw_envelope(&sym_norms, consts)?)
    };
    Ok(kinds
        .iter()
        .map(|kind| match kind {
            BoundKind::ConjugateExact => envelope.map(|envelope| BoundCurve::ConjugateExact { envelope }),
            BoundKind::MinForm => envelope.map(|envelope| BoundCurve::MinForm { envelope }),
            BoundKind::TraceCorollary => Some(BoundCurve::TraceCorollary { norms, k, consts: *consts }),
            BoundKind::HsCorollary => Some(BoundCurve::HsCorollary { norms, k, consts: *consts }),
            BoundKind::GaussianHw => Some(BoundCurve::GaussianHw {
                norms: sym_norms,
                consts: *consts,
            }),
            BoundKind::RudelsonVershynin => Some(BoundCurve::RudelsonVershynin {
                norms,
                k,
                c_rv: consts.c_rv,
            }),
        })
        .collect())
}

fn run_bounds(c: &BoundsConfig, loaded: &Loaded, out: &Path) -> Result<CommandOutput> {
    let a = c.a.load(&loaded.base)?;
    let consts = load_constants(&c.constants, &loaded.base)?;
    let k = c.k.unwrap_or_else(crate::orlicz::gaussian_psi2);
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Config(format!("K must be positive, got {k}")));
    }
    let ts = c.t.values()?;
    let kinds = parse_curves(&c.curves)?;
    let curves = bounds_curves(&a, k, &consts, &kinds)?;

    let mut header = vec!["t".to_string()];
    header.extend(kinds.iter().map(|k| format!("bound_{}", k.name())));
    header.extend(kinds.iter().map(|k| format!("clamp_{}", k.name())));
    let mut csv = CsvBuilder::new(&header);
    for &t in &ts {
        let values = curves
            .iter()
            .map(|c| c.as_ref().map(|c| c.eval(t)).transpose())
            .collect::<Result<Vec<_>>>()?;
        let mut row = vec![fmt_f64(t)];
        row.extend(values.iter().map(|v| fmt_opt(*v)));
        row.extend(values.iter().map(|v| fmt_opt_bool(v.map(|b| b > 1.0))));
        csv.row(&row);
    }
    let csv_path = out.join("bounds.csv");
    write_text(&csv_path, &csv.finish())?;
    let meta = json!({
        "config": loaded.value,
        "seed": SeedSpec::new(c.seed.unwrap_or(0), 0),
        "constants": consts,
        "K": k,
        "matrixNorms": matrix_norms(&a)?,
        "symmetrizedNorms": matrix_norms(&symmetrize(&a))?,
        "csv": "bounds.csv",
    });
    let meta_path = out.join("bounds.json");
    write_json(&meta_path, &meta)?;
    Ok(CommandOutput {
        files: vec![csv_path, meta_path],
        summary: json!({ "rows": ts.len(), "csv": "bounds.csv" }),
    })
}

/// CSV for a tail report. The four fixed curves always occupy their columns
/// (blank when not computed); any other requested curves follow.
pub fn tail_report_csv(report: &TailReport) -> String {
    let extras: Vec<BoundKind> = report
        .curves
        .iter()
        .copied()
        .filter(|k| !CSV_CURVES.contains(k))
        .collect();
    let all: Vec<BoundKind> = CSV_CURVES.iter().copied().chain(extras.iter().copied()).collect();
    let mut header: Vec<String> = ["t", "empirical", "ci_low", "ci_high"].map(String::from).to_vec();
    header.extend(CSV_CURVES.iter().map(|k| format!("bound_{}", k.name())));
    header.extend(CSV_CURVES.iter().map(|k| format!("dominates_{}", k.name())));
    header.extend(CSV_CURVES.iter().map(|k| format!("dominates_ci_low_{}", k.name())));
    for k in &extras {
        header.push(format!("bound_{}", k.name()));
        header.push(format!("dominates_{}", k.name()));
        header.push(format!("dominates_ci_low_{}", k.name()));
    }
    header.extend(all.iter().map(|k| format!("clamp_{}", k.name())));
    header.push("exceed_count".into());

    let mut csv = CsvBuilder::new(&header);
    for (i, row) in report.rows.iter().enumerate() {
        let mut f = vec![
            fmt_f64(row.t),
            fmt_f64(row.empirical_survival),
            fmt_f64(row.ci_low),
            fmt_f64(row.ci_high),
        ];
        f.extend(CSV_CURVES.iter().map(|&k| fmt_opt(report.bound(i, k))));
        f.extend(CSV_CURVES.iter().map(|&k| fmt_opt_bool(report.dominates(i, k))));
        f.extend(CSV_CURVES.iter().map(|&k| fmt_opt_bool(report.dominates_ci_low(i, k))));
        for &k in &extras {
            f.push(fmt_opt(report.bound(i, k)));
            f.push(fmt_opt_bool(report.dominates(i, k)));
            f.push(fmt_opt_bool(report.dominates_ci_low(i, k)));
        }
        f.extend(all.iter().map(|&k| fmt_opt_bool(report.bound(i, k).map(|b| b > 1.0))));
        f.push(row.exceed_count.to_string());
        csv.row(&f);
    }
    csv.finish()
}

fn run_simulate(c: &SimulateConfig, loaded: &Loaded, out: &Path, workers: usize) -> Result<CommandOutput> {
    let cfg = TailExperimentConfig {
        model: c.model.load(&loaded.base)?,
        a: c.a.load(&loaded.base)?,
        sample_count: c.sample_count,
        thresholds: c.thresholds.resolve()?,
        confidence: c.confidence,
        constants: load_constants(&c.constants, &loaded.base)?,
        seed: SeedSpec::new(c.seed, c.stream_index),
        chunk_count: c.chunk_count,
        centering: c.centering,
    };
    let kinds = parse_curves(&c.curves)?;
    let report = run_tail_experiment(&cfg, &kinds, workers)?;
    let csv_path = out.join("tail_report.csv");
    write_text(&csv_path, &tail_report_csv(&report))?;
    let violations = report.metadata.dominance_violations;
    let meta = json!({
        "config": loaded.value,
        "seed": cfg.seed,
        "curves": report.curves,
        "metadata": report.metadata,
        "dominance_violations": violations,
        "csv": "tail_report.csv",
    });
    let meta_path = out.join("tail_report.json");
    write_json(&meta_path, &meta)?;
    Ok(CommandOutput {
        files: vec![csv_path, meta_path],
        summary: json!({ "dominance_violations": violations, "csv": "tail_report.csv" }),
    })
}

fn run_regression(c: &RegressionConfig, loaded: &Loaded, out: &Path, workers: usize) -> Result<CommandOutput> {
    let design = FixedDesign::new(c.x.load(&loaded.base)?)?;
    let n = design.n();
    let artifacts = build_artifacts(&design)?;
    let invariants = hat_invariants(&artifacts)?;
    let consts = load_constants(&c.constants, &loaded.base)?;
    let model = match &c.noise {
        Some(spec) => spec.load(&loaded.base)?,
        None => VectorModel::gaussian_linear(SquareMatrix::identity(n), None)?,
    };
    if model.dim() != n {
        return Err(Error::Config(format!("noise model has dimension {}, design has n = {n}", model.dim())));
    }
    let stats = model_stats(&model)?;
    let k = c.k.unwrap_or(stats.psi2.value());
    let seed = SeedSpec::new(c.seed, c.stream_index);

    let mut sampler = VectorSampler::new(&model, seed)?;
    let mut xi = vec![0.0; n];
    let mut identity_residual: f64 = 0.0;
    let mut identity_scaled: f64 = 0.0;
    for _ in 0..c.identity_trials {
        sampler.next_into(&mut xi);
        let res = regression_identity_check(&design, &artifacts, &xi, &stats.mean)?;
        let r = crate::regression::ols_and_excess_loss(&design, &artifacts, &xi, &stats.mean)?.excess_loss;
        identity_residual = identity_residual.max(res);
        identity_scaled = identity_scaled.max(res / r.max(1.0));
    }

    let table = excess_loss_table(&artifacts, k, &consts, &c.u)?;
    let mut csv = CsvBuilder::new(&[
        "u",
        "threshold",
        "prob_bound",
        "threshold_conservative",
        "prob_bound_conservative",
    ]
    .map(String::from));
    for (lit, cons) in table.literal.iter().zip(&table.conservative) {
        csv.row(&[
            fmt_f64(lit.u),
            fmt_f64(lit.threshold),
            fmt_f64(lit.prob_bound),
            fmt_f64(cons.threshold),
            fmt_f64(cons.prob_bound),
        ]);
    }
    let table_path = out.join("regression_bounds.csv");
    write_text(&table_path, &csv.finish())?;
    let mut files = vec![table_path];

    let monte_carlo = match &c.monte_carlo {
        Some(mc) => {
            let cfg = TailExperimentConfig {
                model: model.clone(),
                a: artifacts.a.clone(),
                sample_count: mc.sample_count,
                thresholds: mc.thresholds.resolve()?,
                confidence: mc.confidence,
                constants: consts,
                // disjoint from the identity-check stream
                seed: seed.with_stream(seed.stream_index + 1),
                chunk_count: mc.chunk_count,
                centering: Centering::Analytic,
            };
            let report = run_tail_experiment(&cfg, &CSV_CURVES, workers)?;
            let path = out.join("regression_tail.csv");
            write_text(&path, &tail_report_csv(&report))?;
            files.push(path);
            Some(json!({
                "csv": "regression_tail.csv",
                "hsCorollaryDominates": report.all_dominate(BoundKind::HsCorollary),
                "metadata": report.metadata,
                "dominance_violations": report.metadata.dominance_violations,
            }))
        }
        None => None,
    };

    let doc = json!({
        "config": loaded.value,
        "seed": seed,
        "constants": consts,
        "K": k,
        "hatInvariants": invariants,
        "hatInvariantsHold": invariants.holds(1e-8),
        "identityTrials": c.identity_trials,
        "identityResidual": identity_residual,
        "identityResidualRelative": identity_scaled,
        "identityHolds": identity_scaled <= 1e-8,
        "excessLoss": table,
        "boundTableCsv": "regression_bounds.csv",
        "monteCarlo": monte_carlo,
    });
    let path = out.join("regression.json");
    write_json(&path, &doc)?;
    files.push(path);
    Ok(CommandOutput {
        files,
        summary: json!({
            "hatInvariantsHold": doc["hatInvariantsHold"],
            "identityHolds": doc["identityHolds"],
        }),
    })
}

fn run_calibrate(c: &CalibrateConfig, loaded: &Loaded, out: &Path) -> Result<CommandOutput> {
    let mut benchmarks = standard_benchmarks()?;
    if let Some(names) = &c.benchmarks {
        for name in names {
            if !benchmarks.iter().any(|b| b.name == name) {
                return Err(Error::Config(format!("unknown benchmark '{name}'")));
            }
        }
        benchmarks.retain(|b| names.iter().any(|n| n == b.name));
    }
    let grid = c.grid_spec.unwrap_or_default();
    let mut cal = calibrate_constants(&benchmarks, &grid)?;
    cal.resolved_config = Some(loaded.value.clone());
    let path = out.join("calibration.json");
    write_json(&path, &cal)?;
    Ok(CommandOutput {
        files: vec![path],
        summary: json!({ "C1": cal.c1, "C2": cal.c2, "cRV": cal.c_rv }),
    })
}
