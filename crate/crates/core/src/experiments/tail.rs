use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gaussian_hw_envelope, BoundCurve, BoundKind, UniversalConstants};
use crate::error::{Error, Result};
use crate::experiments::binomial::clopper_pearson;
use crate::matrix::{matrix_norms, quadform, symmetrize, NormBundle, SquareMatrix};
use crate::samplers::{model_stats, ModelStats, Psi2Value, SeedSpec, VectorModel, VectorSampler};

const MODULE: &str = "experiments";
pub const MIN_SAMPLES: usize = 1000;
pub const AUTO_THRESHOLD_COUNT: usize = 40;
const AUTO_LOW_QUANTILE: f64 = 0.5;
const AUTO_HIGH_QUANTILE: f64 = 0.9999;

/// Curves that appear as fixed columns in the tail CSV, in column order.
pub const CSV_CURVES: [BoundKind; 4] = [
    BoundKind::TraceCorollary,
    BoundKind::HsCorollary,
    BoundKind::GaussianHw,
    BoundKind::RudelsonVershynin,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Thresholds {
    Explicit(Vec<f64>),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Centering {
    /// `E <Aξ,ξ>` from the model's closed form.
    Analytic,
    /// Sample mean of an independent held-out batch of the same size.
    HeldOutMean,
}

#[derive(Debug, Clone)]
pub struct TailExperimentConfig {
    pub model: VectorModel,
    pub a: SquareMatrix,
    pub sample_count: usize,
    pub thresholds: Thresholds,
    pub confidence: f64,
    pub constants: UniversalConstants,
    pub seed: SeedSpec,
    pub chunk_count: usize,
    pub centering: Centering,
}

impl TailExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.a.n() != self.model.dim() {
            return Err(Error::shape(
                MODULE,
                format!("A is {0}x{0} but the model has dimension {1}", self.a.n(), self.model.dim()),
            ));
        }
        if self.sample_count < MIN_SAMPLES {
            return Err(Error::invalid(
                MODULE,
                format!("sampleCount {} below the minimum {MIN_SAMPLES}", self.sample_count),
            ));
        }
        if self.chunk_count == 0 || !self.sample_count.is_multiple_of(self.chunk_count) {
            return Err(Error::invalid(
                MODULE,
                format!("chunkCount {} does not divide sampleCount {}", self.chunk_count, self.sample_count),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid(MODULE, format!("confidence {} not in (0, 1)", self.confidence)));
        }
        if let Thresholds::Explicit(ts) = &self.thresholds {
            if ts.is_empty() {
                return Err(Error::invalid(MODULE, "threshold list is empty"));
            }
            if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::invalid(MODULE, "thresholds must be finite and nonnegative"));
            }
            if ts.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::invalid(MODULE, "thresholds must be sorted ascending"));
            }
        }
        Ok(())
    }
}

/// Draws `sample_count` values of `<Aξ, ξ>` in `chunk_count` chunks; chunk `c`
/// uses stream `base + stream_offset + c`. Output order is chunk order, so the
/// result does not depend on the thread count.
pub fn draw_quadforms(
    model: &VectorModel,
    a: &SquareMatrix,
    seed: SeedSpec,
    sample_count: usize,
    chunk_count: usize,
    stream_offset: u64,
) -> Result<Vec<f64>> {
    let chunk = sample_count / chunk_count;
    let chunks: Vec<Result<Vec<f64>>> = (0..chunk_count)
        .into_par_iter()
        .map(|c| {
            let spec = seed.with_stream(seed.stream_index + stream_offset + c as u64);
            let mut sampler = VectorSampler::new(model, spec)?;
            let mut x = vec![0.0; sampler.dim()];
            let mut out = Vec::with_capacity(chunk);
            for _ in 0..chunk {
                sampler.next_into(&mut x);
                out.push(quadform(a, &x)?);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(sample_count);
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::invalid(MODULE, "worker count must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(MODULE, format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CenteringInfo {
    pub method: Centering,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NotApplicable {
    pub curve: BoundKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TailMetadata {
    pub centering: CenteringInfo,
    pub constants: UniversalConstants,
    pub seed: SeedSpec,
    pub sample_count: usize,
    pub chunk_count: usize,
    pub confidence: f64,
    /// ψ2 of the centered vector, used as K.
    pub psi2: Psi2Value,
    /// K used by the trace corollary (larger than ψ2 when the model has a mean shift).
    pub trace_k: f64,
    pub matrix_norms: NormBundle,
    /// Norms of `sym(M^T A M)` for Gaussian-linear models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_effective_norms: Option<NormBundle>,
    pub model_dependent: bool,
    pub not_applicable: Vec<NotApplicable>,
    pub notes: Vec<String>,
    #[serde(rename = "dominance_violations")]
    pub dominance_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TailRow {
    pub t: f64,
    pub exceed_count: u64,
    pub empirical_survival: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Aligned with [`TailReport::curves`]; `None` where a curve does not apply.
    pub bounds: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TailReport {
    pub curves: Vec<BoundKind>,
    pub rows: Vec<TailRow>,
    pub metadata: TailMetadata,
}

impl TailReport {
    fn curve_index(&self, kind: BoundKind) -> Option<usize> {
        self.curves.iter().position(|k| *k == kind)
    }

    pub fn bound(&self, row: usize, kind: BoundKind) -> Option<f64> {
        self.curve_index(kind).and_then(|i| self.rows[row].bounds[i])
    }

    /// Bound is at least the empirical survival.
    pub fn dominates(&self, row: usize, kind: BoundKind) -> Option<bool> {
        self.bound(row, kind).map(|b| b >= self.rows[row].empirical_survival)
    }

    /// Bound is at least the lower confidence limit.
    pub fn dominates_ci_low(&self, row: usize, kind: BoundKind) -> Option<bool> {
        self.bound(row, kind).map(|b| b >= self.rows[row].ci_low)
    }

    /// Every row of `kind` is present and dominates the empirical survival.
    pub fn all_dominate(&self, kind: BoundKind) -> bool {
        (0..self.rows.len()).all(|r| self.dominates(r, kind) == Some(true))
    }

    fn count_violations(&self) -> usize {
        (0..self.rows.len())
            .flat_map(|r| self.curves.iter().map(move |k| (r, *k)))
            .filter(|(r, k)| self.dominates(*r, *k) == Some(false))
            .count()
    }
}

/// Nearest-rank quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Geometric grid between the median and the 99.99th percentile of the deviations.
fn auto_thresholds(sorted_dev: &[f64]) -> Vec<f64> {
    let hi = quantile_sorted(sorted_dev, AUTO_HIGH_QUANTILE);
    let mut lo = quantile_sorted(sorted_dev, AUTO_LOW_QUANTILE);
    if lo <= 0.0 {
        // fall back to the smallest positive deviation
        match sorted_dev.iter().find(|&&d| d > 0.0) {
            Some(&d) => lo = d,
            None => return vec![0.0],
        }
    }
    if hi <= lo {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..AUTO_THRESHOLD_COUNT)
        .map(|i| {
            if i == AUTO_THRESHOLD_COUNT - 1 {
                hi
            } else {
                lo * (ratio * i as f64 / (AUTO_THRESHOLD_COUNT - 1) as f64).exp()
            }
        })
        .collect()
}

/// `ψ2(ξ) <= ψ2(ξ − μ) + |μ| / sqrt(ln 2)`, the constant's ψ2 norm.
pub(crate) fn noncentered_k(stats: &ModelStats) -> f64 {
    let mu_norm = stats.mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    stats.psi2.value() + mu_norm / std::f64::consts::LN_2.sqrt()
}

struct CurveSet {
    curves: Vec<(BoundKind, Option<BoundCurve>)>,
    not_applicable: Vec<NotApplicable>,
    gaussian_norms: Option<NormBundle>,
    a_norms: NormBundle,
    trace_k: f64,
}

fn build_curves(
    model: &VectorModel,
    stats: &ModelStats,
    a: &SquareMatrix,
    consts: &UniversalConstants,
    kinds: &[BoundKind],
) -> Result<CurveSet> {
    let a_norms = matrix_norms(a)?;
    let k = stats.psi2.value();
    let centered = model.is_centered();
    let trace_k = if centered { k } else { noncentered_k(stats) };

    let gaussian_norms = if model.is_gaussian() && centered {
        let m = model.mixing_matrix()?;
        let effective = symmetrize(&m.transpose().matmul(a)?.matmul(&m)?);
        Some(matrix_norms(&effective)?)
    } else {
        None
    };
    let envelope = match gaussian_norms {
        Some(n) if !n.is_zero() => Some(gaussian_hw_envelope(&n, consts)?),
        _ => None,
    };

    let mut not_applicable = Vec::new();
    let mut na = |curve: BoundKind, reason: &str| {
        not_applicable.push(NotApplicable {
            curve,
            reason: reason.to_string(),
        });
        None
    };
    let mut curves = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let curve = match kind {
            BoundKind::TraceCorollary => Some(BoundCurve::TraceCorollary {
                norms: a_norms,
                k: trace_k,
                consts: *consts,
            }),
            BoundKind::HsCorollary => {
                if centered {
                    Some(BoundCurve::HsCorollary {
                        norms: a_norms,
                        k,
                        consts: *consts,
                    })
                } else {
                    na(kind, "requires a centered vector")
                }
            }
            BoundKind::GaussianHw => match gaussian_norms {
                Some(norms) => Some(BoundCurve::GaussianHw { norms, consts: *consts }),
                None => na(kind, "requires a centered Gaussian-linear model"),
            },
            BoundKind::ConjugateExact | BoundKind::MinForm => match envelope {
                Some(envelope) if kind == BoundKind::ConjugateExact => Some(BoundCurve::ConjugateExact { envelope }),
                Some(envelope) => Some(BoundCurve::MinForm { envelope }),
                None => na(kind, "requires the Gaussian Hanson-Wright envelope of a nonzero matrix"),
            },
            BoundKind::RudelsonVershynin => Some(BoundCurve::RudelsonVershynin {
                norms: a_norms,
                k,
                c_rv: consts.c_rv,
            }),
        };
        curves.push((kind, curve));
    }
    Ok(CurveSet {
        curves,
        not_applicable,
        gaussian_norms,
        a_norms,
        trace_k,
    })
}

/// Empirical `P(|q − E q| >= t)` with exact intervals and every requested bound.
pub fn run_tail_experiment(cfg: &TailExperimentConfig, curves: &[BoundKind], workers: usize) -> Result<TailReport> {
    cfg.validate()?;
    if curves.is_empty() {
        return Err(Error::invalid(MODULE, "no bound curves requested"));
    }
    let stats = model_stats(&cfg.model)?;
    let (center, mut deviations) = with_workers(workers, || -> Result<(f64, Vec<f64>)> {
        let q = draw_quadforms(&cfg.model, &cfg.a, cfg.seed, cfg.sample_count, cfg.chunk_count, 0)?;
        let center = match cfg.centering {
            Centering::Analytic => stats.quadform_mean(&cfg.a)?,
            Centering::HeldOutMean => {
                let held = draw_quadforms(
                    &cfg.model,
                    &cfg.a,
                    cfg.seed,
                    cfg.sample_count,
                    cfg.chunk_count,
                    cfg.chunk_count as u64,
                )?;
                held.iter().sum::<f64>() / held.len() as f64
            }
        };
        Ok((center, q.into_iter().map(|v| (v - center).abs()).collect()))
    })??;
    deviations.sort_by(f64::total_cmp);

    let thresholds = match &cfg.thresholds {
        Thresholds::Explicit(ts) => ts.clone(),
        Thresholds::Auto => auto_thresholds(&deviations),
    };
    let set = build_curves(&cfg.model, &stats, &cfg.a, &cfg.constants, curves)?;
    let n = deviations.len() as u64;

    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let below = deviations.partition_point(|&d| d < t) as u64;
        let exceed = n - below;
        let (ci_low, ci_high) = clopper_pearson(exceed, n, cfg.confidence)?;
        let bounds = set
            .curves
            .iter()
            .map(|(_, c)| c.as_ref().map(|c| c.eval(t)).transpose())
            .collect::<Result<Vec<_>>>()?;
        rows.push(TailRow {
            t,
            exceed_count: exceed,
            empirical_survival: exceed as f64 / n as f64,
            ci_low,
            ci_high,
            bounds,
        });
    }

    let mut notes = vec![
        "rudelsonVershynin assumes independent coordinates; reference curve only".to_string(),
    ];
    if matches!(stats.psi2, Psi2Value::UpperBound(_)) {
        notes.push("psi2 is an analytic upper bound, not the exact norm".to_string());
    }
    let mut report = TailReport {
        curves: curves.to_vec(),
        rows,
        metadata: TailMetadata {
            centering: CenteringInfo {
                method: cfg.centering,
                value: center,
            },
            constants: cfg.constants,
            seed: cfg.seed,
            sample_count: cfg.sample_count,
            chunk_count: cfg.chunk_count,
            confidence: cfg.confidence,
            psi2: stats.psi2,
            trace_k: set.trace_k,
            matrix_norms: set.a_norms,
            gaussian_effective_norms: set.gaussian_norms,
            model_dependent: stats.dependent,
            not_applicable: set.not_applicable,
            notes,
            dominance_violations: 0,
        },
    };
    report.metadata.dominance_violations = report.count_violations();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::default_constants;

    fn cfg(model: VectorModel, a: SquareMatrix, thresholds: Thresholds) -> TailExperimentConfig {
        TailExperimentConfig {
            model,
            a,
            sample_count: 10_000,
            thresholds,
            confidence: 0.95,
            constants: default_constants(),
            seed: SeedSpec::new(42, 0),
            chunk_count: 10,
            centering: Centering::Analytic,
        }
    }

    #[test]
    fn zero_matrix_survival() {
        let model = VectorModel::gaussian_linear(SquareMatrix::identity(3), None).unwrap();
        let c = cfg(model, SquareMatrix::zeros(3), Thresholds::Explicit(vec![0.0, 0.5, 2.0]));
        let r = run_tail_experiment(&c, &CSV_CURVES, 2).unwrap();
        assert_eq!(r.rows[0].empirical_survival, 1.0);
        assert_eq!(r.rows[1].empirical_survival, 0.0);
        assert_eq!(r.rows[2].empirical_survival, 0.0);
        assert_eq!(r.bound(0, BoundKind::TraceCorollary), Some(2.0));
    }

    #[test]
    fn survival_monotone_and_ci_brackets() {
        let model = VectorModel::equicorrelated(5, 0.4, None).unwrap();
        let c = cfg(model, SquareMatrix::identity(5), Thresholds::Auto);
        let r = run_tail_experiment(&c, &BoundKind::ALL, 3).unwrap();
        assert_eq!(r.rows.len(), AUTO_THRESHOLD_COUNT);
        for w in r.rows.windows(2) {
            assert!(w[1].empirical_survival <= w[0].empirical_survival);
            assert!(w[0].t < w[1].t);
        }
        for row in &r.rows {
            assert!(row.ci_low <= row.empirical_survival && row.empirical_survival <= row.ci_high);
        }
        for i in 0..r.rows.len() {
            let exact = r.bound(i, BoundKind::ConjugateExact).unwrap();
            let minf = r.bound(i, BoundKind::MinForm).unwrap();
            assert!(exact <= minf);
        }
    }

    #[test]
    fn config_validation() {
        let model = VectorModel::gaussian_linear(SquareMatrix::identity(2), None).unwrap();
        let mut c = cfg(model, SquareMatrix::identity(2), Thresholds::Explicit(vec![]));
        assert!(run_tail_experiment(&c, &CSV_CURVES, 1).is_err());
        c.thresholds = Thresholds::Explicit(vec![2.0, 1.0]);
        assert!(c.validate().is_err());
        c.thresholds = Thresholds::Auto;
        c.chunk_count = 3;
        assert!(c.validate().is_err());
        c.chunk_count = 10;
        c.sample_count = 500;
        assert!(c.validate().is_err());
        c.sample_count = 10_000;
        c.a = SquareMatrix::identity(3);
        assert!(c.validate().is_err());
    }

    #[test]
    fn rademacher_and_shifted_models_mark_curves() {
        let model = VectorModel::rademacher_linear(SquareMatrix::identity(3), None).unwrap();
        let c = cfg(model, SquareMatrix::identity(3), Thresholds::Explicit(vec![1.0]));
        let r = run_tail_experiment(&c, &CSV_CURVES, 1).unwrap();
        assert_eq!(r.bound(0, BoundKind::GaussianHw), None);
        assert!(r.bound(0, BoundKind::HsCorollary).is_some());

        let model = VectorModel::gaussian_linear(SquareMatrix::identity(3), Some(vec![1.0, 0.0, 0.0])).unwrap();
        let c = cfg(model, SquareMatrix::identity(3), Thresholds::Explicit(vec![1.0]));
        let r = run_tail_experiment(&c, &CSV_CURVES, 1).unwrap();
        assert_eq!(r.bound(0, BoundKind::HsCorollary), None);
        assert!(r.metadata.trace_k > r.metadata.psi2.value());
    }

    #[test]
    fn held_out_centering_is_close_to_analytic() {
        let model = VectorModel::gaussian_linear(SquareMatrix::identity(4), None).unwrap();
        let mut c = cfg(model, SquareMatrix::identity(4), Thresholds::Explicit(vec![1.0]));
        c.centering = Centering::HeldOutMean;
        let r = run_tail_experiment(&c, &CSV_CURVES, 2).unwrap();
        // mean 4, sd of the held-out mean sqrt(8/10⁴)
        assert!((r.metadata.centering.value - 4.0).abs() < 5.0 * (8.0f64 / 1e4).sqrt());
    }
}
