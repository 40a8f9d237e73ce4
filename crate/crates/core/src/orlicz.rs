//! ψ1/ψ2 Luxemburg norms and the τ (sub-gaussian standard) norm.
//!
//! The Luxemburg norm of ξ for ψ_p(t) = exp(|t|^p) − 1 is the smallest K with
//! `E exp(|ξ|^p / K^p) <= 2`. Everything here reduces to a monotone root-find
//! on that expectation, supplied either in closed form or as a sample mean.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{matrix_norms, SquareMatrix};

const MODULE: &str = "orlicz";

/// `||g||_ψ2` for a standard normal g.
pub fn gaussian_psi2() -> f64 {
    (8.0f64 / 3.0).sqrt()
}

pub const DEFAULT_REL_TOL: f64 = 1e-3;
pub const ANALYTIC_REL_TOL: f64 = 1e-9;
const MAX_BRACKET_STEPS: usize = 200;
const MAX_BISECTIONS: usize = 500;
// ψ_p >= 0 forces h >= 1; allow for rounding in closed forms and quadrature
const EXPECTATION_FLOOR: f64 = 1.0 - 1e-9;

/// Selects ψ_p(t) = exp(|t|^p) − 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrliczIndex {
    #[serde(rename = "1")]
    Psi1,
    #[serde(rename = "2")]
    Psi2,
}

impl OrliczIndex {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::Psi1),
            2 => Ok(Self::Psi2),
            other => Err(Error::invalid(MODULE, format!("Orlicz index must be 1 or 2, got {other}"))),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            Self::Psi1 => 1,
            Self::Psi2 => 2,
        }
    }

    #[inline]
    fn power(self, x: f64) -> f64 {
        match self {
            Self::Psi1 => x.abs(),
            Self::Psi2 => x * x,
        }
    }
}

/// `K -> E exp(|ξ|^p / K^p)`. Must be nonincreasing in K and free of side
/// effects; it may return `+inf` where the expectation diverges.
#[derive(Clone)]
pub struct ExpectationFunctional(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ExpectationFunctional {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        (self.0)(k)
    }

    /// Functional of `c * ξ`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.clone();
        let c = c.abs();
        Self::new(move |k| if c == 0.0 { 1.0 } else { inner.eval(k / c) })
    }

    /// `(1 - 2/K^2)^(-1/2)`: standard normal, p = 2.
    pub fn standard_normal_psi2() -> Self {
        Self::new(|k| {
            let r = 1.0 - 2.0 / (k * k);
            if r > 0.0 {
                r.powf(-0.5)
            } else {
                f64::INFINITY
            }
        })
    }

    /// `(1 - 2/K)^(-1/2)`: g² for standard normal g, p = 1 (the χ²₁ MGF at 1/K).
    pub fn chi_squared1_psi1() -> Self {
        Self::new(|k| {
            let r = 1.0 - 2.0 / k;
            if r > 0.0 {
                r.powf(-0.5)
            } else {
                f64::INFINITY
            }
        })
    }
}

impl std::fmt::Debug for ExpectationFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExpectationFunctional(..)")
    }
}

/// `t -> ln E exp(t ξ)` together with the open interval on which it is finite.
#[derive(Clone)]
pub struct LogMgf {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub domain: (f64, f64),
}

impl LogMgf {
    pub fn new(domain: (f64, f64), f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            domain,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.domain.0 || t >= self.domain.1 {
            return f64::INFINITY;
        }
        (self.f)(t)
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.domain.0 && t < self.domain.1
    }

    /// `σ² t² / 2`.
    pub fn gaussian(sigma: f64) -> Self {
        let s2 = sigma * sigma;
        Self::new((f64::NEG_INFINITY, f64::INFINITY), move |t| 0.5 * s2 * t * t)
    }

    /// `ln cosh t`, evaluated without overflow.
    pub fn rademacher() -> Self {
        Self::new((f64::NEG_INFINITY, f64::INFINITY), |t| {
            let a = t.abs();
            a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
        })
    }
}

impl std::fmt::Debug for LogMgf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LogMgf(domain = {:?})", self.domain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormEstimate {
    pub value: f64,
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub iterations: usize,
    /// Share of the plug-in expectation at `value` contributed by the top 1%
    /// of samples. Zero for closed-form functionals.
    pub heavy_tail_fraction: f64,
    /// The variable is identically zero.
    pub degenerate: bool,
}

impl NormEstimate {
    fn zero() -> Self {
        Self {
            value: 0.0,
            bracket_low: 0.0,
            bracket_high: 0.0,
            iterations: 0,
            heavy_tail_fraction: 0.0,
            degenerate: true,
        }
    }
}

fn checked_eval(h: &dyn Fn(f64) -> f64, k: f64) -> Result<f64> {
    let v = h(k);
    if v.is_nan() {
        return Err(Error::non_finite(MODULE, format!("expectation is NaN at K = {k}")));
    }
    if v < EXPECTATION_FLOOR {
        return Err(Error::domain(
            MODULE,
            format!("expectation {v} < 1 at K = {k}; not a valid E exp(|xi|^p/K^p)"),
        ));
    }
    Ok(v)
}

/// Smallest K (to `rel_tol`) with `h(K) <= 2`.
///
/// Brackets by doubling/halving from K = 1, then bisects. Returns 0 when
/// `h <= 2` even at the smallest probed K, which only happens for the zero
/// variable.
fn solve_luxemburg(h: &dyn Fn(f64) -> f64, rel_tol: f64) -> Result<NormEstimate> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(MODULE, format!("relative tolerance {rel_tol} not in (0, 1)")));
    }
    let mut k = 1.0;
    let mut hk = checked_eval(h, k)?;
    let mut iterations = 1;
    let (mut lo, mut hi);
    if hk > 2.0 {
        let mut steps = 0;
        loop {
            if steps == MAX_BRACKET_STEPS {
                return Err(Error::domain(
                    MODULE,
                    format!("bracket search failed: h(K) > 2 up to K = {k:e}"),
                ));
            }
            lo = k;
            k *= 2.0;
            hk = checked_eval(h, k)?;
            iterations += 1;
            steps += 1;
            if hk <= 2.0 {
                hi = k;
                break;
            }
        }
    } else {
        let mut steps = 0;
        loop {
            if steps == MAX_BRACKET_STEPS {
                return Ok(NormEstimate::zero());
            }
            hi = k;
            k *= 0.5;
            hk = checked_eval(h, k)?;
            iterations += 1;
            steps += 1;
            if hk > 2.0 {
                lo = k;
                break;
            }
        }
    }

    let mut bisections = 0;
    while hi - lo > rel_tol * lo {
        if bisections == MAX_BISECTIONS {
            return Err(Error::NoConvergence {
                module: MODULE,
                what: "Luxemburg bisection",
                iterations: bisections,
            });
        }
        let mid = 0.5 * (lo + hi);
        if checked_eval(h, mid)? <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
        bisections += 1;
    }
    Ok(NormEstimate {
        value: hi,
        bracket_low: lo,
        bracket_high: hi,
        iterations,
        heavy_tail_fraction: 0.0,
        degenerate: false,
    })
}

/// Luxemburg norm from a closed-form expectation functional.
///
/// `p` only labels the functional; `h` already encodes `|ξ|^p / K^p`.
pub fn luxemburg_norm_from_functional(
    h: &ExpectationFunctional,
    _p: OrliczIndex,
    rel_tol: f64,
) -> Result<NormEstimate> {
    solve_luxemburg(&|k| h.eval(k), rel_tol)
}

/// Plug-in Luxemburg norm: the same root-find on `K -> mean exp(|x_i|^p / K^p)`.
pub fn empirical_luxemburg_norm(samples: &[f64], p: OrliczIndex, rel_tol: f64) -> Result<NormEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid(MODULE, "empirical norm needs at least one sample"));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::non_finite(MODULE, format!("sample value {x}")));
    }
    let powered: Vec<f64> = samples.iter().map(|&x| p.power(x)).collect();
    if powered.iter().all(|&v| v == 0.0) {
        return Ok(NormEstimate::zero());
    }
    let count = powered.len() as f64;
    let kp = |k: f64| match p {
        OrliczIndex::Psi1 => k,
        OrliczIndex::Psi2 => k * k,
    };
    let h = |k: f64| {
        let inv = 1.0 / kp(k);
        powered.iter().map(|v| (v * inv).exp()).sum::<f64>() / count
    };
    let mut est = solve_luxemburg(&h, rel_tol)?;

    let inv = 1.0 / kp(est.value);
    let mut terms: Vec<f64> = powered.iter().map(|v| (v * inv).exp()).collect();
    terms.sort_by(|a, b| b.total_cmp(a));
    let top = terms.len().div_ceil(100);
    let total: f64 = terms.iter().sum();
    est.heavy_tail_fraction = terms[..top].iter().sum::<f64>() / total;
    Ok(est)
}

/// `400` log-spaced |t| values per sign in `[1e-3, 1e3]`, restricted to the
/// interior of `domain`.
pub fn default_tau_grid(domain: (f64, f64)) -> Vec<f64> {
    const PER_SIGN: usize = 400;
    let (lmin, lmax) = (-3.0f64, 3.0f64);
    let mut grid = Vec::with_capacity(2 * PER_SIGN);
    for i in 0..PER_SIGN {
        let t = 10f64.powf(lmin + (lmax - lmin) * i as f64 / (PER_SIGN - 1) as f64);
        for s in [-t, t] {
            if s > domain.0 && s < domain.1 {
                grid.push(s);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid
}

/// Smallest K with `ln E e^{tξ} <= K² t² / 2` on every grid point:
/// `sup_t sqrt(2 max(m(t), 0)) / |t|`.
pub fn tau_from_logmgf(m: &LogMgf, t_grid: &[f64]) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::invalid(MODULE, "empty t grid"));
    }
    let mut sup: f64 = 0.0;
    for &t in t_grid {
        if t == 0.0 {
            return Err(Error::invalid(MODULE, "t grid must not contain 0"));
        }
        let v = m.eval(t);
        if !v.is_finite() {
            return Err(Error::domain(
                MODULE,
                format!("log-MGF is {v} at t = {t}; restrict the grid to the MGF domain"),
            ));
        }
        sup = sup.max((2.0 * v.max(0.0)).sqrt() / t.abs());
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianVectorNorms {
    pub tau_upper: f64,
    pub psi2: f64,
}

/// Norms of the Gaussian vector `M g`: `τ(Mg) <= ||M||` and
/// `||Mg||_ψ2 = ||M|| sqrt(8/3)` (sup over unit t of the N(0, |M^T t|²) marginal).
pub fn gaussian_vector_norms(m: &SquareMatrix) -> Result<GaussianVectorNorms> {
    let op = matrix_norms(m)?.operator_norm;
    Ok(GaussianVectorNorms {
        tau_upper: op,
        psi2: op * gaussian_psi2(),
    })
}
