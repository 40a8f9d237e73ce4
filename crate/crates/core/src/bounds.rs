//! Closed-form tail bounds for quadratic forms.
//!
//! Every bound is a Chernoff bound obtained from an MGF envelope
//! `E e^{tη} <= e^{a²t²/2}` on `|t| <= b`: the exact rate is the convex
//! conjugate of the envelope, and the usual Bernstein "min" form is a
//! weaker lower estimate of that conjugate.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NormBundle;

const MODULE: &str = "bounds";

/// MGF envelope: `E e^{tη} <= exp(a² t² / 2)` for `|t| <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfEnvelope {
    pub a: f64,
    pub b: f64,
}

impl MgfEnvelope {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(MODULE, format!("envelope needs a, b > 0, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    /// `φ_{a,b}(t)`: `a²t²/2` on `|t| <= b`, infinite outside.
    pub fn phi(&self, t: f64) -> f64 {
        if t.abs() <= self.b {
            0.5 * self.a * self.a * t * t
        } else {
            f64::INFINITY
        }
    }
}

/// Calibrated universal constants. `c3` and `c4` are always derived from
/// `c1`, `c2`; `c_rv` is the free constant of the independent-coordinate
/// Hanson-Wright reference bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "cRV")]
    pub c_rv: f64,
}

impl UniversalConstants {
    pub fn new(c1: f64, c2: f64, c_rv: f64) -> Result<Self> {
        for (name, v) in [("C1", c1), ("C2", c2), ("cRV", c_rv)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(MODULE, format!("{name} must be positive, got {v}")));
            }
        }
        let c3 = 2.0 * SQRT_2 * c1 * c2;
        Ok(Self {
            c1,
            c2,
            c3,
            c4: 2.0 * c3,
            c_rv,
        })
    }
}

/// The conjugate `φ*_{a,b}(s)`: `s²/(2a²)` up to `s = a²b`, then `bs − a²b²/2`.
pub fn conjugate_g(env: &MgfEnvelope, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(MODULE, format!("conjugate rate needs s >= 0, got {s}")));
    }
    let a2 = env.a * env.a;
    Ok(if s <= a2 * env.b {
        s * s / (2.0 * a2)
    } else {
        env.b * s - 0.5 * a2 * env.b * env.b
    })
}

/// Brute-force conjugate `sup_{t in grid} { st − a²t²/2 }` over a grid inside `[−b, b]`.
pub fn numeric_conjugate(a: f64, b: f64, s: f64, t_grid: &[f64]) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::invalid(MODULE, "empty t grid"));
    }
    let env = MgfEnvelope::new(a, b)?;
    Ok(t_grid
        .iter()
        .map(|&t| s * t - env.phi(t))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `n` uniform points on `[−b, b]`; includes both endpoints and, for odd `n`, zero.
pub fn symmetric_grid(b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| -b + 2.0 * b * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TailForm {
    /// `2 e^{−g(s)}`.
    Exact,
    /// `2 exp(−min{s²/(2a²), bs/2})`.
    MinForm,
}

pub fn tail_bound_from_envelope(env: &MgfEnvelope, s: f64, form: TailForm) -> Result<f64> {
    let rate = match form {
        TailForm::Exact => conjugate_g(env, s)?,
        TailForm::MinForm => {
            if !(s >= 0.0) {
                return Err(Error::domain(MODULE, format!("threshold must be >= 0, got {s}")));
            }
            (s * s / (2.0 * env.a * env.a)).min(0.5 * env.b * s)
        }
    };
    Ok(2.0 * (-rate).exp())
}

/// Envelope for a centered sub-exponential variable with the given ψ1 norm:
/// `a = √2 C1 ψ1`, `b = 1/(C1 ψ1)`.
pub fn subexp_envelope(psi1: f64, consts: &UniversalConstants) -> Result<MgfEnvelope> {
    if !(psi1 > 0.0 && psi1.is_finite()) {
        return Err(Error::invalid(MODULE, format!("ψ1 norm must be positive, got {psi1}")));
    }
    MgfEnvelope::new(SQRT_2 * consts.c1 * psi1, 1.0 / (consts.c1 * psi1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Psi1Variant {
    /// `||A||_tr K²`.
    Trace,
    /// `2 C2 ||A||_HS K²`; needs a symmetric PSD matrix.
    HsPsd,
    /// `2√2 C2 ||A||_HS K²`; any matrix.
    HsGeneral,
}

/// Upper bound on `||<Aξ, ξ>||_ψ1` (doubled when `centered`, for `q − E q`).
///
/// `matrix_is_psd` must be asserted by the caller for [`Psi1Variant::HsPsd`].
pub fn psi1_quadform_bound(
    norms: &NormBundle,
    k: f64,
    consts: &UniversalConstants,
    variant: Psi1Variant,
    centered: bool,
    matrix_is_psd: bool,
) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid(MODULE, format!("K must be positive, got {k}")));
    }
    let k2 = k * k;
    let base = match variant {
        Psi1Variant::Trace => norms.trace_norm * k2,
        Psi1Variant::HsPsd => {
            if !matrix_is_psd {
                return Err(Error::invalid(
                    MODULE,
                    "hsPSD variant requires a symmetric nonnegative definite matrix",
                ));
            }
            2.0 * consts.c2 * norms.hilbert_schmidt * k2
        }
        Psi1Variant::HsGeneral => 2.0 * SQRT_2 * consts.c2 * norms.hilbert_schmidt * k2,
    };
    Ok(if centered { 2.0 * base } else { base })
}

/// `2 exp(−min{t²/quad, t/lin})` with the conventions `t = 0 -> 2` and a zero
/// scale meaning an infinite rate (the degenerate zero matrix).
fn two_regime(t: f64, quad: f64, lin: f64, multiplier: f64) -> f64 {
    if t == 0.0 {
        return 2.0;
    }
    let q = if quad > 0.0 { t * t / quad } else { f64::INFINITY };
    let l = if lin > 0.0 { t / lin } else { f64::INFINITY };
    2.0 * (-multiplier * q.min(l)).exp()
}

fn require_threshold(t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(MODULE, format!("threshold must be >= 0, got {t}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CorollaryVariant {
    Trace,
    Hs,
}

/// Bernstein-type tail for `|<Aξ,ξ> − E<Aξ,ξ>|` given `||ξ||_ψ2 <= K`.
///
/// * trace: `2 exp(−min{t²/(16 C1² ||A||_tr² K⁴), t/(4 C1 ||A||_tr K²)})`
/// * hs (ξ centered): `2 exp(−min{t²/(C3² ||A||_HS² K⁴), t/(C3 ||A||_HS K²)})`
pub fn quadform_tail_bound(
    norms: &NormBundle,
    k: f64,
    consts: &UniversalConstants,
    t: f64,
    variant: CorollaryVariant,
) -> Result<f64> {
    require_threshold(t)?;
    if !(k > 0.0) {
        return Err(Error::invalid(MODULE, format!("K must be positive, got {k}")));
    }
    let k2 = k * k;
    let scale = match variant {
        CorollaryVariant::Trace => 4.0 * consts.c1 * norms.trace_norm * k2,
        CorollaryVariant::Hs => consts.c3 * norms.hilbert_schmidt * k2,
    };
    Ok(two_regime(t, scale * scale, scale, 1.0))
}

/// `ln E exp(t <Ag, g>)` for `g ~ N(0, I)` and symmetric A with the given
/// eigenvalues: `Σ −½ ln(1 − 2 t s_i)`, minus `t Σ s_i` when centered.
pub fn gaussian_quadform_logmgf(eigenvalues: &[f64], t: f64, centered: bool) -> Result<f64> {
    let mut total = 0.0;
    for &s in eigenvalues {
        let x = 2.0 * t * s;
        if x >= 1.0 {
            return Err(Error::domain(
                MODULE,
                format!("t = {t} outside the MGF domain of eigenvalue {s} (1 - 2ts = {})", 1.0 - x),
            ));
        }
        total += if centered {
            // −½ ln(1 − x) − x/2, kept accurate for small x
            -0.5 * ((-x).ln_1p() + x)
        } else {
            -0.5 * (-x).ln_1p()
        };
    }
    Ok(total)
}

/// Envelope for `<Ag,g> − E<Ag,g>`, `g ~ N(0, I)`:
/// `a = 16√2 C1 ||A||_HS / 3`, `b = 3 / (16 C1 ||A||)`.
pub fn gaussian_hw_envelope(norms: &NormBundle, consts: &UniversalConstants) -> Result<MgfEnvelope> {
    if norms.is_zero() || norms.operator_norm == 0.0 {
        return Err(Error::invalid(MODULE, "Gaussian Hanson-Wright envelope needs a nonzero matrix"));
    }
    MgfEnvelope::new(
        16.0 * SQRT_2 * consts.c1 * norms.hilbert_schmidt / 3.0,
        3.0 / (16.0 * consts.c1 * norms.operator_norm),
    )
}

/// `2 exp(−min{9t²/(512 C1² ||A||_HS²), 3t/(32 C1 ||A||)})`; equals the
/// min-form bound of [`gaussian_hw_envelope`] and stays defined for A = 0.
pub fn gaussian_hw_bound(norms: &NormBundle, consts: &UniversalConstants, t: f64) -> Result<f64> {
    require_threshold(t)?;
    let c1 = consts.c1;
    let quad = 512.0 * c1 * c1 * norms.hilbert_schmidt * norms.hilbert_schmidt / 9.0;
    let lin = 32.0 * c1 * norms.operator_norm / 3.0;
    Ok(two_regime(t, quad, lin, 1.0))
}

/// Independent-coordinate Hanson-Wright reference:
/// `2 exp(−c min{t²/(K⁴ ||A||_HS²), t/(K² ||A||)})`.
pub fn rv_hw_bound(norms: &NormBundle, k: f64, c_rv: f64, t: f64) -> Result<f64> {
    require_threshold(t)?;
    let k2 = k * k;
    let hs = k2 * norms.hilbert_schmidt;
    Ok(two_regime(t, hs * hs, k2 * norms.operator_norm, c_rv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "conjugateExact")]
    ConjugateExact,
    #[serde(rename = "minForm")]
    MinForm,
    #[serde(rename = "traceCorollary")]
    TraceCorollary,
    #[serde(rename = "hsCorollary")]
    HsCorollary,
    #[serde(rename = "gaussianHW")]
    GaussianHw,
    #[serde(rename = "rudelsonVershynin")]
    RudelsonVershynin,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::ConjugateExact,
        BoundKind::MinForm,
        BoundKind::TraceCorollary,
        BoundKind::HsCorollary,
        BoundKind::GaussianHw,
        BoundKind::RudelsonVershynin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::ConjugateExact => "conjugateExact",
            BoundKind::MinForm => "minForm",
            BoundKind::TraceCorollary => "traceCorollary",
            BoundKind::HsCorollary => "hsCorollary",
            BoundKind::GaussianHw => "gaussianHW",
            BoundKind::RudelsonVershynin => "rudelsonVershynin",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(MODULE, format!("unknown bound kind '{s}'")))
    }
}

/// A parameterized tail-bound family `t -> P(|η| >= t)` upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundCurve {
    ConjugateExact { envelope: MgfEnvelope },
    MinForm { envelope: MgfEnvelope },
    TraceCorollary { norms: NormBundle, k: f64, consts: UniversalConstants },
    HsCorollary { norms: NormBundle, k: f64, consts: UniversalConstants },
    GaussianHw { norms: NormBundle, consts: UniversalConstants },
    RudelsonVershynin { norms: NormBundle, k: f64, c_rv: f64 },
}

impl BoundCurve {
    pub fn kind(&self) -> BoundKind {
        match self {
            BoundCurve::ConjugateExact { .. } => BoundKind::ConjugateExact,
            BoundCurve::MinForm { .. } => BoundKind::MinForm,
            BoundCurve::TraceCorollary { .. } => BoundKind::TraceCorollary,
            BoundCurve::HsCorollary { .. } => BoundKind::HsCorollary,
            BoundCurve::GaussianHw { .. } => BoundKind::GaussianHw,
            BoundCurve::RudelsonVershynin { .. } => BoundKind::RudelsonVershynin,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            BoundCurve::ConjugateExact { envelope } => tail_bound_from_envelope(envelope, t, TailForm::Exact),
            BoundCurve::MinForm { envelope } => tail_bound_from_envelope(envelope, t, TailForm::MinForm),
            BoundCurve::TraceCorollary { norms, k, consts } => {
                quadform_tail_bound(norms, *k, consts, t, CorollaryVariant::Trace)
            }
            BoundCurve::HsCorollary { norms, k, consts } => {
                quadform_tail_bound(norms, *k, consts, t, CorollaryVariant::Hs)
            }
            BoundCurve::GaussianHw { norms, consts } => gaussian_hw_bound(norms, consts, t),
            BoundCurve::RudelsonVershynin { norms, k, c_rv } => rv_hw_bound(norms, *k, *c_rv, t),
        }
    }
}
