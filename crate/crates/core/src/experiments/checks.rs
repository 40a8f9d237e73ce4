use serde::{Deserialize, Serialize};

use crate::bounds::{gaussian_quadform_logmgf, psi1_quadform_bound, MgfEnvelope, Psi1Variant};
use crate::error::{Error, Result};
use crate::experiments::tail::{draw_quadforms, noncentered_k, with_workers, Centering, TailExperimentConfig};
use crate::matrix::{bilinear, matrix_norms, quadform, SquareMatrix};
use crate::orlicz::{empirical_luxemburg_norm, NormEstimate, OrliczIndex, DEFAULT_REL_TOL};
use crate::samplers::model_stats;

const MODULE: &str = "experiments";
pub const ENVELOPE_PASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Psi1Report {
    pub empirical_psi1: NormEstimate,
    pub k: f64,
    pub centering: f64,
    pub trace_bound: f64,
    /// Absent when the vector is not centered.
    pub hs_bound: Option<f64>,
    pub trace_satisfied: bool,
    pub hs_satisfied: Option<bool>,
}

/// Empirical `||q − E q||_ψ1` against the trace and general HS bounds (centered).
pub fn empirical_psi1_report(cfg: &TailExperimentConfig, workers: usize) -> Result<Psi1Report> {
    cfg.validate()?;
    let stats = model_stats(&cfg.model)?;
    let centered_model = cfg.model.is_centered();
    let k = if centered_model {
        stats.psi2.value()
    } else {
        noncentered_k(&stats)
    };
    let (center, deviations) = with_workers(workers, || -> Result<(f64, Vec<f64>)> {
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
        Ok((center, q.into_iter().map(|v| v - center).collect()))
    })??;
    let empirical = empirical_luxemburg_norm(&deviations, OrliczIndex::Psi1, DEFAULT_REL_TOL)?;
    let norms = matrix_norms(&cfg.a)?;
    let trace_bound = psi1_quadform_bound(&norms, k, &cfg.constants, Psi1Variant::Trace, true, false)?;
    let hs_bound = if centered_model {
        Some(psi1_quadform_bound(
            &norms,
            k,
            &cfg.constants,
            Psi1Variant::HsGeneral,
            true,
            false,
        )?)
    } else {
        None
    };
    Ok(Psi1Report {
        empirical_psi1: empirical,
        k,
        centering: center,
        trace_bound,
        hs_bound,
        trace_satisfied: empirical.value <= trace_bound,
        hs_satisfied: hs_bound.map(|b| empirical.value <= b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnvelopeCheck {
    pub max_violation: f64,
    pub pass: bool,
}

/// Checks the centered Gaussian quadratic-form log-MGF against `a²t²/2` on a
/// uniform grid over `[−b, b]`.
pub fn mgf_envelope_check(eigenvalues: &[f64], env: &MgfEnvelope, grid_points: usize) -> Result<EnvelopeCheck> {
    if grid_points < 2 {
        return Err(Error::invalid(MODULE, "envelope grid needs at least 2 points"));
    }
    if let Some(&s) = eigenvalues.iter().find(|s| !s.is_finite()) {
        return Err(Error::non_finite(MODULE, format!("eigenvalue {s}")));
    }
    // the MGF exists for |t| < 1/(2|s|) in both signs of t
    if let Some(&s) = eigenvalues.iter().find(|&&s| 2.0 * env.b * s.abs() >= 1.0) {
        return Err(Error::domain(
            MODULE,
            format!("b = {} outside the MGF domain of eigenvalue {s} (needs b < {})", env.b, 0.5 / s.abs()),
        ));
    }
    let half_a2 = 0.5 * env.a * env.a;
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..grid_points {
        let t = -env.b + 2.0 * env.b * i as f64 / (grid_points - 1) as f64;
        let v = gaussian_quadform_logmgf(eigenvalues, t, true)? - half_a2 * t * t;
        max_violation = max_violation.max(v);
    }
    Ok(EnvelopeCheck {
        max_violation,
        pass: max_violation <= ENVELOPE_PASS_TOL,
    })
}

/// Mean of `<A(δ1 x), δ2 x>` over the four equiprobable `(δ1, δ2) ∈ {0,1}²`.
pub fn decoupling_average(a: &SquareMatrix, x: &[f64]) -> Result<f64> {
    let zero = vec![0.0; x.len()];
    let mut sum = 0.0;
    for d1 in [false, true] {
        for d2 in [false, true] {
            let u = if d1 { x } else { &zero };
            let v = if d2 { x } else { &zero };
            sum += bilinear(a, u, v)?;
        }
    }
    Ok(0.25 * sum)
}

/// `|E_δ <A(δ1 x), δ2 x> − <Ax, x>/4|` by exact enumeration.
pub fn decoupling_identity_check(a: &SquareMatrix, x: &[f64]) -> Result<f64> {
    let avg = decoupling_average(a, x)?;
    Ok((avg - 0.25 * quadform(a, x)?).abs())
}
