//! Fixed-design least squares: the excess loss of OLS is a quadratic form in
//! the noise, `R(ξ) = <A(ξ − Eξ), ξ − Eξ>` with `A = n⁻² X^T Σ⁻¹ X`.

use serde::{Deserialize, Serialize};

use crate::bounds::UniversalConstants;
use crate::error::{Error, Result};
use crate::matrix::{matrix_norms, quadform, spectral_decompose, NormBundle, SquareMatrix};

const MODULE: &str = "regression";
pub const SINGULAR_RATIO: f64 = 1e-10;

/// `d × n` design; columns are the design points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedDesign {
    rows: Vec<Vec<f64>>,
}

impl FixedDesign {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::shape(MODULE, "design has no rows"));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::shape(MODULE, "design rows have different lengths"));
        }
        if d > n {
            return Err(Error::shape(MODULE, format!("design has d = {d} > n = {n}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(MODULE, "design entry"));
        }
        Ok(Self { rows })
    }

    pub fn d(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Design point `x_i` (column `i`).
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegressionArtifacts {
    pub sigma: SquareMatrix,
    pub sigma_inv: SquareMatrix,
    pub sigma_half: SquareMatrix,
    pub a: SquareMatrix,
}

pub fn build_artifacts(design: &FixedDesign) -> Result<RegressionArtifacts> {
    let (d, n) = (design.d(), design.n());
    let nf = n as f64;
    let mut sigma = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let v = design.rows[i].iter().zip(&design.rows[j]).map(|(a, b)| a * b).sum::<f64>() / nf;
            sigma.set(i, j, v);
            sigma.set(j, i, v);
        }
    }
    let eig = spectral_decompose(&sigma)?;
    let lmax = eig.eigenvalues[0];
    let lmin = eig.eigenvalues[d - 1];
    if !(lmax > 0.0) || lmin <= SINGULAR_RATIO * lmax {
        let ratio = if lmax > 0.0 { lmin / lmax } else { 0.0 };
        return Err(Error::SingularDesign { ratio });
    }
    let sigma_inv = eig.reconstruct_with(|s| 1.0 / s);
    let sigma_half = eig.reconstruct_with(f64::sqrt);

    // columns Σ⁻¹ x_j, then A_ij = x_i^T Σ⁻¹ x_j / n²
    let points: Vec<Vec<f64>> = (0..n).map(|j| design.point(j)).collect();
    let whitened: Vec<Vec<f64>> = points
        .iter()
        .map(|x| sigma_inv.mul_vec(x))
        .collect::<Result<_>>()?;
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = points[i].iter().zip(&whitened[j]).map(|(p, q)| p * q).sum::<f64>() / (nf * nf);
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    Ok(RegressionArtifacts {
        sigma,
        sigma_inv,
        sigma_half,
        a,
    })
}

/// Measured hat-matrix facts next to their exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HatInvariants {
    pub d: usize,
    pub n: usize,
    pub trace: f64,
    pub expected_trace: f64,
    pub norms: NormBundle,
    pub expected_operator_norm: f64,
    pub expected_hilbert_schmidt: f64,
    /// `max |(nA)² − nA|`.
    pub idempotence_residual: f64,
    /// `max |Σ^{1/2} Σ^{1/2} − Σ|`.
    pub sigma_half_residual: f64,
    pub min_eigenvalue: f64,
}

impl HatInvariants {
    /// Largest deviation over all the checks.
    pub fn max_error(&self) -> f64 {
        [
            (self.trace - self.expected_trace).abs(),
            (self.norms.operator_norm - self.expected_operator_norm).abs(),
            (self.norms.hilbert_schmidt - self.expected_hilbert_schmidt).abs(),
            self.idempotence_residual,
            self.sigma_half_residual,
            (-self.min_eigenvalue).max(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_error() <= tol
    }
}

pub fn hat_invariants(artifacts: &RegressionArtifacts) -> Result<HatInvariants> {
    let (d, n) = (artifacts.sigma.n(), artifacts.a.n());
    let nf = n as f64;
    let na = artifacts.a.scale(nf);
    let idempotence_residual = na.matmul(&na)?.sub(&na)?.max_abs();
    let sigma_half_residual = artifacts
        .sigma_half
        .matmul(&artifacts.sigma_half)?
        .sub(&artifacts.sigma)?
        .max_abs();
    let min_eigenvalue = *spectral_decompose(&artifacts.a)?
        .eigenvalues
        .last()
        .unwrap_or(&0.0);
    Ok(HatInvariants {
        d,
        n,
        trace: artifacts.a.trace(),
        expected_trace: d as f64 / nf,
        norms: matrix_norms(&artifacts.a)?,
        expected_operator_norm: 1.0 / nf,
        expected_hilbert_schmidt: (d as f64).sqrt() / nf,
        idempotence_residual,
        sigma_half_residual,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OlsResult {
    pub beta_hat: Vec<f64>,
    pub beta: Vec<f64>,
    pub excess_loss: f64,
}

/// `n⁻¹ Σ_i y_i Σ⁻¹ x_i`.
fn ols(design: &FixedDesign, artifacts: &RegressionArtifacts, y: &[f64]) -> Result<Vec<f64>> {
    let n = design.n() as f64;
    let xy: Vec<f64> = design
        .rows
        .iter()
        .map(|r| r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect();
    artifacts.sigma_inv.mul_vec(&xy)
}

fn check_lengths(design: &FixedDesign, artifacts: &RegressionArtifacts, xi: &[f64], mean: &[f64]) -> Result<()> {
    let n = design.n();
    if xi.len() != n || mean.len() != n {
        return Err(Error::shape(
            MODULE,
            format!("noise vectors have lengths {} and {}, design has n = {n}", xi.len(), mean.len()),
        ));
    }
    if artifacts.a.n() != n || artifacts.sigma.n() != design.d() {
        return Err(Error::shape(MODULE, "artifacts do not match the design"));
    }
    Ok(())
}

pub fn ols_and_excess_loss(
    design: &FixedDesign,
    artifacts: &RegressionArtifacts,
    xi: &[f64],
    mean_xi: &[f64],
) -> Result<OlsResult> {
    check_lengths(design, artifacts, xi, mean_xi)?;
    let beta_hat = ols(design, artifacts, xi)?;
    let beta = ols(design, artifacts, mean_xi)?;
    let diff: Vec<f64> = beta_hat.iter().zip(&beta).map(|(a, b)| a - b).collect();
    let excess_loss = artifacts.sigma_half.mul_vec(&diff)?.iter().map(|v| v * v).sum();
    Ok(OlsResult {
        beta_hat,
        beta,
        excess_loss,
    })
}

/// `|R(ξ) − <A(ξ − Eξ), ξ − Eξ>|`.
pub fn regression_identity_check(
    design: &FixedDesign,
    artifacts: &RegressionArtifacts,
    xi: &[f64],
    mean_xi: &[f64],
) -> Result<f64> {
    let r = ols_and_excess_loss(design, artifacts, xi, mean_xi)?.excess_loss;
    let centered: Vec<f64> = xi.iter().zip(mean_xi).map(|(a, b)| a - b).collect();
    Ok((r - quadform(&artifacts.a, &centered)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExcessLossBound {
    pub u: f64,
    pub threshold: f64,
    pub prob_bound: f64,
}

/// `P(|R − ER| >= ||A||_HS K² max{√u, u}) <= 2 exp(−u / C4)`.
pub fn excess_loss_tail_bound(
    artifacts: &RegressionArtifacts,
    k: f64,
    consts: &UniversalConstants,
    u: f64,
) -> Result<ExcessLossBound> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(MODULE, format!("K must be positive, got {k}")));
    }
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::domain(MODULE, format!("u must be >= 0, got {u}")));
    }
    let hs = matrix_norms(&artifacts.a)?.hilbert_schmidt;
    Ok(ExcessLossBound {
        u,
        threshold: hs * k * k * u.sqrt().max(u),
        prob_bound: 2.0 * (-u / consts.c4).exp(),
    })
}

/// Bound rows for the formula as stated (`K`) and the conservative variant
/// that pays the centering factor (`2K`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExcessLossTable {
    pub k: f64,
    pub literal: Vec<ExcessLossBound>,
    pub conservative: Vec<ExcessLossBound>,
}

pub fn excess_loss_table(
    artifacts: &RegressionArtifacts,
    k: f64,
    consts: &UniversalConstants,
    us: &[f64],
) -> Result<ExcessLossTable> {
    Ok(ExcessLossTable {
        k,
        literal: us
            .iter()
            .map(|&u| excess_loss_tail_bound(artifacts, k, consts, u))
            .collect::<Result<_>>()?,
        conservative: us
            .iter()
            .map(|&u| excess_loss_tail_bound(artifacts, 2.0 * k, consts, u))
            .collect::<Result<_>>()?,
    })
}
