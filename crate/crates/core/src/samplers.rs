//! Dependent sub-gaussian vector models with analytic metadata.
//!
//! Random streams are ChaCha8 keyed by `seed` with `stream_index` as the
//! ChaCha stream id, so `(seed, stream_index)` pairs are reproducible and
//! independent of how work is split across threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{matrix_norms, SquareMatrix};
use crate::orlicz::gaussian_psi2;

const MODULE: &str = "samplers";
const CHOLESKY_MIN_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeedSpec {
    pub seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn with_stream(self, stream_index: u64) -> Self {
        Self { stream_index, ..self }
    }
}

/// Uniform, normal and sign variates from one reproducible stream.
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(spec: SeedSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.stream_index);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.rng.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Standard normal quantile, Wichura's AS241 (PPND16); relative accuracy
/// about 1e-16 on (0, 1).
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum VectorModel {
    /// `M g + μ`, g standard normal.
    GaussianLinear { m: SquareMatrix, mu: Vec<f64> },
    /// `M ε + μ`, ε iid Rademacher.
    RademacherLinear { m: SquareMatrix, mu: Vec<f64> },
    /// `L g + μ` with `L L^T = (1 − ρ) I + ρ 11^T`.
    EquicorrelatedGaussian { n: usize, rho: f64, mu: Vec<f64> },
}

impl VectorModel {
    pub fn gaussian_linear(m: SquareMatrix, mu: Option<Vec<f64>>) -> Result<Self> {
        let mu = mu.unwrap_or_else(|| vec![0.0; m.n()]);
        let model = Self::GaussianLinear { m, mu };
        model.validate()?;
        Ok(model)
    }

    pub fn rademacher_linear(m: SquareMatrix, mu: Option<Vec<f64>>) -> Result<Self> {
        let mu = mu.unwrap_or_else(|| vec![0.0; m.n()]);
        let model = Self::RademacherLinear { m, mu };
        model.validate()?;
        Ok(model)
    }

    pub fn equicorrelated(n: usize, rho: f64, mu: Option<Vec<f64>>) -> Result<Self> {
        let model = Self::EquicorrelatedGaussian {
            n,
            rho,
            mu: mu.unwrap_or_else(|| vec![0.0; n]),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianLinear { m, .. } | Self::RademacherLinear { m, .. } => m.n(),
            Self::EquicorrelatedGaussian { n, .. } => *n,
        }
    }

    pub fn mu(&self) -> &[f64] {
        match self {
            Self::GaussianLinear { mu, .. }
            | Self::RademacherLinear { mu, .. }
            | Self::EquicorrelatedGaussian { mu, .. } => mu,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        !matches!(self, Self::RademacherLinear { .. })
    }

    pub fn is_centered(&self) -> bool {
        self.mu().iter().all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::invalid(MODULE, "model dimension must be at least 1"));
        }
        if self.mu().len() != n {
            return Err(Error::shape(
                MODULE,
                format!("mean vector has length {}, model dimension is {n}", self.mu().len()),
            ));
        }
        if self.mu().iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(MODULE, "mean vector"));
        }
        if let Self::EquicorrelatedGaussian { rho, .. } = self {
            let lower = if n > 1 { -1.0 / (n as f64 - 1.0) } else { f64::NEG_INFINITY };
            if !(*rho > lower && *rho < 1.0) {
                return Err(Error::invalid(
                    MODULE,
                    format!("rho = {rho} outside ({lower}, 1) for n = {n}; covariance not positive definite"),
                ));
            }
        }
        Ok(())
    }

    /// The matrix applied to the iid base vector.
    pub fn mixing_matrix(&self) -> Result<SquareMatrix> {
        match self {
            Self::GaussianLinear { m, .. } | Self::RademacherLinear { m, .. } => Ok(m.clone()),
            Self::EquicorrelatedGaussian { n, rho, .. } => cholesky_lower(&equicorrelation(*n, *rho)),
        }
    }
}

/// `(1 − ρ) I + ρ 11^T`.
pub fn equicorrelation(n: usize, rho: f64) -> SquareMatrix {
    let mut c = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            c.set(i, j, if i == j { 1.0 } else { rho });
        }
    }
    c
}

/// Lower-triangular `L` with `L L^T = a`; fails on a pivot below 1e-12.
pub fn cholesky_lower(a: &SquareMatrix) -> Result<SquareMatrix> {
    let n = a.n();
    let mut l = SquareMatrix::zeros(n);
    for j in 0..n {
        let d = a.get(j, j) - (0..j).map(|k| l.get(j, k) * l.get(j, k)).sum::<f64>();
        if !(d >= CHOLESKY_MIN_PIVOT) {
            return Err(Error::domain(
                MODULE,
                format!("Cholesky pivot {d:e} at index {j}; matrix not positive definite"),
            ));
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let s = a.get(i, j) - (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum::<f64>();
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Draws vectors from a model on one stream, reusing buffers.
pub struct VectorSampler {
    mixing: SquareMatrix,
    identity_mixing: bool,
    rademacher: bool,
    mu: Vec<f64>,
    base: Vec<f64>,
    stream: Stream,
}

impl VectorSampler {
    pub fn new(model: &VectorModel, seed: SeedSpec) -> Result<Self> {
        model.validate()?;
        let mixing = model.mixing_matrix()?;
        let identity_mixing = mixing == SquareMatrix::identity(mixing.n());
        Ok(Self {
            base: vec![0.0; mixing.n()],
            mixing,
            identity_mixing,
            rademacher: !model.is_gaussian(),
            mu: model.mu().to_vec(),
            stream: Stream::new(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Writes the next draw into `out` (length = model dimension).
    pub fn next_into(&mut self, out: &mut [f64]) {
        let n = self.mu.len();
        debug_assert_eq!(out.len(), n);
        for b in self.base.iter_mut() {
            *b = if self.rademacher {
                self.stream.sign()
            } else {
                self.stream.normal()
            };
        }
        if self.identity_mixing {
            out.copy_from_slice(&self.base);
        } else {
            let m = self.mixing.as_slice();
            for (i, o) in out.iter_mut().enumerate() {
                *o = m[i * n..(i + 1) * n].iter().zip(&self.base).map(|(a, b)| a * b).sum();
            }
        }
        for (o, m) in out.iter_mut().zip(&self.mu) {
            *o += m;
        }
    }
}

pub fn sample_vector(model: &VectorModel, seed: SeedSpec, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::invalid(MODULE, "count must be at least 1"));
    }
    let mut sampler = VectorSampler::new(model, seed)?;
    let n = sampler.dim();
    Ok((0..count)
        .map(|_| {
            let mut v = vec![0.0; n];
            sampler.next_into(&mut v);
            v
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum Psi2Value {
    Exact(f64),
    /// No closed form; the value is a proven upper bound and an empirical
    /// estimate should be reported alongside.
    UpperBound(f64),
}

impl Psi2Value {
    pub fn value(self) -> f64 {
        match self {
            Self::Exact(v) | Self::UpperBound(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelStats {
    pub mean: Vec<f64>,
    pub covariance: SquareMatrix,
    /// ψ2 norm of the centered vector `ξ − μ`.
    pub psi2: Psi2Value,
    /// Mixing matrix is not diagonal: coordinates are dependent.
    pub dependent: bool,
}

impl ModelStats {
    /// `E <Aξ, ξ> = trace(A Cov) + μ^T A μ`.
    pub fn quadform_mean(&self, a: &SquareMatrix) -> Result<f64> {
        let ac = a.matmul(&self.covariance)?;
        Ok(ac.trace() + crate::matrix::quadform(a, &self.mean)?)
    }
}

pub fn model_stats(model: &VectorModel) -> Result<ModelStats> {
    model.validate()?;
    let m = model.mixing_matrix()?;
    let covariance = m.matmul(&m.transpose())?;
    let op = matrix_norms(&m)?.operator_norm;
    // Rademacher marginals <Mε, t> have τ <= |M^T t| <= ||M||, and any variable
    // with τ <= σ has E exp(X²/K²) <= (1 − 2σ²/K²)^(−1/2), so ψ2 <= ||M|| sqrt(8/3).
    let psi2 = if model.is_gaussian() {
        Psi2Value::Exact(op * gaussian_psi2())
    } else {
        Psi2Value::UpperBound(op * gaussian_psi2())
    };
    let n = m.n();
    let dependent = (0..n).any(|i| (0..n).any(|j| i != j && m.get(i, j) != 0.0));
    Ok(ModelStats {
        mean: model.mu().to_vec(),
        covariance,
        psi2,
        dependent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_reference_values() {
        // reference quantiles (R qnorm)
        let cases = [
            (0.5, 0.0),
            (0.975, 1.959963984540054),
            (0.025, -1.959963984540054),
            (0.9, 1.2815515655446004),
            (1e-10, -6.361340902404056),
            (1.0 - 1e-6, 4.753424308822899),
        ];
        for (p, z) in cases {
            assert!((inverse_normal_cdf(p) - z).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn inverse_cdf_inverts_erfc() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let z = inverse_normal_cdf(p);
            let back = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
            assert!((back - p).abs() < 1e-12, "p = {p}: {back}");
        }
    }

    #[test]
    fn degenerate_model() {
        let model = VectorModel::gaussian_linear(SquareMatrix::zeros(2), Some(vec![1.0, 2.0])).unwrap();
        for v in sample_vector(&model, SeedSpec::new(1, 0), 50).unwrap() {
            assert_eq!(v, vec![1.0, 2.0]);
        }
    }

    #[test]
    fn deterministic_streams() {
        let model = VectorModel::equicorrelated(4, 0.3, None).unwrap();
        let a = sample_vector(&model, SeedSpec::new(9, 2), 100).unwrap();
        let b = sample_vector(&model, SeedSpec::new(9, 2), 100).unwrap();
        assert_eq!(a, b);
        let c = sample_vector(&model, SeedSpec::new(9, 3), 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_models() {
        assert!(VectorModel::equicorrelated(3, -0.5, None).is_err());
        assert!(VectorModel::equicorrelated(3, 1.0, None).is_err());
        assert!(VectorModel::gaussian_linear(SquareMatrix::identity(2), Some(vec![0.0])).is_err());
        let model = VectorModel::gaussian_linear(SquareMatrix::identity(2), None).unwrap();
        assert!(sample_vector(&model, SeedSpec::new(0, 0), 0).is_err());
    }

    #[test]
    fn cholesky_reconstructs_equicorrelation() {
        for (n, rho) in [(3, 0.5), (20, 0.5), (10, -0.1), (1, 0.9)] {
            let c = equicorrelation(n, rho);
            let l = cholesky_lower(&c).unwrap();
            let back = l.matmul(&l.transpose()).unwrap();
            assert!(back.sub(&c).unwrap().max_abs() < 1e-10);
        }
        assert!(cholesky_lower(&SquareMatrix::diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn stats_examples() {
        let model = VectorModel::gaussian_linear(SquareMatrix::identity(2), None).unwrap();
        let st = model_stats(&model).unwrap();
        assert!((st.quadform_mean(&SquareMatrix::identity(2)).unwrap() - 2.0).abs() < 1e-14);
        assert!(!st.dependent);
        assert_eq!(st.psi2, Psi2Value::Exact(gaussian_psi2()));

        let model = VectorModel::gaussian_linear(SquareMatrix::diag(&[2.0, 1.0]), None).unwrap();
        let st = model_stats(&model).unwrap();
        assert!((st.quadform_mean(&SquareMatrix::identity(2)).unwrap() - 5.0).abs() < 1e-14);

        let st = model_stats(&VectorModel::equicorrelated(3, 0.5, None).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.5 };
                assert!((st.covariance.get(i, j) - expect).abs() < 1e-12);
            }
        }
        assert!(st.dependent);

        let rad = VectorModel::rademacher_linear(SquareMatrix::identity(2), None).unwrap();
        assert!(matches!(model_stats(&rad).unwrap().psi2, Psi2Value::UpperBound(_)));
    }

    #[test]
    fn quadform_mean_with_shift() {
        let model = VectorModel::gaussian_linear(SquareMatrix::identity(2), Some(vec![1.0, 2.0])).unwrap();
        let st = model_stats(&model).unwrap();
        // trace(I) + |μ|² = 2 + 5
        assert!((st.quadform_mean(&SquareMatrix::identity(2)).unwrap() - 7.0).abs() < 1e-14);
    }
}
