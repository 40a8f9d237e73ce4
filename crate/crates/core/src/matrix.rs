//! Dense symmetric spectral machinery.
//!
//! Matrices here are small (at most a few hundred rows), so everything is
//! row-major `Vec<f64>` and the eigensolver is cyclic Jacobi.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MODULE: &str = "matrix";

/// Symmetry tolerance, relative to `max(1, max |a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A real `n x n` matrix stored row-major. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::shape(MODULE, "matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::shape(
                MODULE,
                format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(
                MODULE,
                format!("entry ({}, {}) is {}", pos / n, pos % n, data[pos]),
            ));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::shape(
                MODULE,
                format!("row {i} has {} entries, expected {n}", r.len()),
            ));
        }
        Self::new(n, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "matrix dimension must be at least 1");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::shape(
                MODULE,
                format!("cannot multiply {0}x{0} by {1}x{1}", self.n, other.n),
            ));
        }
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::shape(
                MODULE,
                format!("vector of length {} against {1}x{1} matrix", x.len(), self.n),
            ));
        }
        Ok(self
            .data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::shape(
                MODULE,
                format!("{0}x{0} and {1}x{1} differ in size", self.n, other.n),
            ));
        }
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= SYMMETRY_TOL * self.max_abs().max(1.0)
    }

    fn require_symmetric(&self) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::NotSymmetric {
                module: MODULE,
                asymmetry: self.asymmetry(),
            })
        }
    }
}

/// Eigenvalues in nonincreasing order with orthonormal eigenvectors as the
/// columns of `basis`.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub eigenvalues: Vec<f64>,
    pub basis: SquareMatrix,
}

impl SymmetricSpectrum {
    /// `U diag(f(s)) U^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SquareMatrix {
        let n = self.basis.n();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&s| f(s)).collect();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n)
                    .map(|k| self.basis.get(i, k) * weights[k] * self.basis.get(j, k))
                    .sum();
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SquareMatrix {
        self.reconstruct_with(|s| s)
    }

    /// Column `k` of the basis, i.e. `U e_k`.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.basis.n()).map(|i| self.basis.get(i, k)).collect()
    }
}

/// Operator, Hilbert-Schmidt and trace norms of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormBundle {
    pub operator_norm: f64,
    pub hilbert_schmidt: f64,
    pub trace_norm: f64,
}

impl NormBundle {
    pub fn from_singular_values(sv: &[f64]) -> Self {
        Self {
            operator_norm: sv.iter().fold(0.0, |m: f64, s| m.max(*s)),
            hilbert_schmidt: sv.iter().map(|s| s * s).sum::<f64>().sqrt(),
            trace_norm: sv.iter().sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.trace_norm == 0.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        let c = c.abs();
        Self {
            operator_norm: self.operator_norm * c,
            hilbert_schmidt: self.hilbert_schmidt * c,
            trace_norm: self.trace_norm * c,
        }
    }
}

/// `(A + A^T) / 2`. Quadratic form values are unchanged.
pub fn symmetrize(a: &SquareMatrix) -> SquareMatrix {
    let n = a.n();
    let mut s = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    s
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn spectral_decompose(a: &SquareMatrix) -> Result<SymmetricSpectrum> {
    a.require_symmetric()?;
    let n = a.n();
    // Work on the exactly symmetric part so rotations stay consistent.
    let mut m = symmetrize(a);
    let mut v = SquareMatrix::identity(n);

    let frob = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |m: &SquareMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m.get(i, j) * m.get(i, j);
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= JACOBI_TOL * frob;
    let mut sweep = 0;
    while !converged && sweep < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
        sweep += 1;
        converged = off(&m) <= JACOBI_TOL * frob;
    }
    if !converged {
        return Err(Error::NoConvergence {
            module: MODULE,
            what: "Jacobi eigendecomposition",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep their original index order
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let eigenvalues = order.iter().map(|&k| m.get(k, k)).collect();
    let mut basis = SquareMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            basis.set(row, col, v.get(row, k));
        }
    }
    Ok(SymmetricSpectrum { eigenvalues, basis })
}

/// Applies the Jacobi rotation `J(p, q, c, s)` as `m <- J^T m J`, `v <- v J`.
fn rotate(m: &mut SquareMatrix, v: &mut SquareMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.n();
    for k in 0..n {
        let mkp = m.get(k, p);
        let mkq = m.get(k, q);
        m.set(k, p, c * mkp - s * mkq);
        m.set(k, q, s * mkp + c * mkq);
    }
    for k in 0..n {
        let mpk = m.get(p, k);
        let mqk = m.get(q, k);
        m.set(p, k, c * mpk - s * mqk);
        m.set(q, k, s * mpk + c * mqk);
    }
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Singular values of `a`, unordered.
pub fn singular_values(a: &SquareMatrix) -> Result<Vec<f64>> {
    if a.is_symmetric() {
        let eig = spectral_decompose(a)?;
        return Ok(eig.eigenvalues.iter().map(|s| s.abs()).collect());
    }
    let gram = a.transpose().matmul(a)?;
    let eig = spectral_decompose(&gram)?;
    // Gram eigenvalues are >= 0 up to rounding
    Ok(eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect())
}

pub fn matrix_norms(a: &SquareMatrix) -> Result<NormBundle> {
    Ok(NormBundle::from_singular_values(&singular_values(a)?))
}

/// Splits a symmetric `a` into PSD parts with `a = a1 - a2` and
/// `||a||_tr = ||a1||_tr + ||a2||_tr`.
pub fn split_pos_neg(a: &SquareMatrix) -> Result<(SquareMatrix, SquareMatrix)> {
    let eig = spectral_decompose(a)?;
    Ok((
        eig.reconstruct_with(|s| s.max(0.0)),
        eig.reconstruct_with(|s| (-s).max(0.0)),
    ))
}

/// `x^T A x`.
pub fn quadform(a: &SquareMatrix, x: &[f64]) -> Result<f64> {
    let ax = a.mul_vec(x)?;
    Ok(ax.iter().zip(x).map(|(u, v)| u * v).sum())
}

/// `x^T A y`.
pub fn bilinear(a: &SquareMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    if y.len() != a.n() {
        return Err(Error::shape(MODULE, "bilinear form vector length mismatch"));
    }
    let ax = a.mul_vec(x)?;
    Ok(ax.iter().zip(y).map(|(u, v)| u * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, seed: u64, symmetric: bool) -> SquareMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, next());
            }
        }
        if symmetric {
            symmetrize(&m)
        } else {
            m
        }
    }

    #[test]
    fn symmetrize_examples() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let s = symmetrize(&a);
        assert_eq!(s.rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(symmetrize(&s), s);
    }

    #[test]
    fn symmetrize_preserves_quadform() {
        let a = lcg_matrix(4, 11, false);
        let s = symmetrize(&a);
        for seed in 0..10u64 {
            let x: Vec<f64> = (0..4).map(|i| ((seed * 7 + i) as f64).sin()).collect();
            let direct: f64 = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * x[i] * x[j])
                .sum();
            assert!((quadform(&s, &x).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_diagonal() {
        let eig = spectral_decompose(&SquareMatrix::diag(&[3.0, -4.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![3.0, -4.0]);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((eig.basis.get(i, j).abs() - expect).abs() < 1e-15);
            }
        }
        let eig = spectral_decompose(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0; 3]);
    }

    #[test]
    fn decompose_random_reconstructs() {
        for seed in 0..20 {
            let a = lcg_matrix(6, seed, true);
            let eig = spectral_decompose(&a).unwrap();
            let resid = eig.reconstruct().sub(&a).unwrap().max_abs();
            assert!(resid <= 1e-8 * a.max_abs(), "residual {resid}");
            let utu = eig.basis.transpose().matmul(&eig.basis).unwrap();
            let orth = utu.sub(&SquareMatrix::identity(6)).unwrap().max_abs();
            assert!(orth <= 1e-10);
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn decompose_rejects_nonsymmetric() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(spectral_decompose(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn norms_examples() {
        let nb = matrix_norms(&SquareMatrix::identity(5)).unwrap();
        assert!((nb.operator_norm - 1.0).abs() < 1e-14);
        assert!((nb.hilbert_schmidt - 5f64.sqrt()).abs() < 1e-14);
        assert!((nb.trace_norm - 5.0).abs() < 1e-14);

        let nb = matrix_norms(&SquareMatrix::diag(&[3.0, -4.0])).unwrap();
        assert!((nb.operator_norm - 4.0).abs() < 1e-14);
        assert!((nb.hilbert_schmidt - 5.0).abs() < 1e-14);
        assert!((nb.trace_norm - 7.0).abs() < 1e-14);
    }

    #[test]
    fn hilbert_schmidt_matches_entrywise_sum() {
        for seed in 0..10 {
            let a = lcg_matrix(5, 100 + seed, false);
            let entrywise = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = matrix_norms(&a).unwrap();
            assert!((nb.hilbert_schmidt - entrywise).abs() < 1e-10);
        }
    }

    #[test]
    fn non_symmetric_norms_use_gram_spectrum() {
        // [[0, 2], [0, 0]] has singular values 2 and 0
        let a = SquareMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let nb = matrix_norms(&a).unwrap();
        assert!((nb.operator_norm - 2.0).abs() < 1e-12);
        assert!((nb.trace_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn split_examples() {
        let (a1, a2) = split_pos_neg(&SquareMatrix::diag(&[3.0, -4.0])).unwrap();
        assert!(a1.sub(&SquareMatrix::diag(&[3.0, 0.0])).unwrap().max_abs() < 1e-14);
        assert!(a2.sub(&SquareMatrix::diag(&[0.0, 4.0])).unwrap().max_abs() < 1e-14);

        let b = lcg_matrix(4, 3, false);
        let psd = b.transpose().matmul(&b).unwrap();
        let (p1, p2) = split_pos_neg(&psd).unwrap();
        assert!(p1.sub(&psd).unwrap().max_abs() < 1e-10);
        assert!(p2.max_abs() < 1e-10);
    }

    #[test]
    fn split_random_properties() {
        for seed in 0..10 {
            let a = lcg_matrix(6, 40 + seed, true);
            let (a1, a2) = split_pos_neg(&a).unwrap();
            assert!(a1.sub(&a2).unwrap().sub(&a).unwrap().max_abs() < 1e-8);
            let (n, n1, n2) = (
                matrix_norms(&a).unwrap(),
                matrix_norms(&a1).unwrap(),
                matrix_norms(&a2).unwrap(),
            );
            assert!((n.trace_norm - n1.trace_norm - n2.trace_norm).abs() < 1e-8);
            assert!(
                n1.hilbert_schmidt + n2.hilbert_schmidt
                    <= std::f64::consts::SQRT_2 * n.hilbert_schmidt + 1e-8
            );
            for part in [&a1, &a2] {
                let ev = spectral_decompose(part).unwrap().eigenvalues;
                assert!(ev.iter().all(|&s| s >= -1e-10));
            }
        }
    }

    #[test]
    fn quadform_examples() {
        assert_eq!(quadform(&SquareMatrix::identity(3), &[1.0, 2.0, 2.0]).unwrap(), 9.0);
        assert_eq!(quadform(&SquareMatrix::zeros(3), &[1.0, 2.0, 2.0]).unwrap(), 0.0);
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(quadform(&a, &[1.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(quadform(&a, &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn constructor_validation() {
        assert!(SquareMatrix::new(2, vec![1.0; 3]).is_err());
        assert!(SquareMatrix::new(1, vec![f64::NAN]).is_err());
        assert!(SquareMatrix::new(0, vec![]).is_err());
    }
}
