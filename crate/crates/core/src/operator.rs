//! Dense Hermitian operators with spectral calculus: eigendecomposition,
//! half-integer operator powers, operator norms, and commutators.

use crate::error::{NumericError, Result};
use crate::linalg::{self, CMat};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

/// Eigenvalues below the unit spectral floor by more than this are an error
/// for negative powers; eigenvalues within the band are clamped to one.
pub const FLOOR_TOLERANCE: f64 = 1e-9;

/// Asymmetry above this triggers a warning before symmetrization.
pub const HERMITICITY_WARN: f64 = 1e-10;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvector columns unitary.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
}

impl SpectralDecomposition {
    /// Assemble from components; callers are responsible for consistency
    /// (ascending eigenvalues, unitary eigenvector columns).
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, eigenvectors: CMat) -> Self {
        SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Spectral norm of the decomposed operator.
    pub fn norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Apply a real scalar function through the spectral calculus:
    /// `V diag(f(lambda)) V†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> CMat {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = C64::new(f(lam), 0.0);
            scaled.column_mut(j).mapv_inplace(|z| z * w);
        }
        linalg::matmul_adj(&scaled, &self.eigenvectors)
    }

    /// Apply a complex scalar function through the spectral calculus.
    pub fn map_eigenvalues_complex(&self, f: impl Fn(f64) -> C64) -> CMat {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(j).mapv_inplace(|z| z * w);
        }
        linalg::matmul_adj(&scaled, &self.eigenvectors)
    }

    /// `H^(n/2)` as a matrix. Negative powers require the unit spectral
    /// floor; eigenvalues in `[1 - 1e-9, 1]` are treated as exactly one.
    pub fn half_power_matrix(&self, n: i32) -> Result<CMat> {
        let n_dim = self.eigenvalues.len();
        if n == 0 {
            return Ok(linalg::identity(n_dim));
        }
        let min = self.min_eigenvalue();
        if n > 0 {
            if min <= 0.0 {
                return Err(NumericError::NotPositiveDefinite {
                    min_eigenvalue: min,
                }
                .into());
            }
        } else if min < 1.0 - FLOOR_TOLERANCE {
            return Err(NumericError::SpectralFloor {
                min_eigenvalue: min,
                floor: 1.0,
            }
            .into());
        }
        let e = f64::from(n) / 2.0;
        Ok(self.map_eigenvalues(|lam| {
            let lam = if n < 0 && lam < 1.0 { 1.0 } else { lam };
            lam.powf(e)
        }))
    }

    /// `exp(i c H)` as a (unitary) matrix.
    pub fn unitary_exp(&self, c: f64) -> CMat {
        self.map_eigenvalues_complex(|lam| C64::from_polar(1.0, c * lam))
    }
}

/// A dense complex Hermitian matrix. Entries are symmetrized on construction;
/// the spectral decomposition is computed at most once and shared.
#[derive(Debug)]
pub struct HermitianOperator {
    entries: CMat,
    spectral: OnceLock<std::result::Result<SpectralDecomposition, NumericError>>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let spectral = OnceLock::new();
        if let Some(s) = self.spectral.get() {
            let _ = spectral.set(s.clone());
        }
        HermitianOperator {
            entries: self.entries.clone(),
            spectral,
        }
    }
}

impl HermitianOperator {
    /// Build from a square complex matrix. The matrix is replaced by
    /// `(A + A†)/2`; a warning is logged when the asymmetry exceeds 1e-10.
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(NumericError::DimensionMismatch(entries.nrows(), entries.ncols()).into());
        }
        if !linalg::all_finite(&entries) {
            return Err(NumericError::NonFiniteEntries.into());
        }
        let adj = linalg::adjoint(&entries);
        let asymmetry = linalg::max_abs(&(&entries - &adj)) / 2.0;
        if asymmetry > HERMITICITY_WARN {
            log::warn!(
                "hermitian input asymmetry {asymmetry:.3e} exceeds {HERMITICITY_WARN:.0e}; symmetrizing"
            );
        }
        let sym = (&entries + &adj).mapv(|z| z * 0.5);
        Ok(HermitianOperator {
            entries: sym,
            spectral: OnceLock::new(),
        })
    }

    /// Build with a decomposition already known (e.g. after a rigid spectral
    /// shift); skips the eigensolve on first use.
    pub(crate) fn with_cached_spectrum(
        entries: CMat,
        spectrum: SpectralDecomposition,
    ) -> Result<Self> {
        let op = HermitianOperator::new(entries)?;
        let _ = op.spectral.set(Ok(spectrum));
        Ok(op)
    }

    /// Build from a real diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Array2::<C64>::zeros((n, n));
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        HermitianOperator {
            entries: m,
            spectral: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// The cached eigendecomposition, computing it on first use.
    pub fn spectrum(&self) -> Result<&SpectralDecomposition> {
        let res = self.spectral.get_or_init(|| {
            linalg::hermitian_eigen(&self.entries).map(|(eigenvalues, eigenvectors)| {
                SpectralDecomposition {
                    eigenvalues,
                    eigenvectors,
                }
            })
        });
        match res {
            Ok(s) => Ok(s),
            Err(e) => Err(e.clone().into()),
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.min_eigenvalue())
    }

    /// Spectral norm (largest eigenvalue magnitude).
    pub fn norm(&self) -> Result<f64> {
        Ok(self.spectrum()?.norm())
    }
}

/// Eigendecomposition of a Hermitian operator (cached on the operator).
pub fn eigendecompose(h: &HermitianOperator) -> Result<&SpectralDecomposition> {
    h.spectrum()
}

/// `H^(n/2)` through the spectral calculus.
pub fn half_power(h: &HermitianOperator, n: i32) -> Result<HermitianOperator> {
    let m = h.spectrum()?.half_power_matrix(n)?;
    HermitianOperator::new(m)
}

/// Operator norm (largest singular value) of an arbitrary complex matrix.
pub fn operator_norm(a: &CMat) -> Result<f64> {
    Ok(linalg::spectral_norm(a)?)
}

/// `AB - BA`. Anti-Hermitian when both inputs are Hermitian.
pub fn commutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<CMat> {
    if a.dim() != b.dim() {
        return Err(NumericError::DimensionMismatch(a.dim(), b.dim()).into());
    }
    let ab = linalg::matmul(a.entries(), b.entries());
    let ba = linalg::matmul(b.entries(), a.entries());
    Ok(&ab - &ba)
}

/// The relative half-bound `a = ‖H1 H0^(-1/2)‖`, the minimal constant with
/// `‖H1 psi‖ <= a ‖H0^(1/2) psi‖` given a strictly positive lower bound on H0.
pub fn relative_half_bound(h1: &HermitianOperator, h0: &HermitianOperator) -> Result<f64> {
    if h1.dim() != h0.dim() {
        return Err(NumericError::DimensionMismatch(h1.dim(), h0.dim()).into());
    }
    let h0_inv_sqrt = half_power(h0, -1)?;
    let prod = linalg::matmul(h1.entries(), h0_inv_sqrt.entries());
    operator_norm(&prod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::linalg::{identity, matmul, max_abs};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_eigendecomposition() {
        let h = HermitianOperator::from_diagonal(&[1.0, 4.0]);
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 4.0]);
        // standard-basis eigenvectors up to phase
        for j in 0..2 {
            let col = s.eigenvectors().column(j);
            assert!((col[j].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2,1],[1,2]] has characteristic polynomial (2-x)^2 - 1 with roots 1 and 3.
        let m = ndarray::arr2(&[[c(2.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(2.0, 0.0)]]);
        let h = HermitianOperator::new(m).unwrap();
        let s = eigendecompose(&h).unwrap();
        assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((s.eigenvalues()[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_identity() {
        let m = crate::model::test_support::random_hermitian(12, 99);
        let h = HermitianOperator::new(m.clone()).unwrap();
        let s = eigendecompose(&h).unwrap();
        let rec = s.map_eigenvalues(|x| x);
        let scale = h.norm().unwrap();
        assert!(max_abs(&(&rec - h.entries())) <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn half_power_diagonal_cases() {
        let h = HermitianOperator::from_diagonal(&[1.0, 4.0]);
        let sqrt = half_power(&h, 1).unwrap();
        assert!(max_abs(&(sqrt.entries() - &HermitianOperator::from_diagonal(&[1.0, 2.0]).entries)) < 1e-12);
        let inv = half_power(&h, -2).unwrap();
        assert!(max_abs(&(inv.entries() - &HermitianOperator::from_diagonal(&[1.0, 0.25]).entries)) < 1e-12);
    }

    #[test]
    fn half_power_group_property() {
        let m = crate::model::test_support::random_spd(10, 7, 1.0, 9.0);
        let h = HermitianOperator::new(m).unwrap();
        for (a, b) in [(1, 1), (3, -3), (-2, 5), (4, 4), (-8, 8)] {
            let pa = half_power(&h, a).unwrap();
            let pb = half_power(&h, b).unwrap();
            let pab = half_power(&h, a + b).unwrap();
            let prod = matmul(pa.entries(), pb.entries());
            let err = max_abs(&(&prod - pab.entries()));
            assert!(err < 1e-10 * pab.norm().unwrap().max(1.0), "m={a} n={b} err={err}");
        }
    }

    #[test]
    fn floor_violation_detected() {
        let h = HermitianOperator::from_diagonal(&[0.5, 2.0]);
        let err = half_power(&h, -1).unwrap_err();
        match err {
            Error::Numeric(NumericError::SpectralFloor { min_eigenvalue, .. }) => {
                assert!((min_eigenvalue - 0.5).abs() < 1e-14);
            }
            other => panic!("expected spectral floor error, got {other:?}"),
        }
        // dust just below 1 is clamped, not fatal
        let h = HermitianOperator::from_diagonal(&[1.0 - 5e-10, 2.0]);
        let inv = half_power(&h, -2).unwrap();
        assert!((inv.entries()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_examples() {
        let u = ndarray::arr2(&[
            [c(0.0, 0.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!((operator_norm(&u).unwrap() - 1.0).abs() < 1e-12);
        let d = ndarray::arr2(&[
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(-3.0, 0.0)],
        ]);
        assert!((operator_norm(&d).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_matches_power_iteration() {
        let a = crate::model::test_support::random_complex(16, 31);
        let fast = operator_norm(&a).unwrap();
        // power iteration on A†A as the independent oracle
        let gram = crate::linalg::adj_matmul(&a, &a);
        let mut v = ndarray::Array1::from_elem(16, c(1.0, 0.3));
        let mut lam = 0.0;
        for _ in 0..3000 {
            let w = gram.dot(&v);
            lam = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v = w.mapv(|z| z / lam);
        }
        assert!((fast - lam.sqrt()).abs() < 1e-8 * lam.sqrt().max(1.0));
    }

    #[test]
    fn commutator_cases() {
        let h = HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0]);
        let z = commutator(&h, &h).unwrap();
        assert!(max_abs(&z) < 1e-14);

        // pauli_x with pauli_z gives -2i pauli_y
        let sx = HermitianOperator::new(ndarray::arr2(&[
            [c(0.0, 0.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0)],
        ]))
        .unwrap();
        let sz = HermitianOperator::new(ndarray::arr2(&[
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(-1.0, 0.0)],
        ]))
        .unwrap();
        let comm = commutator(&sx, &sz).unwrap();
        // direct 2x2 multiplication: sx sz - sz sx = [[0,-2],[2,0]], i.e. -2i sy
        let expect = ndarray::arr2(&[
            [c(0.0, 0.0), c(-2.0, 0.0)],
            [c(2.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!(max_abs(&(&comm - &expect)) < 1e-14);
        // anti-Hermitian
        let sum = &comm + &linalg::adjoint(&comm);
        assert!(max_abs(&sum) < 1e-14);
    }

    #[test]
    fn relative_half_bound_cases() {
        let h0 = HermitianOperator::from_diagonal(&[2.0, 5.0, 9.0]);
        let h1 = half_power(&h0, 1).unwrap();
        assert!((relative_half_bound(&h1, &h0).unwrap() - 1.0).abs() < 1e-12);
        let zero = HermitianOperator::from_diagonal(&[0.0, 0.0, 0.0]);
        assert!(relative_half_bound(&zero, &h0).unwrap() < 1e-15);
    }

    #[test]
    fn conjugation_covariance() {
        let m = crate::model::test_support::random_spd(8, 5, 1.0, 6.0);
        let h = HermitianOperator::new(m).unwrap();
        let w = crate::model::test_support::random_unitary(8, 17);
        let conj = HermitianOperator::new(matmul(&matmul(&w, h.entries()), &linalg::adjoint(&w))).unwrap();
        for n in [-3, 1, 2] {
            let lhs = half_power(&conj, n).unwrap();
            let rhs = matmul(&matmul(&w, half_power(&h, n).unwrap().entries()), &linalg::adjoint(&w));
            assert!(max_abs(&(lhs.entries() - &rhs)) < 1e-10 * lhs.norm().unwrap().max(1.0));
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = identity(2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(HermitianOperator::new(m).is_err());
    }
}
