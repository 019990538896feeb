//! Thin dense complex linear-algebra layer over LAPACK/BLAS.
//!
//! Matrices are `ndarray::Array2<Complex64>` in row-major order; the shim
//! copies in and out of column-major scratch buffers with explicit indexing,
//! which is negligible next to the O(n^3) factorizations.

use crate::error::NumericError;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::os::raw::c_char;
use std::sync::Once;

pub type CMat = Array2<C64>;

extern "C" {
    fn openblas_set_num_threads(n: i32);
    fn cblas_zgemm(
        layout: i32,
        transa: i32,
        transb: i32,
        m: i32,
        n: i32,
        k: i32,
        alpha: *const C64,
        a: *const C64,
        lda: i32,
        b: *const C64,
        ldb: i32,
        beta: *const C64,
        c: *mut C64,
        ldc: i32,
    );
}

const CBLAS_ROW_MAJOR: i32 = 101;
const CBLAS_NO_TRANS: i32 = 111;
const CBLAS_CONJ_TRANS: i32 = 113;

static BLAS_INIT: Once = Once::new();

/// Pin the BLAS backend to a single thread. Parallelism in this crate lives at
/// the certification-cell level; single-threaded kernels keep runs bit-for-bit
/// reproducible regardless of the worker-pool size.
pub fn pin_blas_single_thread() {
    BLAS_INIT.call_once(|| unsafe {
        openblas_set_num_threads(1);
    });
}

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry magnitude; cheap scale estimate used in tolerances.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `A · B` through BLAS zgemm.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    gemm(a, false, b, false)
}

/// `A · B†` through BLAS zgemm.
pub fn matmul_adj(a: &CMat, b: &CMat) -> CMat {
    gemm(a, false, b, true)
}

/// `A† · B` through BLAS zgemm.
pub fn adj_matmul(a: &CMat, b: &CMat) -> CMat {
    gemm(a, true, b, false)
}

fn gemm(a: &CMat, adj_a: bool, b: &CMat, adj_b: bool) -> CMat {
    pin_blas_single_thread();
    let (m, ka) = if adj_a {
        (a.ncols(), a.nrows())
    } else {
        (a.nrows(), a.ncols())
    };
    let (kb, n) = if adj_b {
        (b.ncols(), b.nrows())
    } else {
        (b.nrows(), b.ncols())
    };
    assert_eq!(ka, kb, "gemm inner dimension mismatch");
    let a_c = a.as_standard_layout();
    let b_c = b.as_standard_layout();
    let mut c = Array2::<C64>::zeros((m, n));
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    unsafe {
        cblas_zgemm(
            CBLAS_ROW_MAJOR,
            if adj_a { CBLAS_CONJ_TRANS } else { CBLAS_NO_TRANS },
            if adj_b { CBLAS_CONJ_TRANS } else { CBLAS_NO_TRANS },
            m as i32,
            n as i32,
            ka as i32,
            &one,
            a_c.as_ptr(),
            a.ncols() as i32,
            b_c.as_ptr(),
            b.ncols() as i32,
            &zero,
            c.as_mut_ptr(),
            n as i32,
        );
    }
    c
}

fn to_col_major(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            buf[j * n + i] = a[(i, j)];
        }
    }
    buf
}

fn from_col_major(buf: &[C64], n: usize) -> CMat {
    let mut a = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = buf[j * n + i];
        }
    }
    a
}

fn zheevd(buf: &mut [C64], n: usize, vectors: bool) -> Result<Vec<f64>, NumericError> {
    pin_blas_single_thread();
    let mut w = vec![0f64; n];
    let ni = n as i32;
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let mut info = 0i32;

    // workspace query
    let query = -1i32;
    let mut wkopt = C64::new(0.0, 0.0);
    let mut rwkopt = 0f64;
    let mut iwkopt = 0i32;
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            &mut wkopt as *mut _ as *mut _,
            &query,
            &mut rwkopt,
            &query,
            &mut iwkopt,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(NumericError::EigenFailed { info });
    }
    let lwork = wkopt.re as i32;
    let lrwork = rwkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(NumericError::EigenFailed { info });
    }
    Ok(w)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending plus the
/// unitary matrix whose columns are the eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> Result<(Vec<f64>, CMat), NumericError> {
    let n = a.nrows();
    let mut buf = to_col_major(a);
    let w = zheevd(&mut buf, n, true)?;
    Ok((w, from_col_major(&buf, n)))
}

/// Eigenvalues (ascending) of a Hermitian matrix, without eigenvectors.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>, NumericError> {
    let n = a.nrows();
    let mut buf = to_col_major(a);
    zheevd(&mut buf, n, false)
}

/// Solve `A X = B` for Hermitian positive-definite `A` by Cholesky (zposv).
/// This is the resolvent path used by the quadrature routes; it deliberately
/// avoids the eigendecomposition machinery so the two stay independent.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat, NumericError> {
    pin_blas_single_thread();
    let n = a.nrows();
    if b.nrows() != n {
        return Err(NumericError::DimensionMismatch(n, b.nrows()));
    }
    let nrhs = b.ncols();
    let mut a_buf = to_col_major(a);
    let mut b_buf = vec![C64::new(0.0, 0.0); n * nrhs];
    for j in 0..nrhs {
        for i in 0..n {
            b_buf[j * n + i] = b[(i, j)];
        }
    }
    let ni = n as i32;
    let nrhsi = nrhs as i32;
    let uplo = b'L' as c_char;
    let mut info = 0i32;
    unsafe {
        lapack_sys::zposv_(
            &uplo,
            &ni,
            &nrhsi,
            a_buf.as_mut_ptr() as *mut _,
            &ni,
            b_buf.as_mut_ptr() as *mut _,
            &ni,
            &mut info,
        );
    }
    if info != 0 {
        return Err(NumericError::SolveFailed { info });
    }
    let mut x = Array2::<C64>::zeros((n, nrhs));
    for j in 0..nrhs {
        for i in 0..n {
            x[(i, j)] = b_buf[j * n + i];
        }
    }
    Ok(x)
}

/// Largest singular value, computed as sqrt of the top eigenvalue of `A† A`.
pub fn spectral_norm(a: &CMat) -> Result<f64, NumericError> {
    if !all_finite(a) {
        return Err(NumericError::NonFiniteEntries);
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let gram = adj_matmul(a, a);
    let vals = hermitian_eigenvalues(&gram)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Spectral norm of a matrix known to be Hermitian or anti-Hermitian:
/// the largest eigenvalue magnitude, no Gram matrix needed.
pub fn spectral_norm_normal(a: &CMat, anti: bool) -> Result<f64, NumericError> {
    let h = if anti {
        a.mapv(|z| z * C64::new(0.0, -1.0))
    } else {
        a.clone()
    };
    let vals = hermitian_eigenvalues(&h)?;
    Ok(vals
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigen_of_diagonal() {
        let a = Array2::from_diag(&ndarray::arr1(&[c(4.0, 0.0), c(1.0, 0.0)]));
        let (w, v) = hermitian_eigen(&a).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert!((w[1] - 4.0).abs() < 1e-14);
        // eigenvector columns unitary
        let vv = adj_matmul(&v, &v);
        assert!(max_abs(&(&vv - &identity(2))) < 1e-12);
    }

    #[test]
    fn eigen_reconstructs() {
        let a = ndarray::arr2(&[
            [c(2.0, 0.0), c(1.0, -0.5)],
            [c(1.0, 0.5), c(3.0, 0.0)],
        ]);
        let (w, v) = hermitian_eigen(&a).unwrap();
        let mut d = Array2::<C64>::zeros((2, 2));
        for i in 0..2 {
            d[(i, i)] = c(w[i], 0.0);
        }
        let rec = matmul_adj(&matmul(&v, &d), &v);
        assert!(max_abs(&(&rec - &a)) < 1e-12);
    }

    #[test]
    fn gemm_matches_naive() {
        let a = ndarray::arr2(&[
            [c(1.0, 2.0), c(0.0, -1.0)],
            [c(3.0, 0.0), c(2.0, 2.0)],
        ]);
        let b = ndarray::arr2(&[
            [c(0.5, 0.0), c(1.0, 1.0)],
            [c(-1.0, 0.0), c(0.0, 2.0)],
        ]);
        let fast = matmul(&a, &b);
        let slow = a.dot(&b);
        assert!(max_abs(&(&fast - &slow)) < 1e-14);
        let fast = matmul_adj(&a, &b);
        let slow = a.dot(&adjoint(&b));
        assert!(max_abs(&(&fast - &slow)) < 1e-14);
        let fast = adj_matmul(&a, &b);
        let slow = adjoint(&a).dot(&b);
        assert!(max_abs(&(&fast - &slow)) < 1e-14);
    }

    #[test]
    fn hpd_solve_inverts() {
        let a = ndarray::arr2(&[
            [c(3.0, 0.0), c(0.5, 0.5)],
            [c(0.5, -0.5), c(2.0, 0.0)],
        ]);
        let x = solve_hpd(&a, &identity(2)).unwrap();
        let res = matmul(&a, &x);
        assert!(max_abs(&(&res - &identity(2))) < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diag() {
        let a = Array2::from_diag(&ndarray::arr1(&[c(1.0, 0.0), c(-3.0, 0.0)]));
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-12);
        assert!((spectral_norm_normal(&a, false).unwrap() - 3.0).abs() < 1e-12);
    }
}
