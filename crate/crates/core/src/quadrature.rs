//! Integral-representation routes for operator functions.
//!
//! The square root of a positive operator `A >= delta > 0` admits the
//! representation `sqrt(A) = (2/pi) \int_0^inf A (x^2 + A)^{-1} dx`, and
//! multiplying by `A^{-1/2}` gives `Id = (2/pi) \int_0^inf A^{1/2} (x^2+A)^{-1} dx`.
//! These are evaluated here by adaptive quadrature over resolvent solves,
//! deliberately independent of the eigendecomposition path so the two can
//! cross-check each other.
//!
//! The substitution `x = tan(theta)` maps the half-line to `[0, pi/2]`; all
//! integrands used here extend continuously to the endpoint.

use crate::error::{Error, NumericError, Result};
use crate::linalg::{self, CMat};
use crate::operator::HermitianOperator;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, PI};

/// Hard cap on integrand evaluations.
pub const NODE_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct QuadratureOutcome {
    pub value: CMat,
    pub nodes: usize,
    pub error_estimate: f64,
}

struct Panel {
    a: f64,
    b: f64,
    fa: CMat,
    fm: CMat,
    fb: CMat,
    simpson: CMat,
}

fn simpson(a: f64, b: f64, fa: &CMat, fm: &CMat, fb: &CMat) -> CMat {
    let h = (b - a) / 6.0;
    let mut s = fa + fb;
    s.scaled_add(C64::new(4.0, 0.0), fm);
    s.mapv(|z| z * h)
}

struct Refined {
    left: Panel,
    right: Panel,
    /// Richardson-improved value over the panel.
    value: CMat,
    error: f64,
}

fn make_panel<F>(f: &F, a: f64, b: f64, fa: CMat, fb: CMat, nodes: &mut usize) -> Result<Panel>
where
    F: Fn(f64) -> Result<CMat>,
{
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    *nodes += 1;
    let s = simpson(a, b, &fa, &fm, &fb);
    Ok(Panel {
        a,
        b,
        fa,
        fm,
        fb,
        simpson: s,
    })
}

fn refine<F>(f: &F, panel: &Panel, nodes: &mut usize) -> Result<Refined>
where
    F: Fn(f64) -> Result<CMat>,
{
    let m = 0.5 * (panel.a + panel.b);
    let left = make_panel(f, panel.a, m, panel.fa.clone(), panel.fm.clone(), nodes)?;
    let right = make_panel(f, m, panel.b, panel.fm.clone(), panel.fb.clone(), nodes)?;
    let two = &left.simpson + &right.simpson;
    let diff = &two - &panel.simpson;
    let error = linalg::frobenius(&diff) / 15.0;
    let value = &two + &diff.mapv(|z| z / 15.0);
    Ok(Refined {
        left,
        right,
        value,
        error,
    })
}

/// Adaptive Simpson integration of a matrix-valued integrand over `[lo, hi]`,
/// refining the worst panel until the accumulated error estimate drops below
/// `rel_tol` relative to the running value (Frobenius norms).
fn adaptive_integral<F>(f: F, dim: usize, lo: f64, hi: f64, rel_tol: f64) -> Result<QuadratureOutcome>
where
    F: Fn(f64) -> Result<CMat>,
{
    const INITIAL_PANELS: usize = 8;
    let mut nodes = 0usize;
    let mut endpoints: Vec<(f64, CMat)> = Vec::with_capacity(INITIAL_PANELS + 1);
    for k in 0..=INITIAL_PANELS {
        let theta = lo + (hi - lo) * (k as f64) / (INITIAL_PANELS as f64);
        endpoints.push((theta, f(theta)?));
        nodes += 1;
    }
    // entries of the work list carry the refinement lookahead
    let mut entries: Vec<Refined> = Vec::new();
    for w in endpoints.windows(2) {
        let panel = make_panel(
            &f,
            w[0].0,
            w[1].0,
            w[0].1.clone(),
            w[1].1.clone(),
            &mut nodes,
        )?;
        entries.push(refine(&f, &panel, &mut nodes)?);
    }

    let full_sums = |entries: &[Refined]| -> (CMat, f64) {
        let total = entries
            .iter()
            .fold(Array2::<C64>::zeros((dim, dim)), |acc, e| acc + &e.value);
        let err = entries.iter().map(|e| e.error).sum();
        (total, err)
    };
    let (mut total, mut err) = full_sums(&entries);
    let mut iterations = 0usize;
    loop {
        let scale = linalg::frobenius(&total).max(1e-300);
        if err <= rel_tol * scale {
            // cancel incremental drift before reporting
            let (total, err) = full_sums(&entries);
            let scale = linalg::frobenius(&total).max(1e-300);
            return Ok(QuadratureOutcome {
                value: total,
                nodes,
                error_estimate: err / scale,
            });
        }
        if nodes >= NODE_BUDGET {
            return Err(Error::Numeric(NumericError::QuadratureConvergence {
                nodes,
                residual: err / scale,
                target: rel_tol,
            }));
        }
        let worst = entries
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("nonempty panel list");
        let popped = entries.swap_remove(worst);
        let l = refine(&f, &popped.left, &mut nodes)?;
        let r = refine(&f, &popped.right, &mut nodes)?;
        total = total - &popped.value + &l.value + &r.value;
        err += l.error + r.error - popped.error;
        entries.push(l);
        entries.push(r);
        iterations += 1;
        if iterations % 512 == 0 {
            let (t, e) = full_sums(&entries);
            total = t;
            err = e;
        }
    }
}

fn non_pd_hint(e: Error) -> Error {
    match e {
        Error::Numeric(NumericError::SolveFailed { info }) if info > 0 => {
            Error::Numeric(NumericError::NotPositiveDefinite {
                min_eigenvalue: f64::NAN,
            })
        }
        other => other,
    }
}

/// Resolvent `(x^2 + H)^{-1}` applied to a right-hand side via Cholesky.
fn resolvent_apply(h: &CMat, x: f64, rhs: &CMat) -> Result<CMat> {
    let n = h.nrows();
    let mut shifted = h.clone();
    let x2 = C64::new(x * x, 0.0);
    for i in 0..n {
        shifted[(i, i)] += x2;
    }
    linalg::solve_hpd(&shifted, rhs).map_err(|e| non_pd_hint(Error::Numeric(e)))
}

/// Square root of a positive-definite operator through the half-line
/// resolvent integral, with adaptive refinement under a node budget.
/// The result agrees with the spectral square root to the requested relative
/// tolerance; the two paths share no factorization code.
pub fn sqrt_quadrature(h: &HermitianOperator, tol: f64) -> Result<HermitianOperator> {
    Ok(sqrt_quadrature_outcome(h, tol)?.0)
}

pub fn sqrt_quadrature_outcome(
    h: &HermitianOperator,
    tol: f64,
) -> Result<(HermitianOperator, QuadratureOutcome)> {
    let dim = h.dim();
    let entries = h.entries().clone();
    let f = move |theta: f64| -> Result<CMat> {
        if (theta - FRAC_PI_2).abs() < 1e-300 {
            return Ok(entries.mapv(|z| z * (2.0 / PI)));
        }
        let x = theta.tan();
        let sol = resolvent_apply(&entries, x, &entries)?;
        Ok(sol.mapv(|z| z * (2.0 / PI) * (1.0 + x * x)))
    };
    let outcome = adaptive_integral(f, dim, 0.0, FRAC_PI_2, tol)?;
    Ok((HermitianOperator::new(outcome.value.clone())?, outcome))
}

/// Evaluates `(2/pi) \int_0^inf S (x^2 + H)^{-1} dx` for `S = sqrt(H)`;
/// reproduces the identity when `S` is consistent with `H`.
pub fn identity_representation(
    h: &HermitianOperator,
    sqrt_h: &CMat,
    tol: f64,
) -> Result<QuadratureOutcome> {
    let dim = h.dim();
    let entries = h.entries().clone();
    let s = sqrt_h.clone();
    let f = move |theta: f64| -> Result<CMat> {
        if (theta - FRAC_PI_2).abs() < 1e-300 {
            return Ok(s.mapv(|z| z * (2.0 / PI)));
        }
        let x = theta.tan();
        let sol = resolvent_apply(&entries, x, &s)?;
        Ok(sol.mapv(|z| z * (2.0 / PI) * (1.0 + x * x)))
    };
    adaptive_integral(f, dim, 0.0, FRAC_PI_2, tol)
}

/// The derivative kernel `(2/pi) \int_0^inf x^2 (x^2+H)^{-1} B (x^2+H)^{-1} dx`.
/// Scaled by the switching-rate prefactor it gives the time derivative of
/// `H^{1/2}` along a drive.
pub fn derivative_kernel_quadrature(
    h: &HermitianOperator,
    b: &CMat,
    tol: f64,
) -> Result<QuadratureOutcome> {
    let dim = h.dim();
    let entries = h.entries().clone();
    let b = b.clone();
    let eye = linalg::identity(dim);
    let f = move |theta: f64| -> Result<CMat> {
        if (theta - FRAC_PI_2).abs() < 1e-300 {
            return Ok(b.mapv(|z| z * (2.0 / PI)));
        }
        let x = theta.tan();
        let r = resolvent_apply(&entries, x, &eye)?;
        let rb = linalg::matmul(&r, &b);
        let rbr = linalg::matmul(&rb, &r);
        Ok(rbr.mapv(|z| z * (2.0 / PI) * x * x * (1.0 + x * x)))
    };
    adaptive_integral(f, dim, 0.0, FRAC_PI_2, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs};
    use crate::operator::{half_power, operator_norm};

    #[test]
    fn sqrt_of_identity() {
        let h = HermitianOperator::from_diagonal(&[1.0, 1.0, 1.0]);
        let s = sqrt_quadrature(&h, 1e-8).unwrap();
        assert!(max_abs(&(s.entries() - &identity(3))) < 1e-7);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let h = HermitianOperator::from_diagonal(&[1.0, 4.0]);
        let s = sqrt_quadrature(&h, 1e-8).unwrap();
        assert!((s.entries()[(0, 0)].re - 1.0).abs() < 1e-7);
        assert!((s.entries()[(1, 1)].re - 2.0).abs() < 1e-7);
        assert!(s.entries()[(0, 1)].norm() < 1e-8);
    }

    #[test]
    fn sqrt_matches_spectral_route() {
        let m = crate::model::test_support::random_spd(8, 42, 1.0, 10.0);
        let h = HermitianOperator::new(m).unwrap();
        let q = sqrt_quadrature(&h, 1e-8).unwrap();
        let s = half_power(&h, 1).unwrap();
        let rel = operator_norm(&(q.entries() - s.entries())).unwrap()
            / operator_norm(s.entries()).unwrap();
        assert!(rel <= 1e-6, "relative error {rel}");
    }

    #[test]
    fn identity_reproduced() {
        let m = crate::model::test_support::random_spd(6, 7, 1.0, 50.0);
        let h = HermitianOperator::new(m).unwrap();
        let s = half_power(&h, 1).unwrap();
        let out = identity_representation(&h, s.entries(), 1e-8).unwrap();
        let err = operator_norm(&(&out.value - &identity(6))).unwrap();
        assert!(err <= 1e-6, "identity defect {err}");
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        // a wildly ill-conditioned matrix cannot converge at an absurd tolerance
        let h = HermitianOperator::from_diagonal(&[1.0, 1e9]);
        let err = sqrt_quadrature(&h, 1e-15);
        match err {
            Err(Error::Numeric(NumericError::QuadratureConvergence { nodes, residual, .. })) => {
                assert!(nodes >= NODE_BUDGET);
                assert!(residual > 0.0);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_indefinite() {
        let h = HermitianOperator::from_diagonal(&[-1.0, 2.0]);
        assert!(sqrt_quadrature(&h, 1e-8).is_err());
    }
}
