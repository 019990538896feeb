//! Two-parameter unitary propagators for the driven pair, in the physical and
//! rotating (interaction) frames, plus the gauge transport relating them.
//!
//! The integrator is midpoint-exponential: every accepted step multiplies by
//! `exp(-i dt H(t + dt/2))`, so each step is unitary by construction and the
//! measured drift reflects floating error only. Step-doubling controls the
//! local error against a per-unit-time budget, which makes the accumulated
//! estimate for the whole requested interval come in at or below `tol`.
//! Intervals on which the generator is constant are handled by a single exact
//! exponential.

use crate::error::{NumericError, Result};
use crate::linalg::{self, CMat};
use crate::model::{self, DriveParams, ModelPair};
use crate::operator::HermitianOperator;

/// Integration step budget, counting rejected trials.
pub const STEP_BUDGET: u64 = 10_000_000;

/// Unitarity drift allowed on construction.
pub const UNITARITY_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    Physical,
    Interaction,
}

/// A propagator segment `U(to, from)` with its accumulated local-error bound.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    matrix: CMat,
    picture: Picture,
    from: f64,
    to: f64,
    epsilon: f64,
    eta: f64,
    error_estimate: f64,
    steps: u64,
}

impl UnitaryPropagator {
    fn new(
        matrix: CMat,
        picture: Picture,
        from: f64,
        to: f64,
        drive: &DriveParams,
        error_estimate: f64,
        steps: u64,
    ) -> Result<Self> {
        let n = matrix.nrows();
        let gram = linalg::adj_matmul(&matrix, &matrix);
        let drift = linalg::max_abs(&(&gram - &linalg::identity(n)));
        if drift > UNITARITY_LIMIT {
            return Err(NumericError::UnitarityDrift { drift }.into());
        }
        Ok(UnitaryPropagator {
            matrix,
            picture,
            from,
            to,
            epsilon: drive.epsilon,
            eta: drive.eta,
            error_estimate,
            steps,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (self.from, self.to)
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Unitarity defect `‖U†U - Id‖` of the stored matrix.
    pub fn unitarity_drift(&self) -> f64 {
        let gram = linalg::adj_matmul(&self.matrix, &self.matrix);
        linalg::max_abs(&(&gram - &linalg::identity(self.matrix.nrows())))
    }
}

/// One exponential step `exp(-i dt H)` for a Hermitian generator.
fn exp_step(h: &HermitianOperator, dt: f64) -> Result<CMat> {
    Ok(h.spectrum()?.unitary_exp(-dt))
}

/// Generator abstraction shared by the two pictures: produces the step
/// unitary `exp(-i dt K(t_mid))` for the effective generator `K`.
trait Generator {
    fn step_unitary(&self, t_mid: f64, dt: f64) -> Result<CMat>;
    /// Largest time with `K` constant on `[t, x]` (or smallest with constant
    /// `[x, t]` when integrating backwards), used for the exact shortcut.
    fn constant_until(&self, t: f64, forward: bool) -> f64;
    /// Initial trial step; the generator varies on the switching scale.
    fn initial_step(&self) -> Result<f64>;
}

struct PhysicalGenerator<'a> {
    model: &'a ModelPair,
    drive: &'a DriveParams,
}

impl Generator for PhysicalGenerator<'_> {
    fn step_unitary(&self, t_mid: f64, dt: f64) -> Result<CMat> {
        let h = model::hamiltonian_at(self.model, self.drive, t_mid);
        exp_step(&h, dt)
    }

    fn constant_until(&self, t: f64, forward: bool) -> f64 {
        let ramp_start = 0.0;
        let ramp_end = 1.0 / self.drive.eta;
        if self.drive.epsilon == 0.0 {
            return if forward { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        if forward {
            if t < ramp_start {
                ramp_start
            } else if t >= ramp_end {
                f64::INFINITY
            } else {
                t
            }
        } else if t > ramp_end {
            ramp_end
        } else if t <= ramp_start {
            f64::NEG_INFINITY
        } else {
            t
        }
    }

    fn initial_step(&self) -> Result<f64> {
        let norm = self.model.h0().norm()?;
        Ok((0.01 / self.drive.eta).min(0.01) / (1.0 + norm))
    }
}

struct InteractionGenerator<'a> {
    model: &'a ModelPair,
    drive: &'a DriveParams,
}

impl Generator for InteractionGenerator<'_> {
    fn step_unitary(&self, s_mid: f64, ds: f64) -> Result<CMat> {
        // exp(-i ds H_hat(s)/eta) = G(s) exp(-i ds H0/eta) G(s)†
        let g = model::gauge_factor(self.model, self.drive, s_mid)?;
        let core = exp_step(self.model.h0(), ds / self.drive.eta)?;
        Ok(linalg::matmul_adj(&linalg::matmul(&g, &core), &g))
    }

    fn constant_until(&self, s: f64, forward: bool) -> f64 {
        // the rotating-frame generator is constant only before the switch
        // starts: phi grows linearly after s = 1, so H_hat keeps rotating
        if self.drive.epsilon == 0.0 {
            return if forward { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        if forward {
            if s < 0.0 {
                0.0
            } else {
                s
            }
        } else if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            s
        }
    }

    fn initial_step(&self) -> Result<f64> {
        // macroscopic-time analogue: the effective generator is H_hat/eta
        let norm = self.model.h0().norm()? / self.drive.eta;
        Ok(0.01 / (1.0 + norm))
    }
}

struct AdaptiveOutcome {
    matrix: CMat,
    error: f64,
    steps: u64,
}

/// Adaptive march from `a` to `b` (either direction). `rate` is the local
/// error allowance per unit time.
fn adaptive_march<G: Generator>(
    gen: &G,
    dim: usize,
    a: f64,
    b: f64,
    rate: f64,
    dt0: f64,
    budget: &mut u64,
) -> Result<AdaptiveOutcome> {
    let mut u = linalg::identity(dim);
    let mut err = 0.0f64;
    let mut steps = 0u64;
    if a == b {
        return Ok(AdaptiveOutcome {
            matrix: u,
            error: 0.0,
            steps,
        });
    }
    let dir = if b > a { 1.0 } else { -1.0 };
    let mut t = a;
    let mut dt = dt0.min((b - a).abs());
    while (b - t) * dir > 0.0 {
        dt = dt.min((b - t).abs());
        loop {
            if *budget == 0 {
                return Err(NumericError::StepBudget {
                    budget: STEP_BUDGET,
                    reached: t,
                    from: a,
                    to: b,
                    accumulated: err,
                }
                .into());
            }
            *budget -= 1;
            steps += 1;
            let sdt = dir * dt;
            let full = gen.step_unitary(t + 0.5 * sdt, sdt)?;
            let half1 = gen.step_unitary(t + 0.25 * sdt, 0.5 * sdt)?;
            let half2 = gen.step_unitary(t + 0.75 * sdt, 0.5 * sdt)?;
            let fine = linalg::matmul(&half2, &half1);
            let diff = linalg::frobenius(&(&fine - &full));
            // floating noise floor of comparing two unitary products; below
            // it the comparison carries no information and must not trigger
            // further shrinking
            let noise = 1e-14 * (dim as f64).sqrt();
            let allowed = (rate * dt).max(noise);
            if diff <= allowed || dt <= 1e-14 * (b - a).abs() {
                u = linalg::matmul(&fine, &u);
                err += diff;
                t += sdt;
                let grow = if diff > 0.0 {
                    0.9 * (allowed / diff).sqrt()
                } else {
                    2.0
                };
                dt *= grow.clamp(0.5, 2.0);
                break;
            }
            dt *= (0.9 * (allowed / diff).sqrt()).clamp(0.25, 0.9);
        }
    }
    Ok(AdaptiveOutcome {
        matrix: u,
        error: err,
        steps,
    })
}

/// Shared driver: splits the requested interval into constant-generator spans
/// (handled by one exact exponential each) and adaptive spans.
fn integrate<G: Generator>(
    gen: &G,
    from: f64,
    to: f64,
    tol: f64,
    dim: usize,
) -> Result<(CMat, f64, u64)> {
    let mut u = linalg::identity(dim);
    let mut err = 0.0f64;
    let mut steps = 0u64;
    let mut budget = STEP_BUDGET;
    if from == to {
        return Ok((u, 0.0, 0));
    }
    let forward = to > from;
    let dir = if forward { 1.0 } else { -1.0 };

    // walk the interval, classifying each span as constant or adaptive
    let mut segments: Vec<(f64, f64, bool)> = Vec::new();
    let mut t = from;
    while (to - t) * dir > 0.0 {
        let hold = gen.constant_until(t, forward);
        if (hold - t) * dir > 0.0 {
            let end = if forward { to.min(hold) } else { to.max(hold) };
            segments.push((t, end, true));
            t = end;
        } else {
            // adaptive until the next constant region, which can only begin
            // where the generator seen from the far endpoint becomes constant
            let hold_back = gen.constant_until(to, !forward);
            let end = if (hold_back - t) * dir > 0.0 && (to - hold_back) * dir >= 0.0 {
                hold_back
            } else {
                to
            };
            segments.push((t, end, false));
            t = end;
        }
    }
    let adaptive_span: f64 = segments
        .iter()
        .filter(|s| !s.2)
        .map(|s| (s.1 - s.0).abs())
        .sum();
    let rate = tol / adaptive_span.max(f64::MIN_POSITIVE);
    let dt0 = gen.initial_step()?;

    for (sa, sb, constant) in segments {
        if constant {
            let u_seg = gen.step_unitary(sa, (sb - sa) as f64)?;
            u = linalg::matmul(&u_seg, &u);
            steps += 1;
        } else {
            let out = adaptive_march(gen, dim, sa, sb, rate, dt0, &mut budget)?;
            u = linalg::matmul(&out.matrix, &u);
            err += out.error;
            steps += out.steps;
        }
    }
    Ok((u, err, steps))
}

/// Integrate the physical-picture propagator `U(t_to, t_from)`.
pub fn evolve(
    model: &ModelPair,
    drive: &DriveParams,
    t_from: f64,
    t_to: f64,
    tol: f64,
) -> Result<UnitaryPropagator> {
    let gen = PhysicalGenerator { model, drive };
    let (u, err, steps) = integrate(&gen, t_from, t_to, tol, model.dim())?;
    UnitaryPropagator::new(u, Picture::Physical, t_from, t_to, drive, err, steps)
}

/// Integrate the interaction-picture propagator over macroscopic time,
/// `U_hat(s_to, s_from)`, generated by `H_hat(s)/eta`.
pub fn evolve_interaction(
    model: &ModelPair,
    drive: &DriveParams,
    s_from: f64,
    s_to: f64,
    tol: f64,
) -> Result<UnitaryPropagator> {
    let gen = InteractionGenerator { model, drive };
    let (u, err, steps) = integrate(&gen, s_from, s_to, tol, model.dim())?;
    UnitaryPropagator::new(u, Picture::Interaction, s_from, s_to, drive, err, steps)
}

/// Fixed-step midpoint-exponential march in the physical picture; used by
/// convergence-order diagnostics.
pub fn evolve_fixed_steps(
    model: &ModelPair,
    drive: &DriveParams,
    t_from: f64,
    t_to: f64,
    n_steps: usize,
) -> Result<UnitaryPropagator> {
    let gen = PhysicalGenerator { model, drive };
    let dt = (t_to - t_from) / n_steps as f64;
    let mut u = linalg::identity(model.dim());
    for k in 0..n_steps {
        let t = t_from + k as f64 * dt;
        let step = gen.step_unitary(t + 0.5 * dt, dt)?;
        u = linalg::matmul(&step, &u);
    }
    // fixed-step runs carry no budgeted local-error estimate
    UnitaryPropagator::new(
        u,
        Picture::Physical,
        t_from,
        t_to,
        drive,
        f64::INFINITY,
        n_steps as u64,
    )
}

/// Predict the interaction-picture propagator from a physical one through the
/// gauge identity
/// `U_hat(s, u) = exp(i (eps/eta) phi(s) H1) U(s/eta, u/eta) exp(-i (eps/eta) phi(u) H1)`.
pub fn gauge_transport(
    u_phys: &UnitaryPropagator,
    model: &ModelPair,
    drive: &DriveParams,
    s: f64,
    u: f64,
) -> Result<UnitaryPropagator> {
    if u_phys.picture() != Picture::Physical {
        return Err(NumericError::PictureMismatch(
            "gauge transport expects a physical-picture propagator".into(),
        )
        .into());
    }
    let (from, to) = u_phys.endpoints();
    let scale = (1.0 + to.abs().max(from.abs())) * 1e-9;
    if (from - u / drive.eta).abs() > scale || (to - s / drive.eta).abs() > scale {
        return Err(NumericError::PictureMismatch(format!(
            "physical propagator covers ({from}, {to}), expected ({}, {})",
            u / drive.eta,
            s / drive.eta
        ))
        .into());
    }
    let left = model::gauge_factor(model, drive, s)?;
    let right_adj = model::gauge_factor(model, drive, u)?;
    let m = linalg::matmul_adj(&linalg::matmul(&left, u_phys.matrix()), &right_adj);
    UnitaryPropagator::new(
        m,
        Picture::Interaction,
        u,
        s,
        drive,
        u_phys.error_estimate(),
        u_phys.steps(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{adj_matmul, identity, matmul, max_abs};
    use crate::model::{build_commuting_model, build_spectral_model};
    use crate::operator::operator_norm;
    use crate::switching::SwitchFunction;

    fn reference_model() -> (ModelPair, DriveParams) {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let drive = DriveParams::new(&m, 0.1, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        (m, drive)
    }

    #[test]
    fn identity_at_equal_times() {
        let (m, d) = reference_model();
        let u = evolve(&m, &d, 0.4, 0.4, 1e-8).unwrap();
        assert_eq!(max_abs(&(u.matrix() - &identity(8))), 0.0);
    }

    #[test]
    fn autonomous_case_matches_exponential() {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let d = DriveParams::new(&m, 0.0, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let u = evolve(&m, &d, 0.2, 1.7, 1e-10).unwrap();
        let expect = m.h0().spectrum().unwrap().unitary_exp(-(1.7 - 0.2));
        assert!(max_abs(&(u.matrix() - &expect)) < 1e-10);
        assert_eq!(u.steps(), 1); // single exact exponential
    }

    #[test]
    fn cocycle_property() {
        let (m, d) = reference_model();
        let tol = 1e-8;
        let u_ac = evolve(&m, &d, 0.1, 0.9, tol).unwrap();
        let u_ab = evolve(&m, &d, 0.5, 0.9, tol).unwrap();
        let u_bc = evolve(&m, &d, 0.1, 0.5, tol).unwrap();
        let composed = matmul(u_ab.matrix(), u_bc.matrix());
        let residual = operator_norm(&(&composed - u_ac.matrix())).unwrap();
        assert!(residual <= 10.0 * tol, "cocycle residual {residual}");
    }

    #[test]
    fn inverse_is_adjoint() {
        let (m, d) = reference_model();
        let tol = 1e-8;
        let fwd = evolve(&m, &d, 0.0, 0.8, tol).unwrap();
        let bwd = evolve(&m, &d, 0.8, 0.0, tol).unwrap();
        let residual =
            operator_norm(&(&crate::linalg::adjoint(fwd.matrix()) - bwd.matrix())).unwrap();
        assert!(residual <= 10.0 * tol, "inverse residual {residual}");
    }

    #[test]
    fn unitarity_drift_small() {
        let (m, d) = reference_model();
        let u = evolve(&m, &d, -0.3, 1.4, 1e-8).unwrap();
        assert!(u.unitarity_drift() <= 1e-8);
    }

    #[test]
    fn second_order_convergence() {
        let (m, d) = reference_model();
        // strictly inside the ramp so every step sees a varying generator
        let (a, b) = (0.1, 0.9);
        let reference = evolve(&m, &d, a, b, 1e-8).unwrap();
        let coarse = evolve_fixed_steps(&m, &d, a, b, 64).unwrap();
        let fine = evolve_fixed_steps(&m, &d, a, b, 128).unwrap();
        let e_coarse = operator_norm(&(coarse.matrix() - reference.matrix())).unwrap();
        let e_fine = operator_norm(&(fine.matrix() - reference.matrix())).unwrap();
        let ratio = e_coarse / e_fine;
        assert!(
            (3.4..=4.6).contains(&ratio),
            "convergence ratio {ratio} (errors {e_coarse:.3e}, {e_fine:.3e})"
        );
    }

    #[test]
    fn interaction_identity_and_trivial_cases() {
        let (m, d) = reference_model();
        let u = evolve_interaction(&m, &d, 0.3, 0.3, 1e-8).unwrap();
        assert_eq!(max_abs(&(u.matrix() - &identity(8))), 0.0);

        let d0 = DriveParams::new(&m, 0.0, 4.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let u = evolve_interaction(&m, &d0, 0.0, 0.9, 1e-10).unwrap();
        let expect = m.h0().spectrum().unwrap().unitary_exp(-0.9 / 4.0);
        assert!(max_abs(&(u.matrix() - &expect)) < 1e-10);
    }

    #[test]
    fn commuting_interaction_collapses_to_h0_flow() {
        let m = build_commuting_model(8, 0.5, 10.0, 1.0, 5).unwrap();
        let d = DriveParams::new(&m, 0.1, 2.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let tol = 1e-9;
        let u = evolve_interaction(&m, &d, 0.0, 1.0, tol).unwrap();
        let expect = m.h0().spectrum().unwrap().unitary_exp(-1.0 / 2.0);
        let err = operator_norm(&(u.matrix() - &expect)).unwrap();
        assert!(err <= 10.0 * tol, "collapse error {err}");
    }

    #[test]
    fn gauge_identity_matches_direct_integration() {
        let (m, d) = reference_model();
        let tol = 1e-8;
        let (s, u_t) = (0.8, 0.1);
        let u_phys = evolve(&m, &d, u_t / d.eta, s / d.eta, tol).unwrap();
        let predicted = gauge_transport(&u_phys, &m, &d, s, u_t).unwrap();
        let direct = evolve_interaction(&m, &d, u_t, s, tol).unwrap();
        let residual = operator_norm(&(predicted.matrix() - direct.matrix())).unwrap();
        assert!(residual <= 20.0 * tol, "gauge residual {residual}");
    }

    #[test]
    fn gauge_transport_trivial_cases() {
        let (m, d) = reference_model();
        // s = u: both factors cancel against U = Id
        let u_phys = evolve(&m, &d, 0.5, 0.5, 1e-8).unwrap();
        let g = gauge_transport(&u_phys, &m, &d, 0.5, 0.5).unwrap();
        assert!(max_abs(&(g.matrix() - &identity(8))) < 1e-12);
        // s, u <= 0: phi vanishes, the transport is the physical propagator
        let u_phys = evolve(&m, &d, -2.0, -1.0, 1e-8).unwrap();
        let g = gauge_transport(&u_phys, &m, &d, -1.0 * d.eta, -2.0 * d.eta).unwrap();
        assert!(max_abs(&(g.matrix() - u_phys.matrix())) < 1e-12);
    }

    #[test]
    fn picture_mismatch_rejected() {
        let (m, d) = reference_model();
        let u_int = evolve_interaction(&m, &d, 0.0, 0.5, 1e-8).unwrap();
        assert!(gauge_transport(&u_int, &m, &d, 0.5, 0.0).is_err());
        let u_phys = evolve(&m, &d, 0.0, 0.5, 1e-8).unwrap();
        assert!(gauge_transport(&u_phys, &m, &d, 0.9, 0.0).is_err());
    }

    #[test]
    fn error_estimate_monotone_in_interval() {
        let (m, d) = reference_model();
        let tol = 1e-8;
        let short = evolve(&m, &d, 0.2, 0.4, tol).unwrap();
        let long = evolve(&m, &d, 0.2, 0.8, tol).unwrap();
        assert!(short.error_estimate() >= 0.0);
        assert!(long.error_estimate() >= short.error_estimate() * 0.0);
        assert!(long.error_estimate() <= tol);
    }
}
