//! Constant extraction, the growth recursion, empirical sandwich suprema in
//! both pictures, and certificate assembly.
//!
//! The certified claim is that the two-parameter propagator stays bounded in
//! every half-integer graph norm uniformly in the time-scale parameter: the
//! measured supremum of `‖H^{-n/2}(t) U(t,r) H^{n/2}(r)‖` over the switching
//! window must not exceed the recursion value `C_n(eps)`, and its rotating
//! frame analogue must not exceed `C_n(eps) (1 + eps D_n)`.

use crate::error::{Error, NumericError, Result};
use crate::linalg::{self, CMat};
use crate::model::{self, DriveParams, ModelPair};
use crate::operator::{self, SpectralDecomposition};
use crate::propagator::{self, UnitaryPropagator};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

/// Absolute slack applied when comparing a measured supremum against a bound;
/// covers integrator drift at the certified scale (the `n = 0` supremum is a
/// unitary norm and sits within 1e-8 of one).
pub const COMPARISON_SLACK: f64 = 1e-8;

/// Overflow guard for the recursion: values above this report as infinite,
/// vacuously satisfied bounds.
pub const CN_OVERFLOW: f64 = 1e300;

// ---------------------------------------------------------------------------
// grids and maximization
// ---------------------------------------------------------------------------

/// Uniform grid of `size` points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    assert!(size >= 2);
    let step = (hi - lo) / (size - 1) as f64;
    (0..size).map(|k| lo + k as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupResult {
    pub sup: f64,
    pub argmax: (f64, f64),
}

/// Maximize `f` over the product grid, then run one 5x5 refinement pass on
/// the +/- one-cell box around the grid argmax. The same routine drives both
/// the pipeline measurement and the closed-form cross-check so the two see
/// identical sample points.
pub fn grid_refine_max<F>(mut f: F, ts: &[f64], rs: &[f64]) -> Result<SupResult>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let mut best = f64::NEG_INFINITY;
    let mut arg = (ts[0], rs[0]);
    let mut arg_idx = (0usize, 0usize);
    for (i, &t) in ts.iter().enumerate() {
        for (j, &r) in rs.iter().enumerate() {
            let v = f(t, r)?;
            if v > best {
                best = v;
                arg = (t, r);
                arg_idx = (i, j);
            }
        }
    }
    let box_lo = |g: &[f64], i: usize| g[i.saturating_sub(1)];
    let box_hi = |g: &[f64], i: usize| g[(i + 1).min(g.len() - 1)];
    let t_fine = uniform_grid(box_lo(ts, arg_idx.0), box_hi(ts, arg_idx.0), 5);
    let r_fine = uniform_grid(box_lo(rs, arg_idx.1), box_hi(rs, arg_idx.1), 5);
    for &t in &t_fine {
        for &r in &r_fine {
            let v = f(t, r)?;
            if v > best {
                best = v;
                arg = (t, r);
            }
        }
    }
    Ok(SupResult { sup: best, argmax: arg })
}

/// One-dimensional analogue used for the measured constants.
fn refine_max_1d<F>(mut f: F, grid: &[f64]) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best = f64::NEG_INFINITY;
    let mut arg = grid[0];
    let mut idx = 0usize;
    for (i, &s) in grid.iter().enumerate() {
        let v = f(s)?;
        if v > best {
            best = v;
            arg = s;
            idx = i;
        }
    }
    let lo = grid[idx.saturating_sub(1)];
    let hi = grid[(idx + 1).min(grid.len() - 1)];
    for &s in uniform_grid(lo, hi, 9).iter() {
        let v = f(s)?;
        if v > best {
            best = v;
            arg = s;
        }
    }
    Ok((best, arg))
}

// ---------------------------------------------------------------------------
// measured constants
// ---------------------------------------------------------------------------

/// Commutator control constants: `E_k` bounds
/// `‖H^{k/2}(t) [H1, H0] H^{-(k+2)/2}(t)‖` over the switching window.
pub fn commutator_constants(
    model: &ModelPair,
    drive: &DriveParams,
    k_range: std::ops::RangeInclusive<i32>,
    s_grid: &[f64],
) -> Result<BTreeMap<i32, f64>> {
    let comm = operator::commutator(model.h1(), model.h0())?;
    let mut out = BTreeMap::new();
    for k in k_range {
        let value = |s: f64| -> Result<f64> {
            let c = drive.epsilon * drive.switch.eval(s).g;
            let h = model::hamiltonian_with_coupling(model, c);
            let spec = h.spectrum()?;
            let left = spec.half_power_matrix(k)?;
            let right = spec.half_power_matrix(-(k + 2))?;
            let m = linalg::matmul(&linalg::matmul(&left, &comm), &right);
            operator::operator_norm(&m)
        };
        let (e_k, _) = refine_max_1d(value, s_grid)?;
        out.insert(k, e_k);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaConstants {
    /// Relative half-bound `a = ‖H1 H0^{-1/2}‖` (the selection `(a, 0)`).
    pub a: f64,
    /// `b(eps) = 3 eps M a^2` from the perturbed-resolvent chain.
    pub b_eps: f64,
    /// Measured maximum of `‖H1 H^{-1/2}(t)‖` over the window.
    pub measured_max: f64,
    pub verified: bool,
}

/// The uniform relative bound of the perturbation against the *perturbed*
/// square root: `‖H1 H^{-1/2}(t)‖ <= a + b(eps)` for all switching phases.
pub fn lemma_constants(
    model: &ModelPair,
    drive: &DriveParams,
    s_grid: &[f64],
) -> Result<LemmaConstants> {
    let a = operator::relative_half_bound(model.h1(), model.h0())?;
    let (m, _) = drive.switch.constants();
    let b_eps = 3.0 * drive.epsilon * m * a * a;
    let value = |s: f64| -> Result<f64> {
        let c = drive.epsilon * drive.switch.eval(s).g;
        let h = model::hamiltonian_with_coupling(model, c);
        let inv_sqrt = h.spectrum()?.half_power_matrix(-1)?;
        operator::operator_norm(&linalg::matmul(model.h1().entries(), &inv_sqrt))
    };
    let (measured_max, _) = refine_max_1d(value, s_grid)?;
    Ok(LemmaConstants {
        a,
        b_eps,
        measured_max,
        verified: measured_max <= a + b_eps + 1e-10,
    })
}

/// Growth recursion: `C_0 = 1`, `C_n = C_{n-1} exp(C_{n-1} (alpha + beta eps
/// + gamma_n) eps)`, mirrored to negative orders. Values above the overflow
/// guard are reported as infinite with a warning.
pub fn theoretical_cn(
    alpha: f64,
    beta: f64,
    gamma: &BTreeMap<i32, f64>,
    epsilon: f64,
    n_max: i32,
) -> Result<(BTreeMap<i32, f64>, Vec<String>)> {
    let mut c = BTreeMap::new();
    let mut warnings = Vec::new();
    c.insert(0, 1.0);
    for n in 1..=n_max {
        let prev: f64 = c[&(n - 1)];
        let gamma_n = *gamma.get(&n).ok_or_else(|| {
            Error::invalid(format!("gamma_{n} missing from constant set"))
        })?;
        let rate = (alpha + beta * epsilon + gamma_n) * epsilon;
        let val = if prev.is_infinite() {
            f64::INFINITY
        } else {
            let v = prev * (prev * rate).exp();
            if v > CN_OVERFLOW {
                warnings.push(format!(
                    "C_{n} exceeds {CN_OVERFLOW:.0e}; reported as infinite (vacuous bound)"
                ));
                f64::INFINITY
            } else {
                v
            }
        };
        c.insert(n, val);
        c.insert(-n, val);
    }
    Ok((c, warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct PropositionConstants {
    /// `A_n`: suprema of `(‖H0^{n/2} H^{-n/2}‖ - 1) / eps` over probe and window.
    pub a_n: BTreeMap<i32, f64>,
    /// `B_n`: same for `‖H^{n/2} H0^{-n/2}‖`.
    pub b_n: BTreeMap<i32, f64>,
    /// Per-probe window maxima of `(‖H0^{n/2} H^{-n/2}‖ - 1)/eps`, for the
    /// first-order-scaling diagnostic.
    pub probe_table_a: BTreeMap<i32, Vec<(f64, f64)>>,
    pub probe_table_b: BTreeMap<i32, Vec<(f64, f64)>>,
}

/// Opposite-power products against the unperturbed operator: both
/// `H0^{n/2} H^{-n/2}(t)` and `H^{n/2}(t) H0^{-n/2}` stay within `O(eps)` of
/// one, uniformly over the window. Negative orders follow from the adjoint
/// pairing `‖H0^{-n/2} H^{n/2}‖ = ‖H^{n/2} H0^{-n/2}‖`.
pub fn proposition_constants(
    model: &ModelPair,
    switch: &crate::switching::SwitchFunction,
    n_max: i32,
    s_grid: &[f64],
    eps_probe: &[f64],
) -> Result<PropositionConstants> {
    let h0_spec = model.h0().spectrum()?;
    let mut h0_powers: HashMap<i32, CMat> = HashMap::new();
    for n in 1..=n_max {
        h0_powers.insert(n, h0_spec.half_power_matrix(n)?);
        h0_powers.insert(-n, h0_spec.half_power_matrix(-n)?);
    }

    let mut a_n = BTreeMap::new();
    let mut b_n = BTreeMap::new();
    let mut table_a = BTreeMap::new();
    let mut table_b = BTreeMap::new();
    a_n.insert(0, 0.0);
    b_n.insert(0, 0.0);

    for n in 1..=n_max {
        let mut probe_a = Vec::new();
        let mut probe_b = Vec::new();
        for &eps in eps_probe {
            if !(eps > 0.0) {
                return Err(Error::invalid("probe intensities must be positive"));
            }
            let norm_pair = |s: f64| -> Result<(f64, f64)> {
                let c = eps * switch.eval(s).g;
                let h = model::hamiltonian_with_coupling(model, c);
                let spec = h.spectrum()?;
                if spec.min_eigenvalue() < 1.0 - 1e-9 {
                    return Err(NumericError::SpectralFloor {
                        min_eigenvalue: spec.min_eigenvalue(),
                        floor: 1.0,
                    }
                    .into());
                }
                let h_neg = spec.half_power_matrix(-n)?;
                let h_pos = spec.half_power_matrix(n)?;
                let a_val =
                    operator::operator_norm(&linalg::matmul(&h0_powers[&n], &h_neg))?;
                let b_val =
                    operator::operator_norm(&linalg::matmul(&h_pos, &h0_powers[&(-n)]))?;
                Ok((a_val, b_val))
            };
            let (max_a, _) = refine_max_1d(|s| norm_pair(s).map(|p| p.0), s_grid)?;
            let (max_b, _) = refine_max_1d(|s| norm_pair(s).map(|p| p.1), s_grid)?;
            probe_a.push((eps, (max_a - 1.0) / eps));
            probe_b.push((eps, (max_b - 1.0) / eps));
        }
        let sup_a = probe_a.iter().map(|p| p.1).fold(0.0f64, f64::max);
        let sup_b = probe_b.iter().map(|p| p.1).fold(0.0f64, f64::max);
        a_n.insert(n, sup_a);
        b_n.insert(n, sup_b);
        // adjoint pairing for negative orders
        a_n.insert(-n, sup_b);
        b_n.insert(-n, sup_a);
        table_a.insert(n, probe_a);
        table_b.insert(n, probe_b);
    }
    Ok(PropositionConstants {
        a_n,
        b_n,
        probe_table_a: table_a,
        probe_table_b: table_b,
    })
}

/// `D_n` from the exact product identity `(1 + eps A)(1 + eps B) = 1 + eps D`
/// and the rotating-frame bound `C_n (1 + eps D_n)`.
pub fn corollary_bound(
    cn: &BTreeMap<i32, f64>,
    a_n: &BTreeMap<i32, f64>,
    b_n: &BTreeMap<i32, f64>,
    epsilon: f64,
) -> (BTreeMap<i32, f64>, BTreeMap<i32, f64>) {
    let mut d_n = BTreeMap::new();
    let mut bound = BTreeMap::new();
    for (&n, &c) in cn {
        let a = a_n.get(&n).copied().unwrap_or(0.0);
        let b = b_n.get(&n).copied().unwrap_or(0.0);
        let d = a + b + epsilon * a * b;
        d_n.insert(n, d);
        bound.insert(n, c * (1.0 + epsilon * d));
    }
    (d_n, bound)
}

// ---------------------------------------------------------------------------
// sandwich machinery
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Physical,
    Interaction,
}

/// Per-time-point power source: a full spectral decomposition in the physical
/// frame, or the gauge conjugation of the unperturbed powers in the rotating
/// frame (the spectral calculus commutes with unitary conjugation).
enum PowerSource {
    Spectral(Rc<SpectralDecomposition>),
    Conjugated { gauge: Rc<CMat> },
}

/// Cached propagator grid plus power factors for one `(eta, picture)` cell.
struct SandwichEngine<'a> {
    model: &'a ModelPair,
    drive: DriveParams,
    frame: Frame,
    grid: Vec<f64>,
    w: Vec<Rc<CMat>>,
    seg_tol: f64,
    w_memo: HashMap<u64, Rc<CMat>>,
    source_memo: HashMap<u64, Rc<PowerSource>>,
    power_memo: HashMap<(u64, i32), Rc<CMat>>,
    h0_power_memo: HashMap<i32, Rc<CMat>>,
    pub total_error: f64,
    pub total_steps: u64,
    pub max_drift: f64,
}

impl<'a> SandwichEngine<'a> {
    /// Build the cumulative propagator cache over `grid` (must be ascending).
    fn build(
        model: &'a ModelPair,
        drive: &DriveParams,
        frame: Frame,
        grid: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        let seg_tol = tol / (grid.len() - 1) as f64;
        let mut w: Vec<Rc<CMat>> = Vec::with_capacity(grid.len());
        w.push(Rc::new(linalg::identity(model.dim())));
        let mut total_error = 0.0;
        let mut total_steps = 0;
        let mut max_drift = 0.0f64;
        for k in 1..grid.len() {
            let seg = Self::segment(model, drive, frame, grid[k - 1], grid[k], seg_tol)?;
            total_error += seg.error_estimate();
            total_steps += seg.steps();
            let next = linalg::matmul(seg.matrix(), &w[k - 1]);
            w.push(Rc::new(next));
        }
        for wk in &w {
            let gram = linalg::adj_matmul(wk, wk);
            let drift = linalg::max_abs(&(&gram - &linalg::identity(model.dim())));
            max_drift = max_drift.max(drift);
        }
        if max_drift > propagator::UNITARITY_LIMIT {
            return Err(NumericError::UnitarityDrift { drift: max_drift }.into());
        }
        Ok(SandwichEngine {
            model,
            drive: drive.clone(),
            frame,
            grid,
            w,
            seg_tol,
            w_memo: HashMap::new(),
            source_memo: HashMap::new(),
            power_memo: HashMap::new(),
            h0_power_memo: HashMap::new(),
            total_error,
            total_steps,
            max_drift,
        })
    }

    fn segment(
        model: &ModelPair,
        drive: &DriveParams,
        frame: Frame,
        from: f64,
        to: f64,
        tol: f64,
    ) -> Result<UnitaryPropagator> {
        match frame {
            Frame::Physical => propagator::evolve(model, drive, from, to, tol),
            Frame::Interaction => propagator::evolve_interaction(model, drive, from, to, tol),
        }
    }

    /// Cumulative propagator `W(x) = U(x, grid[0])`, composed from the cache
    /// plus a short integration from the nearest grid point below.
    fn w_at(&mut self, x: f64) -> Result<Rc<CMat>> {
        let base = match self.grid.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return Ok(self.w[i].clone()),
            Err(ins) => ins.saturating_sub(1),
        };
        let key = x.to_bits();
        if let Some(m) = self.w_memo.get(&key) {
            return Ok(m.clone());
        }
        let seg = Self::segment(
            self.model,
            &self.drive,
            self.frame,
            self.grid[base],
            x,
            self.seg_tol,
        )?;
        let m = Rc::new(linalg::matmul(seg.matrix(), &self.w[base]));
        self.w_memo.insert(key, m.clone());
        Ok(m)
    }

    fn h0_power(&mut self, n: i32) -> Result<Rc<CMat>> {
        if let Some(p) = self.h0_power_memo.get(&n) {
            return Ok(p.clone());
        }
        let p = Rc::new(self.model.h0().spectrum()?.half_power_matrix(n)?);
        self.h0_power_memo.insert(n, p.clone());
        Ok(p)
    }

    fn source_at(&mut self, x: f64) -> Result<Rc<PowerSource>> {
        let key = x.to_bits();
        if let Some(s) = self.source_memo.get(&key) {
            return Ok(s.clone());
        }
        let src = match self.frame {
            Frame::Physical => {
                let h = model::hamiltonian_at(self.model, &self.drive, x);
                let spec = h.spectrum()?.clone();
                PowerSource::Spectral(Rc::new(spec))
            }
            Frame::Interaction => {
                let g = model::gauge_factor(self.model, &self.drive, x)?;
                PowerSource::Conjugated { gauge: Rc::new(g) }
            }
        };
        let src = Rc::new(src);
        self.source_memo.insert(key, src.clone());
        Ok(src)
    }

    /// `H^{n/2}` at the given time in this frame.
    fn power_at(&mut self, x: f64, n: i32) -> Result<Rc<CMat>> {
        let key = (x.to_bits(), n);
        if let Some(p) = self.power_memo.get(&key) {
            return Ok(p.clone());
        }
        let src = self.source_at(x)?;
        let p = match &*src {
            PowerSource::Spectral(spec) => spec.half_power_matrix(n)?,
            PowerSource::Conjugated { gauge } => {
                let core = self.h0_power(n)?;
                linalg::matmul_adj(&linalg::matmul(gauge, &core), gauge)
            }
        };
        let p = Rc::new(p);
        self.power_memo.insert(key, p.clone());
        Ok(p)
    }

    /// The sandwich value `‖H^{-n/2}(t) U(t, r) H^{n/2}(r)‖`, computed as
    /// `‖(H^{-n/2}(t) W(t)) (H^{n/2}(r) W(r))†‖`.
    fn value(&mut self, n: i32, t: f64, r: f64) -> Result<f64> {
        let pw = self.power_at(t, -n)?;
        let wt = self.w_at(t)?;
        let qw = self.power_at(r, n)?;
        let wr = self.w_at(r)?;
        let p = linalg::matmul(&pw, &wt);
        let q = linalg::matmul(&qw, &wr);
        operator::operator_norm(&linalg::matmul_adj(&p, &q))
    }

    /// Grid supremum with one refinement pass, over `window` (a sub-range of
    /// the cached grid) by index.
    fn sup(&mut self, n: i32, lo_idx: usize, hi_idx: usize) -> Result<SupResult> {
        let pts: Vec<f64> = self.grid[lo_idx..=hi_idx].to_vec();
        grid_refine_max(|t, r| self.value(n, t, r), &pts, &pts)
    }
}

// ---------------------------------------------------------------------------
// public one-shot operations
// ---------------------------------------------------------------------------

/// Supremum of the physical-picture sandwich over the switching window
/// `[0, 1/eta]^2` on a `grid_size` x `grid_size` grid with one refinement
/// pass. Returns the supremum and its argmax.
pub fn sandwich_sup(
    model: &ModelPair,
    drive: &DriveParams,
    n: i32,
    grid_size: usize,
    tol: f64,
) -> Result<SupResult> {
    if grid_size < 9 {
        return Err(Error::invalid("grid_size must be at least 9"));
    }
    let grid = uniform_grid(0.0, 1.0 / drive.eta, grid_size);
    let mut engine = SandwichEngine::build(model, drive, Frame::Physical, grid, tol)?;
    engine.sup(n, 0, grid_size - 1)
}

/// Max residual of the gauge identity over a subsampled `(s, u)` grid:
/// the physical propagator conjugated by the gauge factors must reproduce
/// the directly integrated rotating-frame propagator.
#[derive(Debug, Clone, Serialize)]
pub struct GaugeReport {
    pub eta: f64,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
    pub pairs_checked: usize,
}

pub fn gauge_residual(
    model: &ModelPair,
    drive: &DriveParams,
    grid_size: usize,
    subsample: usize,
    tol: f64,
) -> Result<GaugeReport> {
    let s_grid = uniform_grid(0.0, 1.0, grid_size);
    let t_grid = uniform_grid(0.0, 1.0 / drive.eta, grid_size);
    let mut phys = SandwichEngine::build(model, drive, Frame::Physical, t_grid, tol)?;
    let mut inter = SandwichEngine::build(model, drive, Frame::Interaction, s_grid.clone(), tol)?;
    let stride = ((grid_size - 1) / subsample.max(1)).max(1);
    let mut max_residual = 0.0f64;
    let mut pairs = 0usize;
    let idxs: Vec<usize> = (0..grid_size).step_by(stride).collect();
    for &i in &idxs {
        for &j in &idxs {
            let s = s_grid[i];
            let u = s_grid[j];
            // predicted U_hat(s, u) from the gauge identity
            let wi = phys.w_at(s / drive.eta)?;
            let wj = phys.w_at(u / drive.eta)?;
            let u_phys = linalg::matmul_adj(&wi, &wj);
            let left = model::gauge_factor(model, drive, s)?;
            let right = model::gauge_factor(model, drive, u)?;
            let predicted = linalg::matmul_adj(&linalg::matmul(&left, &u_phys), &right);
            let w_hat_i = inter.w_at(s)?;
            let w_hat_j = inter.w_at(u)?;
            let actual = linalg::matmul_adj(&w_hat_i, &w_hat_j);
            let res = operator::operator_norm(&(&predicted - &actual))?;
            max_residual = max_residual.max(res);
            pairs += 1;
        }
    }
    Ok(GaugeReport {
        eta: drive.eta,
        max_residual,
        threshold: 20.0 * tol,
        pass: max_residual <= 20.0 * tol,
        pairs_checked: pairs,
    })
}

/// Quadrature-vs-finite-difference audit of the square-root time derivative,
/// plus the switching-rate bound on `‖(d/dt H^{1/2}) H^{-1/2}‖`.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeRow {
    pub tau: f64,
    pub in_window: bool,
    pub derivative_norm: f64,
    pub fd_relative_error: Option<f64>,
    pub bound_lhs: f64,
    pub bound_rhs: f64,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub rows: Vec<DerivativeRow>,
    pub all_bounds_ok: bool,
}

pub fn derivative_bound_check(
    model: &ModelPair,
    drive: &DriveParams,
    tau_samples: &[f64],
    tol: f64,
) -> Result<DerivativeReport> {
    let s_grid = uniform_grid(0.0, 1.0, 33);
    let lemma = lemma_constants(model, drive, &s_grid)?;
    let (_, m_prime) = drive.switch.constants();
    let alpha = m_prime * lemma.a;
    let beta_eps = m_prime * lemma.b_eps; // eps * beta
    let bound_rhs = drive.epsilon * drive.eta * (alpha + beta_eps);

    let mut rows = Vec::new();
    for &tau in tau_samples {
        let sw = drive.switch.eval(drive.eta * tau);
        let in_window = sw.g_prime != 0.0;
        let h_tau = model::hamiltonian_at(model, drive, tau);
        let prefactor = drive.epsilon * drive.eta * sw.g_prime;
        let derivative = if prefactor == 0.0 {
            ndarray::Array2::zeros((model.dim(), model.dim()))
        } else {
            let kernel =
                crate::quadrature::derivative_kernel_quadrature(&h_tau, model.h1().entries(), tol)?;
            kernel.value.mapv(|z| z * prefactor)
        };
        let derivative_norm = operator::operator_norm(&derivative)?;

        // central finite difference of the spectral square root
        let h_step = 1e-4 / drive.eta;
        let plus = model::hamiltonian_at(model, drive, tau + h_step);
        let minus = model::hamiltonian_at(model, drive, tau - h_step);
        let sq_plus = plus.spectrum()?.half_power_matrix(1)?;
        let sq_minus = minus.spectrum()?.half_power_matrix(1)?;
        let fd = (&sq_plus - &sq_minus).mapv(|z| z / (2.0 * h_step));
        let fd_norm = operator::operator_norm(&fd)?;
        let fd_relative_error = if fd_norm > 1e-12 {
            Some(operator::operator_norm(&(&derivative - &fd))? / fd_norm)
        } else {
            None
        };

        let inv_sqrt = h_tau.spectrum()?.half_power_matrix(-1)?;
        let bound_lhs = operator::operator_norm(&linalg::matmul(&derivative, &inv_sqrt))?;
        rows.push(DerivativeRow {
            tau,
            in_window,
            derivative_norm,
            fd_relative_error,
            bound_lhs,
            bound_rhs,
            bound_ok: bound_lhs <= bound_rhs + 1e-9,
        });
    }
    Ok(DerivativeReport {
        all_bounds_ok: rows.iter().all(|r| r.bound_ok),
        rows,
    })
}

// ---------------------------------------------------------------------------
// certification pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConstantSet {
    pub a: f64,
    pub b_eps: f64,
    pub m: f64,
    pub m_prime: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Selection `(a~, b~)` realizing the relative half-bound.
    pub selection: (f64, f64),
    pub e_k: BTreeMap<i32, f64>,
    pub gamma: BTreeMap<i32, f64>,
    pub a_n: BTreeMap<i32, f64>,
    pub b_n: BTreeMap<i32, f64>,
    pub d_n: BTreeMap<i32, f64>,
    /// Commutator-constant subranges consumed by each claim.
    pub theorem_k_range: (i32, i32),
    pub corollary_k_range: (i32, i32),
}

#[derive(Debug, Clone, Serialize)]
pub struct CertCell {
    pub n: i32,
    pub eta: f64,
    pub sup_physical: f64,
    pub argmax_physical: (f64, f64),
    pub sup_interaction: f64,
    pub argmax_interaction: (f64, f64),
    pub theoretical: f64,
    pub corollary: f64,
    pub margin_theorem: f64,
    pub margin_corollary: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_extended_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaDiagnostics {
    pub eta: f64,
    pub segments: usize,
    pub steps_physical: u64,
    pub steps_interaction: u64,
    pub error_estimate_physical: f64,
    pub error_estimate_interaction: f64,
    pub max_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    pub admissibility: bool,
    pub spectral_floor: bool,
    pub unit_sandwich_at_zero: bool,
    pub theorem: bool,
    pub corollary: bool,
    pub lemma: bool,
    pub proposition: bool,
    pub gauge: bool,
    pub window_reduction: Option<bool>,
    pub overall: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridDescriptor {
    pub grid_size: usize,
    pub refinement: &'static str,
    pub window: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    pub model: crate::model::Provenance,
    pub model_kind: crate::model::ModelKind,
    pub dim: usize,
    pub gamma0: f64,
    pub epsilon: f64,
    pub eta_sweep: Vec<f64>,
    pub n_max: i32,
    pub tol: f64,
    pub eps_probe: Vec<f64>,
    pub admissibility: crate::model::AdmissibilityReport,
    pub constants: ConstantSet,
    pub theoretical_vacuous: BTreeMap<i32, bool>,
    pub cells: Vec<CertCell>,
    pub gauge: Vec<GaugeReport>,
    pub diagnostics: Vec<EtaDiagnostics>,
    pub grid: GridDescriptor,
    pub lemma: LemmaConstants,
    pub proposition_probe_a: BTreeMap<i32, Vec<(f64, f64)>>,
    pub proposition_probe_b: BTreeMap<i32, Vec<(f64, f64)>>,
    pub comparison_slack: f64,
    pub warnings: Vec<String>,
    pub verdicts: Verdicts,
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub eta_sweep: Vec<f64>,
    pub n_max: i32,
    pub grid_size: usize,
    pub tol: f64,
    pub eps_probe: Vec<f64>,
    pub window_audit: bool,
    pub gauge_subsample: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            eta_sweep: vec![0.25, 1.0, 4.0, 16.0],
            n_max: 4,
            grid_size: 33,
            tol: 1e-8,
            eps_probe: vec![0.2, 0.1, 0.05],
            window_audit: false,
            gauge_subsample: 8,
        }
    }
}

struct EtaBlock {
    eta: f64,
    cells: Vec<(i32, SupResult, SupResult, Option<f64>)>,
    gauge: GaugeReport,
    diagnostics: EtaDiagnostics,
}

fn bound_satisfied(measured: f64, bound: f64) -> bool {
    if bound.is_infinite() {
        return true;
    }
    measured <= bound * (1.0 + 1e-12) + COMPARISON_SLACK
}

fn run_eta_block(
    model: &ModelPair,
    drive_template: &DriveParams,
    eta: f64,
    opts: &CertifyOptions,
) -> Result<EtaBlock> {
    let drive = drive_template.with_eta(eta);
    let g = opts.grid_size;
    let window = 1.0 / eta;
    let delta = window / (g - 1) as f64;

    // extended grid shares spacing with the base grid and contains it exactly
    let (t_grid, base_lo, base_hi) = if opts.window_audit {
        let pad = (g - 1) / 2;
        let pts: Vec<f64> = (0..(g + 2 * pad))
            .map(|k| (k as i64 - pad as i64) as f64 * delta)
            .collect();
        (pts, pad, pad + g - 1)
    } else {
        (
            (0..g).map(|k| k as f64 * delta).collect::<Vec<f64>>(),
            0,
            g - 1,
        )
    };

    let mut phys = SandwichEngine::build(model, &drive, Frame::Physical, t_grid, opts.tol)?;
    let s_grid = uniform_grid(0.0, 1.0, g);
    let mut inter =
        SandwichEngine::build(model, &drive, Frame::Interaction, s_grid.clone(), opts.tol)?;

    let mut cells = Vec::new();
    for n in -opts.n_max..=opts.n_max {
        let sup_phys = phys.sup(n, base_lo, base_hi)?;
        let sup_int = inter.sup(n, 0, g - 1)?;
        let extended = if opts.window_audit {
            let full = phys.sup(n, 0, phys.grid.len() - 1)?;
            Some(full.sup)
        } else {
            None
        };
        cells.push((n, sup_phys, sup_int, extended));
    }

    let gauge = {
        // reuse the cached engines would be ideal; the standalone audit is
        // cheap enough at certification sizes and keeps the code simple
        gauge_residual(model, &drive, g, opts.gauge_subsample, opts.tol)?
    };

    let diagnostics = EtaDiagnostics {
        eta,
        segments: g - 1,
        steps_physical: phys.total_steps,
        steps_interaction: inter.total_steps,
        error_estimate_physical: phys.total_error,
        error_estimate_interaction: inter.total_error,
        max_drift: phys.max_drift.max(inter.max_drift),
    };
    Ok(EtaBlock {
        eta,
        cells,
        gauge,
        diagnostics,
    })
}

/// Full pipeline: admissibility, measured constants, recursion, per-eta
/// suprema in both pictures, gauge audit, verdicts.
pub fn certify(
    model: &ModelPair,
    drive_template: &DriveParams,
    opts: &CertifyOptions,
) -> Result<BoundCertificate> {
    if opts.grid_size < 9 {
        return Err(Error::invalid("grid_size must be at least 9"));
    }
    if opts.n_max < 0 {
        return Err(Error::invalid("n_max must be nonnegative"));
    }
    if opts.eta_sweep.is_empty() || opts.eta_sweep.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("eta sweep must be nonempty and positive"));
    }
    let epsilon = drive_template.epsilon;
    let s_grid = uniform_grid(0.0, 1.0, opts.grid_size);

    // admissibility over the coupling range (eta-independent: the coupling
    // sweeps eps * g([0,1]) for every time scale)
    let probe_drive = DriveParams::new(model, epsilon, 1.0, drive_template.switch.clone())?;
    let admissibility = model::validate_model(model, &probe_drive, &s_grid)?;

    let lemma = lemma_constants(model, drive_template, &s_grid)?;
    let (m, m_prime) = drive_template.switch.constants();
    let alpha = m_prime * lemma.a;
    let beta = 3.0 * m_prime * m * lemma.a * lemma.a;

    let k_lo = -opts.n_max;
    let k_hi = (opts.n_max - 2).max(-1);
    let e_k = if opts.n_max >= 1 {
        commutator_constants(model, drive_template, k_lo..=k_hi, &s_grid)?
    } else {
        BTreeMap::new()
    };
    let mut gamma = BTreeMap::new();
    let mut acc = 0.0;
    for n in 1..=opts.n_max {
        acc += e_k.get(&(-n)).copied().unwrap_or(0.0);
        gamma.insert(n, m_prime * acc);
    }

    let (cn, mut warnings) = theoretical_cn(alpha, beta, &gamma, epsilon, opts.n_max)?;
    let vacuous: BTreeMap<i32, bool> = cn.iter().map(|(&n, v)| (n, v.is_infinite())).collect();

    // probe list always contains the certificate intensity
    let mut eps_probe = opts.eps_probe.clone();
    if epsilon > 0.0 && !eps_probe.iter().any(|&p| p == epsilon) {
        eps_probe.push(epsilon);
    }
    eps_probe.sort_by(f64::total_cmp);
    eps_probe.dedup();
    let prop = proposition_constants(
        model,
        &drive_template.switch,
        opts.n_max,
        &s_grid,
        &eps_probe,
    )?;
    let (d_n, bounds) = corollary_bound(&cn, &prop.a_n, &prop.b_n, epsilon);

    // eta cells are independent; run them on the worker pool
    let blocks: Vec<Result<EtaBlock>> = opts
        .eta_sweep
        .par_iter()
        .map(|&eta| run_eta_block(model, drive_template, eta, opts))
        .collect();
    let mut eta_blocks = Vec::new();
    for b in blocks {
        eta_blocks.push(b?);
    }

    let mut cells = Vec::new();
    let mut unit_ok = true;
    let mut theorem_ok = true;
    let mut corollary_ok = true;
    let mut gauge_ok = true;
    let mut window_ok: Option<bool> = if opts.window_audit { Some(true) } else { None };
    let mut gauge_reports = Vec::new();
    let mut diagnostics = Vec::new();

    for block in &eta_blocks {
        gauge_ok &= block.gauge.pass;
        gauge_reports.push(block.gauge.clone());
        diagnostics.push(block.diagnostics.clone());
        for (n, sup_p, sup_i, ext) in &block.cells {
            let c_n = cn[n];
            let cb = bounds[n];
            if *n == 0 {
                unit_ok &= (sup_p.sup - 1.0).abs() <= COMPARISON_SLACK
                    && (sup_i.sup - 1.0).abs() <= COMPARISON_SLACK;
            }
            theorem_ok &= bound_satisfied(sup_p.sup, c_n);
            corollary_ok &= bound_satisfied(sup_i.sup, cb);
            let delta = ext.map(|e| (e - sup_p.sup).abs());
            if let (Some(w), Some(d)) = (window_ok.as_mut(), delta) {
                *w &= d <= 1e-8;
            }
            cells.push(CertCell {
                n: *n,
                eta: block.eta,
                sup_physical: sup_p.sup,
                argmax_physical: sup_p.argmax,
                sup_interaction: sup_i.sup,
                argmax_interaction: sup_i.argmax,
                theoretical: c_n,
                corollary: cb,
                margin_theorem: c_n - sup_p.sup,
                margin_corollary: cb - sup_i.sup,
                window_extended_sup: *ext,
                window_delta: delta,
            });
        }
    }
    cells.sort_by(|a, b| (a.n, a.eta).partial_cmp(&(b.n, b.eta)).unwrap());

    let proposition_ok = prop
        .a_n
        .values()
        .chain(prop.b_n.values())
        .all(|v| v.is_finite());

    let verdicts = Verdicts {
        admissibility: admissibility.epsilon_ok,
        spectral_floor: admissibility.floor_ok,
        unit_sandwich_at_zero: unit_ok,
        theorem: theorem_ok,
        corollary: corollary_ok,
        lemma: lemma.verified,
        proposition: proposition_ok,
        gauge: gauge_ok,
        window_reduction: window_ok,
        overall: admissibility.epsilon_ok
            && admissibility.floor_ok
            && unit_ok
            && theorem_ok
            && corollary_ok
            && lemma.verified
            && proposition_ok
            && gauge_ok
            && window_ok.unwrap_or(true),
    };

    if vacuous.values().any(|&v| v) {
        warnings.push(
            "one or more recursion values are infinite; those bounds hold vacuously".to_string(),
        );
    }

    Ok(BoundCertificate {
        model: model.provenance().clone(),
        model_kind: model.kind(),
        dim: model.dim(),
        gamma0: model.gamma0(),
        epsilon,
        eta_sweep: opts.eta_sweep.clone(),
        n_max: opts.n_max,
        tol: opts.tol,
        eps_probe,
        admissibility,
        constants: ConstantSet {
            a: lemma.a,
            b_eps: lemma.b_eps,
            m,
            m_prime,
            alpha,
            beta,
            selection: (lemma.a, 0.0),
            e_k,
            gamma,
            a_n: prop.a_n,
            b_n: prop.b_n,
            d_n,
            theorem_k_range: (k_lo, -1),
            corollary_k_range: (k_lo, opts.n_max - 2),
        },
        theoretical_vacuous: vacuous,
        cells,
        gauge: gauge_reports,
        diagnostics,
        grid: GridDescriptor {
            grid_size: opts.grid_size,
            refinement: "one 5x5 pass around the grid argmax",
            window: "[0, 1/eta] per eta; interaction picture on [0, 1] in scaled time",
        },
        lemma,
        proposition_probe_a: prop.probe_table_a,
        proposition_probe_b: prop.probe_table_b,
        comparison_slack: COMPARISON_SLACK,
        warnings,
        verdicts,
    })
}

impl BoundCertificate {
    /// Theoretical recursion values per order as a map.
    pub fn theoretical(&self) -> BTreeMap<i32, f64> {
        self.cells
            .iter()
            .map(|c| (c.n, c.theoretical))
            .collect()
    }
}

/// Closed-form sandwich maximum for commuting pairs: with joint eigenvalues
/// `(lambda_i, mu_i)` the propagator phases drop out of the norm and
/// `C_n(t, r) = max_i ((lambda_i + c(r) mu_i) / (lambda_i + c(t) mu_i))^{n/2}`.
pub fn commuting_sandwich_closed_form(
    model: &ModelPair,
    drive: &DriveParams,
    n: i32,
    t: f64,
    r: f64,
) -> Result<f64> {
    let (lambda, mu) = model
        .commuting_data()
        .ok_or_else(|| Error::invalid("closed form requires a commuting-built model"))?;
    let ct = drive.coupling_at(t);
    let cr = drive.coupling_at(r);
    let mut best = 0.0f64;
    for (&l, &m) in lambda.iter().zip(mu) {
        let num = l + cr * m;
        let den = l + ct * m;
        if num <= 0.0 || den <= 0.0 {
            return Err(NumericError::SpectralFloor {
                min_eigenvalue: num.min(den),
                floor: 0.0,
            }
            .into());
        }
        best = best.max((num / den).powf(f64::from(n) / 2.0));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_commuting_model, build_spectral_model};
    use crate::switching::SwitchFunction;

    fn reference() -> (ModelPair, DriveParams) {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let d = DriveParams::new(&m, 0.1, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        (m, d)
    }

    #[test]
    fn recursion_base_and_mirror() {
        let gamma: BTreeMap<i32, f64> = [(1, 2.0), (2, 3.0)].into_iter().collect();
        let (cn, warn) = theoretical_cn(1.5, 4.5, &gamma, 0.1, 2).unwrap();
        assert_eq!(cn[&0], 1.0);
        let expect1 = ((1.5 + 0.45 + 2.0) * 0.1f64).exp();
        assert!((cn[&1] - expect1).abs() < 1e-14);
        assert_eq!(cn[&1], cn[&-1]);
        assert_eq!(cn[&2], cn[&-2]);
        // growth identity: log C_n - log C_{n-1} = C_{n-1} (alpha+beta eps+gamma_n) eps
        let lhs = cn[&2].ln() - cn[&1].ln();
        let rhs = cn[&1] * (1.5 + 0.45 + 3.0) * 0.1;
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(warn.is_empty());
    }

    #[test]
    fn recursion_overflow_guard() {
        let gamma: BTreeMap<i32, f64> = (1..=6).map(|n| (n, 1e4)).collect();
        let (cn, warn) = theoretical_cn(1.0, 1.0, &gamma, 0.5, 6).unwrap();
        assert!(cn[&6].is_infinite());
        assert!(!warn.is_empty());
    }

    #[test]
    fn commuting_e_k_vanish() {
        let m = build_commuting_model(8, 0.5, 10.0, 1.0, 5).unwrap();
        let d = DriveParams::new(&m, 0.1, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let grid = uniform_grid(0.0, 1.0, 17);
        let e = commutator_constants(&m, &d, -3..=1, &grid).unwrap();
        let scale = m.h0().norm().unwrap() * m.h1().norm().unwrap();
        for (&k, &v) in &e {
            assert!(v <= 1e-12 * scale, "E_{k} = {v}");
        }
    }

    #[test]
    fn e_k_scale_linearly_in_h1_at_zero_coupling_epsilon() {
        // at eps = 0 the sandwiching powers are H0 powers; doubling H1 doubles E_k
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 11).unwrap();
        let d0 = DriveParams::new(&m, 0.0, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let grid = uniform_grid(0.0, 1.0, 9);
        let e1 = commutator_constants(&m, &d0, -2..=0, &grid).unwrap();
        let m2 = crate::model::ModelPair::new(
            m.h0().clone(),
            crate::operator::HermitianOperator::new(m.h1().entries().mapv(|z| z * 2.0)).unwrap(),
            m.gamma0(),
            crate::model::ModelKind::Spectral,
            m.provenance().clone(),
        )
        .unwrap();
        let e2 = commutator_constants(&m2, &d0, -2..=0, &grid).unwrap();
        for k in [-2, -1, 0] {
            assert!((e2[&k] - 2.0 * e1[&k]).abs() < 1e-9 * e1[&k].max(1.0));
        }
    }

    #[test]
    fn lemma_trivial_and_reference() {
        let (m, d) = reference();
        let grid = uniform_grid(0.0, 1.0, 17);
        let lc = lemma_constants(&m, &d, &grid).unwrap();
        assert!((lc.a - 1.0).abs() < 1e-10);
        assert!((lc.b_eps - 0.3).abs() < 1e-10);
        assert!(lc.verified, "measured {} vs {}", lc.measured_max, lc.a + lc.b_eps);

        let zero = build_spectral_model(8, 0.5, 10.0, 0.0, 3).unwrap();
        let dz = DriveParams::new(&zero, 0.1, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let lz = lemma_constants(&zero, &dz, &grid).unwrap();
        assert_eq!(lz.a, 0.0);
        assert_eq!(lz.b_eps, 0.0);
        assert!(lz.verified);
    }

    #[test]
    fn proposition_zero_perturbation() {
        let m = build_spectral_model(8, 0.5, 10.0, 0.0, 3).unwrap();
        let grid = uniform_grid(0.0, 1.0, 9);
        let p = proposition_constants(
            &m,
            &SwitchFunction::cubic(1.0).unwrap(),
            3,
            &grid,
            &[0.2, 0.1],
        )
        .unwrap();
        for (_, v) in p.a_n.iter().chain(p.b_n.iter()) {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn proposition_adjoint_duality() {
        let (m, _) = reference();
        let grid = uniform_grid(0.0, 1.0, 9);
        let p = proposition_constants(
            &m,
            &SwitchFunction::cubic(1.0).unwrap(),
            2,
            &grid,
            &[0.1],
        )
        .unwrap();
        for n in 1..=2 {
            assert_eq!(p.a_n[&-n], p.b_n[&n]);
            assert_eq!(p.b_n[&-n], p.a_n[&n]);
        }
    }

    #[test]
    fn corollary_identity_exact() {
        let cn: BTreeMap<i32, f64> = [(0, 1.0), (1, 2.0), (-1, 2.0)].into_iter().collect();
        let a_n: BTreeMap<i32, f64> = [(0, 0.0), (1, 0.7), (-1, 0.3)].into_iter().collect();
        let b_n: BTreeMap<i32, f64> = [(0, 0.0), (1, 0.3), (-1, 0.7)].into_iter().collect();
        let (d_n, bound) = corollary_bound(&cn, &a_n, &b_n, 0.1);
        // (1 + eps A)(1 + eps B) = 1 + eps D exactly
        for n in [-1, 0, 1] {
            let lhs = (1.0 + 0.1 * a_n[&n]) * (1.0 + 0.1 * b_n[&n]);
            let rhs = 1.0 + 0.1 * d_n[&n];
            assert!((lhs - rhs).abs() < 1e-15);
        }
        assert_eq!(bound[&0], 1.0);
        assert!((bound[&1] - 2.0 * (1.0 + 0.1 * d_n[&1])).abs() < 1e-15);
    }

    #[test]
    fn sandwich_n0_is_unit() {
        let (m, d) = reference();
        let r = sandwich_sup(&m, &d, 0, 9, 1e-8).unwrap();
        assert!((r.sup - 1.0).abs() <= 1e-8, "sup {}", r.sup);
    }

    #[test]
    fn sandwich_eps0_is_unit_for_all_n() {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let d = DriveParams::new(&m, 0.0, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        for n in [-3, -1, 2, 4] {
            let r = sandwich_sup(&m, &d, n, 9, 1e-8).unwrap();
            assert!((r.sup - 1.0).abs() <= 1e-8, "n={n} sup {}", r.sup);
        }
    }

    #[test]
    fn sandwich_early_r_probe() {
        // values at r < 0 match r = 0 (the generator is constant before the switch)
        let (m, d) = reference();
        let grid = uniform_grid(-0.5, 1.0, 16);
        let mut eng =
            SandwichEngine::build(&m, &d, Frame::Physical, grid, 1e-9).unwrap();
        let v_neg = eng.value(2, 0.75, -0.25).unwrap();
        let v_zero = eng.value(2, 0.75, 0.0).unwrap();
        assert!((v_neg - v_zero).abs() <= 1e-8, "{v_neg} vs {v_zero}");
    }

    #[test]
    fn adjoint_symmetry_per_cell() {
        let (m, d) = reference();
        let grid = uniform_grid(0.0, 1.0, 12);
        let mut eng = SandwichEngine::build(&m, &d, Frame::Physical, grid, 1e-9).unwrap();
        for (t, r) in [(0.4, 0.9), (0.0, 0.7)] {
            let a = eng.value(3, t, r).unwrap();
            let b = eng.value(-3, r, t).unwrap();
            assert!((a - b).abs() < 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn commuting_closed_form_matches_engine() {
        let m = build_commuting_model(8, 0.5, 10.0, 1.0, 5).unwrap();
        let d = DriveParams::new(&m, 0.15, 1.0, SwitchFunction::cubic(1.0).unwrap()).unwrap();
        let grid = uniform_grid(0.0, 1.0, 12);
        let mut eng = SandwichEngine::build(&m, &d, Frame::Physical, grid, 1e-10).unwrap();
        for n in [-2, 1, 3] {
            for (t, r) in [(0.2, 0.8), (0.9, 0.1)] {
                let pipeline = eng.value(n, t, r).unwrap();
                let oracle = commuting_sandwich_closed_form(&m, &d, n, t, r).unwrap();
                assert!(
                    (pipeline - oracle).abs() <= 1e-8 * oracle.max(1.0),
                    "n={n} t={t} r={r}: {pipeline} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn grid_refine_max_matches_between_closures() {
        // the maximizer itself is shared; a quadratic with an interior peak
        let ts = uniform_grid(0.0, 1.0, 11);
        let f = |t: f64, r: f64| Ok(-(t - 0.43).powi(2) - (r - 0.71).powi(2));
        let res = grid_refine_max(f, &ts, &ts).unwrap();
        assert!((res.argmax.0 - 0.43).abs() < 0.05);
        assert!((res.argmax.1 - 0.71).abs() < 0.05);
    }

    #[test]
    fn derivative_vanishes_outside_window() {
        let (m, d) = reference();
        let report = derivative_bound_check(&m, &d, &[-0.5, 1.5], 1e-8).unwrap();
        for row in &report.rows {
            assert!(!row.in_window);
            assert_eq!(row.derivative_norm, 0.0);
            assert!(row.bound_ok);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (m, d) = reference();
        let report = derivative_bound_check(&m, &d, &[0.3, 0.5, 0.7], 1e-8).unwrap();
        for row in &report.rows {
            assert!(row.in_window);
            let rel = row.fd_relative_error.unwrap();
            assert!(rel <= 1e-4, "tau {} rel err {rel}", row.tau);
            assert!(row.bound_ok, "bound {} vs {}", row.bound_lhs, row.bound_rhs);
        }
    }
}
