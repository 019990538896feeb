//! Model pairs `(H0, H1)` with a spectral gap above one, the drive parameters
//! that switch the perturbation on, and the admissibility audit that gates
//! every certification run.

use crate::error::{Error, NumericError, Result};
use crate::linalg::{self, CMat};
use crate::operator::{self, HermitianOperator};
use crate::switching::SwitchFunction;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Margin kept between a configured drive intensity and the admissibility
/// supremum; the underlying condition is a strict inequality.
pub const EPSILON_MARGIN: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Spectral,
    Commuting,
    Landau,
}

/// Builder metadata carried along with every model for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub builder: String,
    pub seed: u64,
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// An unperturbed/perturbation operator pair with its gap constant.
#[derive(Debug, Clone)]
pub struct ModelPair {
    h0: HermitianOperator,
    h1: HermitianOperator,
    gamma0: f64,
    kind: ModelKind,
    provenance: Provenance,
    /// Joint eigenvalues `(lambda_i, mu_i)` when the pair commutes by
    /// construction; feeds the closed-form cross-check.
    commuting_data: Option<(Vec<f64>, Vec<f64>)>,
    h1_h0_inv_norm: OnceLock<f64>,
}

impl ModelPair {
    pub fn new(
        h0: HermitianOperator,
        h1: HermitianOperator,
        gamma0: f64,
        kind: ModelKind,
        provenance: Provenance,
    ) -> Result<Self> {
        if h0.dim() != h1.dim() {
            return Err(NumericError::DimensionMismatch(h0.dim(), h1.dim()).into());
        }
        if !(gamma0 > 0.0) {
            return Err(Error::invalid("gamma0 must be positive"));
        }
        let min = h0.min_eigenvalue()?;
        let slack = 1e-10 * h0.norm()?.max(1.0);
        if min < 1.0 + gamma0 - slack {
            return Err(Error::invalid(format!(
                "H0 lower bound violated: min eigenvalue {min:.12} < 1 + gamma0 = {}",
                1.0 + gamma0
            )));
        }
        Ok(ModelPair {
            h0,
            h1,
            gamma0,
            kind,
            provenance,
            commuting_data: None,
            h1_h0_inv_norm: OnceLock::new(),
        })
    }

    pub fn h0(&self) -> &HermitianOperator {
        &self.h0
    }

    pub fn h1(&self) -> &HermitianOperator {
        &self.h1
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Joint diagonal data for commuting pairs.
    pub fn commuting_data(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.commuting_data.as_ref()
    }

    /// `‖H1 H0^{-1}‖`, the constant entering the admissibility bound.
    pub fn h1_h0_inv_norm(&self) -> Result<f64> {
        if let Some(v) = self.h1_h0_inv_norm.get() {
            return Ok(*v);
        }
        let h0_inv = self.h0.spectrum()?.half_power_matrix(-2)?;
        let prod = linalg::matmul(self.h1.entries(), &h0_inv);
        let v = operator::operator_norm(&prod)?;
        let _ = self.h1_h0_inv_norm.set(v);
        Ok(v)
    }

    /// Supremum of admissible drive intensities: values strictly below keep
    /// the perturbed spectrum above one for every switching phase. Unbounded
    /// (infinite) when the perturbation vanishes.
    pub fn eps_star_max(&self, switch: &SwitchFunction) -> Result<f64> {
        let (m, _) = switch.constants();
        let denom = (3.0 * self.gamma0 + 1.0) / self.gamma0 * m * self.h1_h0_inv_norm()?;
        if denom <= 0.0 {
            Ok(f64::INFINITY)
        } else {
            Ok(1.0 / denom)
        }
    }
}

/// Drive parameters: intensity, time-scale, and switching profile. The
/// constructor enforces the admissibility margin against the model.
#[derive(Debug, Clone)]
pub struct DriveParams {
    pub epsilon: f64,
    pub eta: f64,
    pub switch: SwitchFunction,
}

impl DriveParams {
    pub fn new(model: &ModelPair, epsilon: f64, eta: f64, switch: SwitchFunction) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta must be positive"));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be nonnegative"));
        }
        let eps_max = model.eps_star_max(&switch)?;
        if epsilon > EPSILON_MARGIN * eps_max {
            return Err(Error::invalid(format!(
                "epsilon {epsilon} exceeds {EPSILON_MARGIN} * eps_star_max = {:.6}",
                EPSILON_MARGIN * eps_max
            )));
        }
        Ok(DriveParams {
            epsilon,
            eta,
            switch,
        })
    }

    /// Same drive at a different time scale (the admissibility bound does not
    /// involve eta).
    pub fn with_eta(&self, eta: f64) -> Self {
        DriveParams {
            epsilon: self.epsilon,
            eta,
            switch: self.switch.clone(),
        }
    }

    /// Coupling value `epsilon * g(eta t)` at physical time `t`.
    pub fn coupling_at(&self, t: f64) -> f64 {
        self.epsilon * self.switch.eval(self.eta * t).g
    }
}

/// `H(t) = H0 + eps g(eta t) H1`.
pub fn hamiltonian_at(model: &ModelPair, drive: &DriveParams, t: f64) -> HermitianOperator {
    hamiltonian_with_coupling(model, drive.coupling_at(t))
}

/// `H0 + c H1` for a fixed coupling value `c`.
pub fn hamiltonian_with_coupling(model: &ModelPair, c: f64) -> HermitianOperator {
    if c == 0.0 {
        return model.h0().clone();
    }
    let entries = model.h0().entries() + &model.h1().entries().mapv(|z| z * c);
    HermitianOperator::new(entries).expect("sum of finite Hermitian matrices is Hermitian")
}

/// The unperturbed operator conjugated into the rotating frame at macroscopic
/// time `s`: `exp(i (eps/eta) phi(s) H1) H0 exp(-i (eps/eta) phi(s) H1)`.
pub fn interaction_hamiltonian_at(
    model: &ModelPair,
    drive: &DriveParams,
    s: f64,
) -> Result<HermitianOperator> {
    let theta = drive.epsilon / drive.eta * drive.switch.eval(s).phi;
    if theta == 0.0 {
        return Ok(model.h0().clone());
    }
    let g = model.h1().spectrum()?.unitary_exp(theta);
    let conj = linalg::matmul_adj(&linalg::matmul(&g, model.h0().entries()), &g);
    HermitianOperator::new(conj)
}

/// Rotating-frame gauge factor `exp(i (eps/eta) phi(s) H1)`.
pub fn gauge_factor(model: &ModelPair, drive: &DriveParams, s: f64) -> Result<CMat> {
    let theta = drive.epsilon / drive.eta * drive.switch.eval(s).phi;
    Ok(model.h1().spectrum()?.unitary_exp(theta))
}

/// Admissibility audit: the intensity bound and the unit spectral floor over
/// a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub eps_star_max: f64,
    pub epsilon: f64,
    pub epsilon_ok: bool,
    pub min_eigenvalue: f64,
    pub floor_ok: bool,
    pub grid_points: usize,
}

pub fn validate_model(
    model: &ModelPair,
    drive: &DriveParams,
    t_grid: &[f64],
) -> Result<AdmissibilityReport> {
    let eps_star_max = model.eps_star_max(&drive.switch)?;
    let epsilon_ok = drive.epsilon <= EPSILON_MARGIN * eps_star_max;
    let mut min_eig = f64::INFINITY;
    for &t in t_grid {
        let h = hamiltonian_at(model, drive, t);
        min_eig = min_eig.min(h.min_eigenvalue()?);
    }
    Ok(AdmissibilityReport {
        eps_star_max,
        epsilon: drive.epsilon,
        epsilon_ok,
        min_eigenvalue: min_eig,
        floor_ok: min_eig >= 1.0 - 1e-9,
        grid_points: t_grid.len(),
    })
}

/// Seeded Gaussian stream (Box-Muller over ChaCha8); the documented sampling
/// order makes every builder bit-reproducible across platforms.
pub(crate) struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = loop {
            let u = self.rng.gen::<f64>();
            if u > 0.0 {
                break u;
            }
        };
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Gaussian-unitary-ensemble Hermitian draw: real `N(0,1)` diagonal,
/// off-diagonal entries `(a + ib)/sqrt(2)`.
pub(crate) fn gue_hermitian(stream: &mut GaussianStream, dim: usize) -> CMat {
    let mut m = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        m[(i, i)] = C64::new(stream.normal(), 0.0);
        for j in (i + 1)..dim {
            let z = C64::new(stream.normal(), stream.normal()) / 2f64.sqrt();
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Haar-ish random unitary: complex Gaussian matrix through modified
/// Gram-Schmidt with a re-orthogonalization pass.
pub(crate) fn random_unitary_from(stream: &mut GaussianStream, dim: usize) -> CMat {
    let mut q = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            q[(i, j)] = C64::new(stream.normal(), stream.normal());
        }
    }
    for _pass in 0..2 {
        for j in 0..dim {
            for k in 0..j {
                let proj: C64 = (0..dim).map(|i| q[(i, k)].conj() * q[(i, j)]).sum();
                for i in 0..dim {
                    let qk = q[(i, k)];
                    q[(i, j)] -= proj * qk;
                }
            }
            let norm: f64 = (0..dim)
                .map(|i| q[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            for i in 0..dim {
                q[(i, j)] /= norm;
            }
        }
    }
    q
}

fn validate_builder_args(dim: usize, gamma0: f64, spectrum_max: f64, coupling: f64) -> Result<()> {
    if dim < 2 {
        return Err(Error::invalid("dim must be at least 2"));
    }
    if !(gamma0 > 0.0) {
        return Err(Error::invalid("gamma0 must be positive"));
    }
    if !(spectrum_max > 1.0 + gamma0) {
        return Err(Error::invalid("spectrum_max must exceed 1 + gamma0"));
    }
    if !(coupling >= 0.0) {
        return Err(Error::invalid("coupling must be nonnegative"));
    }
    Ok(())
}

/// Synthetic pair: `H0` with uniform spectrum in `[1 + gamma0, spectrum_max]`
/// in a seeded random basis, `H1` a seeded Hermitian draw rescaled so that
/// `‖H1 H0^{-1/2}‖` equals `coupling` exactly.
pub fn build_spectral_model(
    dim: usize,
    gamma0: f64,
    spectrum_max: f64,
    coupling: f64,
    seed: u64,
) -> Result<ModelPair> {
    validate_builder_args(dim, gamma0, spectrum_max, coupling)?;
    let mut stream = GaussianStream::new(seed);
    let mut eigs: Vec<f64> = (0..dim)
        .map(|_| 1.0 + gamma0 + stream.uniform() * (spectrum_max - 1.0 - gamma0))
        .collect();
    eigs.sort_by(f64::total_cmp);
    let v = random_unitary_from(&mut stream, dim);
    let mut scaled = v.clone();
    for (j, &lam) in eigs.iter().enumerate() {
        let w = C64::new(lam, 0.0);
        scaled.column_mut(j).mapv_inplace(|z| z * w);
    }
    let h0 = HermitianOperator::new(linalg::matmul_adj(&scaled, &v))?;

    let h1 = scale_perturbation(gue_hermitian(&mut stream, dim), &h0, coupling)?;
    let provenance = Provenance {
        builder: "spectral".into(),
        seed,
        params: serde_json::json!({
            "dim": dim, "gamma0": gamma0, "spectrum_max": spectrum_max, "coupling": coupling,
        }),
        warnings: Vec::new(),
    };
    ModelPair::new(h0, h1, gamma0, ModelKind::Spectral, provenance)
}

fn scale_perturbation(raw: CMat, h0: &HermitianOperator, coupling: f64) -> Result<HermitianOperator> {
    if coupling == 0.0 {
        return HermitianOperator::new(Array2::zeros((h0.dim(), h0.dim())));
    }
    let raw_op = HermitianOperator::new(raw)?;
    let current = operator::relative_half_bound(&raw_op, h0)?;
    HermitianOperator::new(raw_op.entries().mapv(|z| z * (coupling / current)))
}

/// Pair diagonal in one common seeded basis; the baseline case with a
/// closed-form sandwich maximum over the joint eigenvalues.
pub fn build_commuting_model(
    dim: usize,
    gamma0: f64,
    spectrum_max: f64,
    coupling: f64,
    seed: u64,
) -> Result<ModelPair> {
    validate_builder_args(dim, gamma0, spectrum_max, coupling)?;
    let mut stream = GaussianStream::new(seed);
    let mut lambda: Vec<f64> = (0..dim)
        .map(|_| 1.0 + gamma0 + stream.uniform() * (spectrum_max - 1.0 - gamma0))
        .collect();
    lambda.sort_by(f64::total_cmp);
    let mut mu: Vec<f64> = (0..dim).map(|_| stream.normal()).collect();
    let v = random_unitary_from(&mut stream, dim);

    // rescale so the relative half-bound equals the coupling exactly
    let bound = lambda
        .iter()
        .zip(&mu)
        .map(|(&l, &m)| m.abs() / l.sqrt())
        .fold(0.0, f64::max);
    if coupling == 0.0 || bound == 0.0 {
        mu.iter_mut().for_each(|m| *m = 0.0);
    } else {
        let s = coupling / bound;
        mu.iter_mut().for_each(|m| *m *= s);
    }

    let conjugate = |diag: &[f64]| -> Result<HermitianOperator> {
        let mut scaled = v.clone();
        for (j, &d) in diag.iter().enumerate() {
            let w = C64::new(d, 0.0);
            scaled.column_mut(j).mapv_inplace(|z| z * w);
        }
        HermitianOperator::new(linalg::matmul_adj(&scaled, &v))
    };
    let h0 = conjugate(&lambda)?;
    let h1 = conjugate(&mu)?;

    let provenance = Provenance {
        builder: "commuting".into(),
        seed,
        params: serde_json::json!({
            "dim": dim, "gamma0": gamma0, "spectrum_max": spectrum_max, "coupling": coupling,
        }),
        warnings: Vec::new(),
    };
    let mut pair = ModelPair::new(h0, h1, gamma0, ModelKind::Commuting, provenance)?;
    pair.commuting_data = Some((lambda, mu));
    Ok(pair)
}

/// Internal constructor for builders that assemble the operators directly.
pub(crate) fn model_from_parts(
    h0: HermitianOperator,
    h1: HermitianOperator,
    gamma0: f64,
    kind: ModelKind,
    provenance: Provenance,
) -> Result<ModelPair> {
    ModelPair::new(h0, h1, gamma0, kind, provenance)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn random_complex(dim: usize, seed: u64) -> CMat {
        let mut stream = GaussianStream::new(seed);
        Array2::from_shape_fn((dim, dim), |_| C64::new(stream.normal(), stream.normal()))
    }

    pub fn random_hermitian(dim: usize, seed: u64) -> CMat {
        let mut stream = GaussianStream::new(seed);
        gue_hermitian(&mut stream, dim)
    }

    pub fn random_spd(dim: usize, seed: u64, lo: f64, hi: f64) -> CMat {
        let mut stream = GaussianStream::new(seed);
        let eigs: Vec<f64> = (0..dim).map(|_| lo + stream.uniform() * (hi - lo)).collect();
        let v = random_unitary_from(&mut stream, dim);
        let mut scaled = v.clone();
        for (j, &lam) in eigs.iter().enumerate() {
            let w = C64::new(lam, 0.0);
            scaled.column_mut(j).mapv_inplace(|z| z * w);
        }
        let m = linalg::matmul_adj(&scaled, &v);
        // exact Hermitian symmetrization
        (&m + &linalg::adjoint(&m)).mapv(|z| z * 0.5)
    }

    pub fn random_unitary(dim: usize, seed: u64) -> CMat {
        let mut stream = GaussianStream::new(seed);
        random_unitary_from(&mut stream, dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::operator::{commutator, relative_half_bound};

    fn switch() -> SwitchFunction {
        SwitchFunction::cubic(1.0).unwrap()
    }

    #[test]
    fn spectral_builder_contract() {
        let m = build_spectral_model(12, 0.5, 10.0, 1.0, 7).unwrap();
        assert!(m.h0().min_eigenvalue().unwrap() >= 1.5 - 1e-9);
        let a = relative_half_bound(m.h1(), m.h0()).unwrap();
        assert!((a - 1.0).abs() < 1e-12, "coupling restored as {a}");
    }

    #[test]
    fn zero_coupling_gives_zero_perturbation() {
        let m = build_spectral_model(8, 0.5, 10.0, 0.0, 7).unwrap();
        assert_eq!(max_abs(m.h1().entries()), 0.0);
        let sw = switch();
        assert!(m.eps_star_max(&sw).unwrap().is_infinite());
    }

    #[test]
    fn builder_is_deterministic() {
        let a = build_spectral_model(10, 0.5, 8.0, 0.7, 13).unwrap();
        let b = build_spectral_model(10, 0.5, 8.0, 0.7, 13).unwrap();
        assert_eq!(a.h0().entries(), b.h0().entries());
        assert_eq!(a.h1().entries(), b.h1().entries());
    }

    #[test]
    fn commuting_builder_commutes() {
        let m = build_commuting_model(10, 0.5, 10.0, 1.0, 3).unwrap();
        let c = commutator(m.h1(), m.h0()).unwrap();
        let scale = m.h0().norm().unwrap() * m.h1().norm().unwrap();
        assert!(crate::operator::operator_norm(&c).unwrap() <= 1e-12 * scale);
        let a = relative_half_bound(m.h1(), m.h0()).unwrap();
        assert!((a - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_affine_in_g() {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let drive = DriveParams::new(&m, 0.1, 2.0, switch()).unwrap();
        // before the switch starts
        let h = hamiltonian_at(&m, &drive, -0.5);
        assert_eq!(h.entries(), m.h0().entries());
        // after the ramp
        let h = hamiltonian_at(&m, &drive, 1.0 / 2.0 + 3.0);
        let expect = m.h0().entries() + &m.h1().entries().mapv(|z| z * 0.1);
        assert!(max_abs(&(h.entries() - &expect)) < 1e-15);
        // difference recovers eps g(eta t) H1 to rounding
        let t = 0.3;
        let h = hamiltonian_at(&m, &drive, t);
        let c = drive.coupling_at(t);
        let diff = h.entries() - m.h0().entries();
        let err = max_abs(&(&diff - &m.h1().entries().mapv(|z| z * c)));
        assert!(err < 1e-14 * m.h0().norm().unwrap());
    }

    #[test]
    fn interaction_hamiltonian_properties() {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let drive = DriveParams::new(&m, 0.1, 2.0, switch()).unwrap();
        let h = interaction_hamiltonian_at(&m, &drive, 0.0).unwrap();
        assert_eq!(h.entries(), m.h0().entries());
        // spectrum preserved under conjugation
        let h = interaction_hamiltonian_at(&m, &drive, 0.7).unwrap();
        let a = h.spectrum().unwrap().eigenvalues().to_vec();
        let b = m.h0().spectrum().unwrap().eigenvalues().to_vec();
        let max_diff = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-10 * m.h0().norm().unwrap());
    }

    #[test]
    fn commuting_interaction_is_h0() {
        let m = build_commuting_model(8, 0.5, 10.0, 1.0, 5).unwrap();
        let drive = DriveParams::new(&m, 0.1, 1.0, switch()).unwrap();
        let h = interaction_hamiltonian_at(&m, &drive, 0.6).unwrap();
        assert!(max_abs(&(h.entries() - m.h0().entries())) < 1e-12 * m.h0().norm().unwrap());
    }

    #[test]
    fn admissibility_arithmetic() {
        // gamma0 = 0.5, M = 1, ||H1 H0^-1|| = 0.2 -> eps_star_max = 0.5 / (2.5 * 0.2) = 1.0
        let h0 = HermitianOperator::from_diagonal(&[5.0, 5.0]);
        let h1 = HermitianOperator::from_diagonal(&[1.0, -1.0]);
        let prov = Provenance {
            builder: "manual".into(),
            seed: 0,
            params: serde_json::json!({}),
            warnings: vec![],
        };
        let m = ModelPair::new(h0, h1, 0.5, ModelKind::Spectral, prov).unwrap();
        assert!((m.h1_h0_inv_norm().unwrap() - 0.2).abs() < 1e-14);
        let eps = m.eps_star_max(&switch()).unwrap();
        assert!((eps - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drive_rejects_excessive_epsilon() {
        let m = build_spectral_model(8, 0.5, 10.0, 1.0, 21).unwrap();
        let eps_max = m.eps_star_max(&switch()).unwrap();
        assert!(DriveParams::new(&m, eps_max, 1.0, switch()).is_err());
        assert!(DriveParams::new(&m, 0.9 * EPSILON_MARGIN * eps_max, 1.0, switch()).is_ok());
    }

    #[test]
    fn floor_holds_for_admissible_drive() {
        let m = build_spectral_model(12, 0.5, 10.0, 1.0, 21).unwrap();
        let drive = DriveParams::new(&m, 0.1, 1.0, switch()).unwrap();
        let grid: Vec<f64> = (0..=32).map(|k| k as f64 / 32.0).collect();
        let report = validate_model(&m, &drive, &grid).unwrap();
        assert!(report.floor_ok, "min eig {}", report.min_eigenvalue);
        assert!(report.epsilon_ok);
    }
}
