//! Magnetic Schrödinger operator on a square patch: five-point kinetic term
//! with Peierls link phases in the symmetric gauge, an optional bounded
//! potential, and a smooth spatial switch ramping from 0 to 1 along the first
//! axis. The pair `(H0 + shift, Lambda_1)` plugs into the general
//! certification machinery.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{ModelKind, ModelPair, Provenance};
use crate::operator::HermitianOperator;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Zero,
    /// Single bump `amplitude * exp(-((x-cx)^2 + (y-cy)^2) / (2 width^2))`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: (f64, f64),
    },
    /// `amplitude * cos(kx x) cos(ky y)`.
    CosineLattice { amplitude: f64, kx: f64, ky: f64 },
}

impl PotentialSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::GaussianBump {
                amplitude,
                width,
                center,
            } => {
                let dx = x - center.0;
                let dy = y - center.1;
                amplitude * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
            PotentialSpec::CosineLattice { amplitude, kx, ky } => {
                amplitude * (kx * x).cos() * (ky * y).cos()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandauSpec {
    /// Sites per axis (cell-centered on the open square).
    pub grid_points: usize,
    /// Domain half-width `L`: the patch is `[-L, L]^2` with Dirichlet walls.
    pub half_width: f64,
    /// Magnetic field strength `B > 0` (symmetric gauge).
    pub field_b: f64,
    /// Potential coupling.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_potential")]
    pub potential: PotentialSpec,
    /// Spatial switch half-width `l1`: the ramp is 0 below `-l1` and 1 above.
    pub switch_width: f64,
}

fn default_potential() -> PotentialSpec {
    PotentialSpec::Zero
}

impl LandauSpec {
    pub fn dim(&self) -> usize {
        self.grid_points * self.grid_points
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.grid_points as f64
    }

    fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.step()
    }

    fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid_points + ix
    }

    fn validate(&self) -> Result<()> {
        if self.grid_points < 4 {
            return Err(Error::invalid("grid_points must be at least 4"));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::invalid("half_width must be positive"));
        }
        if !(self.field_b > 0.0) {
            return Err(Error::invalid("field_b must be positive"));
        }
        if !(self.switch_width > 0.0) || self.switch_width >= self.half_width {
            return Err(Error::invalid(
                "switch_width must be positive and smaller than half_width",
            ));
        }
        Ok(())
    }

    /// Flux-resolution heuristic: `B L^2 / N` should stay at or below one.
    pub fn flux_coarse(&self) -> bool {
        self.field_b * self.half_width * self.half_width / self.grid_points as f64 > 1.0
    }
}

/// Smooth spatial switch along the first axis: quintic ramp over
/// `[-l1, l1]`, exactly 0 below and exactly 1 above.
pub fn spatial_switch(x: f64, l1: f64) -> f64 {
    let s = (x + l1) / (2.0 * l1);
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// Derivative of [`spatial_switch`] in `x`.
pub fn spatial_switch_derivative(x: f64, l1: f64) -> f64 {
    let s = (x + l1) / (2.0 * l1);
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        30.0 * s * s * (1.0 - s) * (1.0 - s) / (2.0 * l1)
    }
}

/// Symmetric-gauge vector potential `A = (B/2)(-y, x)`, optionally shifted by
/// a constant (a pure gauge change used by covariance tests).
fn link_phase_x(spec: &LandauSpec, _x: f64, y: f64, shift: (f64, f64)) -> f64 {
    // integral of A_x along the x-link starting at (x, y); A is linear so the
    // midpoint value is exact
    let h = spec.step();
    -(-(spec.field_b / 2.0) * y + shift.0) * h
}

fn link_phase_y(spec: &LandauSpec, x: f64, _y: f64, shift: (f64, f64)) -> f64 {
    let h = spec.step();
    -((spec.field_b / 2.0) * x + shift.1) * h
}

/// Kinetic-plus-potential operator (unshifted): five-point covariant stencil
/// `(1/2) p_A^2 + lambda V` with Dirichlet walls.
pub(crate) fn build_raw_h0(spec: &LandauSpec, gauge_shift: (f64, f64)) -> CMat {
    let n = spec.grid_points;
    let dim = spec.dim();
    let h = spec.step();
    let t = 0.5 / (h * h);
    let mut m = Array2::<C64>::zeros((dim, dim));
    for iy in 0..n {
        for ix in 0..n {
            let i = spec.index(ix, iy);
            let x = spec.coord(ix);
            let y = spec.coord(iy);
            m[(i, i)] += C64::new(2.0 / (h * h) + spec.lambda * spec.potential.eval(x, y), 0.0);
            if ix + 1 < n {
                let j = spec.index(ix + 1, iy);
                let phi = link_phase_x(spec, x, y, gauge_shift);
                // row i, column i+1 carries e^{i phi}; Hermiticity fixes the
                // reverse hop
                let amp = C64::from_polar(t, phi);
                m[(i, j)] -= amp;
                m[(j, i)] -= amp.conj();
            }
            if iy + 1 < n {
                let j = spec.index(ix, iy + 1);
                let phi = link_phase_y(spec, x, y, gauge_shift);
                let amp = C64::from_polar(t, phi);
                m[(i, j)] -= amp;
                m[(j, i)] -= amp.conj();
            }
        }
    }
    m
}

/// Covariant momentum along the first axis (central difference with the same
/// link phases as the kinetic term).
pub(crate) fn build_momentum_x(spec: &LandauSpec, gauge_shift: (f64, f64)) -> CMat {
    let n = spec.grid_points;
    let dim = spec.dim();
    let h = spec.step();
    let mut m = Array2::<C64>::zeros((dim, dim));
    for iy in 0..n {
        for ix in 0..n {
            let i = spec.index(ix, iy);
            let x = spec.coord(ix);
            let y = spec.coord(iy);
            if ix + 1 < n {
                let j = spec.index(ix + 1, iy);
                let phi = link_phase_x(spec, x, y, gauge_shift);
                // central covariant difference: row i couples to i+1 with
                // -i/(2h) e^{i phi}; Hermiticity fixes the reverse element
                let amp = C64::new(0.0, -1.0 / (2.0 * h)) * C64::from_polar(1.0, phi);
                m[(i, j)] += amp;
                m[(j, i)] += amp.conj();
            }
        }
    }
    m
}

/// Diagonal samples of the spatial switch.
pub(crate) fn switch_samples(spec: &LandauSpec) -> Vec<f64> {
    let n = spec.grid_points;
    let mut v = vec![0.0; spec.dim()];
    for iy in 0..n {
        for ix in 0..n {
            v[spec.index(ix, iy)] = spatial_switch(spec.coord(ix), spec.switch_width);
        }
    }
    v
}

/// Build the Landau model pair: `H0` is the shifted magnetic operator (the
/// shift is computed from the measured ground energy so the spectrum clears
/// `1 + gamma0`), `H1` is the diagonal spatial switch.
pub fn build_landau_model(spec: &LandauSpec, gamma0: f64) -> Result<ModelPair> {
    spec.validate()?;
    if !(gamma0 > 0.0) {
        return Err(Error::invalid("gamma0 must be positive"));
    }
    let mut warnings = Vec::new();
    if spec.flux_coarse() {
        warnings.push(format!(
            "flux resolution is coarse: B L^2 / N = {:.2} exceeds 1; magnetic features may be under-resolved",
            spec.field_b * spec.half_width * spec.half_width / spec.grid_points as f64
        ));
        log::warn!("{}", warnings.last().unwrap());
    }
    let raw = build_raw_h0(spec, (0.0, 0.0));
    let raw_op = HermitianOperator::new(raw)?;
    let spectrum = raw_op.spectrum()?;
    let ground = spectrum.min_eigenvalue();
    let shift = (1.0 + gamma0 - ground).max(0.0);

    // the shift moves eigenvalues rigidly and keeps the eigenvectors; reuse
    // the decomposition instead of re-solving at full size
    let dim = spec.dim();
    let mut shifted = raw_op.entries().clone();
    for i in 0..dim {
        shifted[(i, i)] += C64::new(shift, 0.0);
    }
    let shifted_spec = crate::operator::SpectralDecomposition::from_parts(
        spectrum.eigenvalues().iter().map(|v| v + shift).collect(),
        spectrum.eigenvectors().clone(),
    );
    let h0 = HermitianOperator::with_cached_spectrum(shifted, shifted_spec)?;

    let h1 = HermitianOperator::from_diagonal(&switch_samples(spec));

    let provenance = Provenance {
        builder: "landau".into(),
        seed: 0,
        params: serde_json::json!({
            "spec": spec,
            "gamma0": gamma0,
            "energy_shift": shift,
            "ground_energy_raw": ground,
        }),
        warnings,
    };
    crate::model::model_from_parts(h0, h1, gamma0, ModelKind::Landau, provenance)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelCluster {
    pub index: usize,
    pub mean_energy: f64,
    pub count: usize,
    pub target: f64,
    pub relative_error: f64,
}

/// Cluster the low bulk spectrum and compare against the flat-band ladder
/// `shift + B (k + 1/2)`. Boundary states are excluded by requiring at least
/// `bulk_mass` probability inside the centered half-size square.
pub fn landau_level_clusters(
    model: &ModelPair,
    spec: &LandauSpec,
    n_clusters: usize,
    bulk_mass: f64,
) -> Result<Vec<LevelCluster>> {
    let shift = model
        .provenance()
        .params
        .get("energy_shift")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::invalid("model lacks landau provenance"))?;
    let spectrum = model.h0().spectrum()?;
    let n = spec.grid_points;
    let inner = |i: usize| -> bool { spec.coord(i).abs() <= spec.half_width / 2.0 };

    // collect bulk states in ascending energy order until past the window
    let window_top = shift + spec.field_b * (n_clusters as f64 + 0.5);
    let mut bulk_energies = Vec::new();
    for (k, &e) in spectrum.eigenvalues().iter().enumerate() {
        if e > window_top {
            break;
        }
        let col = spectrum.eigenvectors().column(k);
        let mut mass = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                if inner(ix) && inner(iy) {
                    mass += col[spec.index(ix, iy)].norm_sqr();
                }
            }
        }
        if mass >= bulk_mass {
            bulk_energies.push(e);
        }
    }
    if bulk_energies.is_empty() {
        return Err(Error::invalid("no bulk states found below the window"));
    }

    // greedy gap clustering
    let gap = spec.field_b / 2.0;
    let mut clusters: Vec<Vec<f64>> = vec![vec![bulk_energies[0]]];
    for &e in &bulk_energies[1..] {
        let last = clusters.last_mut().unwrap();
        if e - last.last().unwrap() > gap {
            clusters.push(vec![e]);
        } else {
            last.push(e);
        }
    }
    Ok(clusters
        .into_iter()
        .take(n_clusters)
        .enumerate()
        .map(|(k, es)| {
            let mean = es.iter().sum::<f64>() / es.len() as f64;
            let target = shift + spec.field_b * (k as f64 + 0.5);
            LevelCluster {
                index: k,
                mean_energy: mean,
                count: es.len(),
                target,
                relative_error: (mean - target).abs() / target,
            }
        })
        .collect())
}

/// Relative residual of the discrete commutator identity
/// `[Lambda_1, H0] = (i/2)(p_1 Lambda' + Lambda' p_1)`:
/// `‖lhs - rhs‖ / ‖lhs‖`. Both sides are anti-Hermitian and grow like `1/h`,
/// so the relative defect is the quantity with second-order decay under grid
/// refinement. The norms come from Hermitian eigenvalue problems on `-i`
/// times the anti-Hermitian matrices.
pub fn commutator_identity_residual(spec: &LandauSpec) -> Result<f64> {
    spec.validate()?;
    let h0 = build_raw_h0(spec, (0.0, 0.0));
    let p1 = build_momentum_x(spec, (0.0, 0.0));
    let lam = switch_samples(spec);
    let n = spec.grid_points;
    let dim = spec.dim();
    let mut lam_prime = vec![0.0; dim];
    for iy in 0..n {
        for ix in 0..n {
            lam_prime[spec.index(ix, iy)] =
                spatial_switch_derivative(spec.coord(ix), spec.switch_width);
        }
    }

    // [Lambda, H0] for diagonal Lambda is (Lambda_i - Lambda_j) H0_ij
    let mut lhs = Array2::<C64>::zeros((dim, dim));
    let mut diff = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let commutator = (lam[i] - lam[j]) * h0[(i, j)];
            let rhs = C64::new(0.0, 0.5) * p1[(i, j)] * (lam_prime[i] + lam_prime[j]);
            // -i turns the anti-Hermitian matrices Hermitian
            lhs[(i, j)] = C64::new(0.0, -1.0) * commutator;
            diff[(i, j)] = C64::new(0.0, -1.0) * (commutator - rhs);
        }
    }
    let lhs_norm = linalg::spectral_norm_normal(&lhs, false)?;
    let diff_norm = linalg::spectral_norm_normal(&diff, false)?;
    Ok(diff_norm / lhs_norm.max(f64::MIN_POSITIVE))
}
