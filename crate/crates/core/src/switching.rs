//! Switching profiles: the ramp `g`, its derivative, its primitive `phi`, and
//! the maxima `M = max |g|`, `M' = max |g'|` over the switching window.
//!
//! Every profile satisfies `g(s) = 0` for `s < 0`, `g' = 0` outside `(0, 1)`,
//! and `g(s) = g(1)` for `s >= 1` (the drive stays on; switch-off profiles are
//! out of scope).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Point evaluation of a switching profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchValues {
    pub g: f64,
    pub g_prime: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchFamily {
    /// `s^2 (3 - 2s)` on the unit interval; C^1.
    CubicSmoothstep,
    /// `s^3 (10 - 15s + 6s^2)` on the unit interval; C^2.
    QuinticSmoothstep,
    /// Clamped cubic spline through user samples on `[0, 1]`.
    Sampled,
}

#[derive(Debug, Clone)]
pub struct SwitchFunction {
    family: SwitchFamily,
    amplitude: f64,
    spline: Option<Spline>,
}

impl SwitchFunction {
    pub fn cubic(amplitude: f64) -> Result<Self> {
        Self::polynomial(SwitchFamily::CubicSmoothstep, amplitude)
    }

    pub fn quintic(amplitude: f64) -> Result<Self> {
        Self::polynomial(SwitchFamily::QuinticSmoothstep, amplitude)
    }

    fn polynomial(family: SwitchFamily, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid("switch amplitude must be positive"));
        }
        Ok(SwitchFunction {
            family,
            amplitude,
            spline: None,
        })
    }

    /// Build from `(s, g(s))` samples on `[0, 1]`. The first sample must be
    /// `(0, 0)` and the last must sit at `s = 1`; the ramp then holds its final
    /// value. Sample coordinates or values outside `[0, 1]` are rejected, as
    /// are splines that overshoot that range.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        let spline = Spline::fit(samples)?;
        Ok(SwitchFunction {
            family: SwitchFamily::Sampled,
            amplitude: spline.amplitude,
            spline: Some(spline),
        })
    }

    /// Load a sampled profile from a two-column whitespace-separated text
    /// file; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or_else(|| {
                    Error::invalid(format!(
                        "{}:{}: expected two columns (s, g)",
                        path.display(),
                        lineno + 1
                    ))
                })?
                .parse::<f64>()
                .map_err(|e| {
                    Error::invalid(format!("{}:{}: {}", path.display(), lineno + 1, e))
                })
            };
            let s = parse(parts.next())?;
            let g = parse(parts.next())?;
            samples.push((s, g));
        }
        Self::from_samples(&samples)
    }

    pub fn family(&self) -> &SwitchFamily {
        &self.family
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Smoothness order `k`: the profile is C^k with `g'` supported in (0,1).
    pub fn order(&self) -> u32 {
        match self.family {
            SwitchFamily::CubicSmoothstep | SwitchFamily::Sampled => 1,
            SwitchFamily::QuinticSmoothstep => 2,
        }
    }

    /// `(g(s), g'(s), phi(s))` with `phi(s) = \int_0^s g`.
    pub fn eval(&self, s: f64) -> SwitchValues {
        if s <= 0.0 {
            return SwitchValues {
                g: 0.0,
                g_prime: 0.0,
                phi: 0.0,
            };
        }
        if s >= 1.0 {
            let g1 = self.g_at_one();
            let phi1 = self.phi_at_one();
            return SwitchValues {
                g: g1,
                g_prime: 0.0,
                phi: phi1 + (s - 1.0) * g1,
            };
        }
        let a = self.amplitude;
        match self.family {
            SwitchFamily::CubicSmoothstep => SwitchValues {
                g: a * s * s * (3.0 - 2.0 * s),
                g_prime: a * 6.0 * s * (1.0 - s),
                phi: a * (s.powi(3) - 0.5 * s.powi(4)),
            },
            SwitchFamily::QuinticSmoothstep => SwitchValues {
                g: a * s.powi(3) * (10.0 - 15.0 * s + 6.0 * s * s),
                g_prime: a * 30.0 * s * s * (1.0 - s) * (1.0 - s),
                phi: a * (2.5 * s.powi(4) - 3.0 * s.powi(5) + s.powi(6)),
            },
            SwitchFamily::Sampled => {
                let sp = self.spline.as_ref().expect("sampled profile has a spline");
                let (g, g_prime, phi) = sp.eval(s);
                SwitchValues {
                    g: g.clamp(0.0, self.amplitude),
                    g_prime,
                    phi,
                }
            }
        }
    }

    fn g_at_one(&self) -> f64 {
        match self.family {
            SwitchFamily::CubicSmoothstep | SwitchFamily::QuinticSmoothstep => self.amplitude,
            SwitchFamily::Sampled => self.spline.as_ref().unwrap().g_last,
        }
    }

    fn phi_at_one(&self) -> f64 {
        match self.family {
            // both smoothsteps are symmetric about s = 1/2
            SwitchFamily::CubicSmoothstep | SwitchFamily::QuinticSmoothstep => {
                0.5 * self.amplitude
            }
            SwitchFamily::Sampled => self.spline.as_ref().unwrap().phi_last,
        }
    }

    /// `(M, M')`: the maxima of `|g|` and `|g'|` over the switching window.
    /// Closed-form for the polynomial families; sampled profiles are scanned
    /// on a 1e5-point grid with a golden-section refinement around the argmax.
    pub fn constants(&self) -> (f64, f64) {
        match self.family {
            SwitchFamily::CubicSmoothstep => (self.amplitude, 1.5 * self.amplitude),
            SwitchFamily::QuinticSmoothstep => (self.amplitude, 1.875 * self.amplitude),
            SwitchFamily::Sampled => {
                let m = self.grid_max(|s| self.eval(s).g.abs());
                let m_prime = self.grid_max(|s| self.eval(s).g_prime.abs());
                (m, m_prime)
            }
        }
    }

    fn grid_max(&self, f: impl Fn(f64) -> f64) -> f64 {
        const GRID: usize = 100_000;
        let mut best = 0.0f64;
        let mut best_s = 0.0f64;
        for k in 0..=GRID {
            let s = k as f64 / GRID as f64;
            let v = f(s);
            if v > best {
                best = v;
                best_s = s;
            }
        }
        // golden-section refinement on the bracketing cell
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        let mut lo = (best_s - 1.0 / GRID as f64).max(0.0);
        let mut hi = (best_s + 1.0 / GRID as f64).min(1.0);
        for _ in 0..60 {
            let c = hi - gr * (hi - lo);
            let d = lo + gr * (hi - lo);
            if f(c) > f(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        best.max(f(0.5 * (lo + hi)))
    }
}

/// Clamped cubic spline (`g'(0) = g'(1) = 0`) with per-piece antiderivatives.
#[derive(Debug, Clone)]
struct Spline {
    s: Vec<f64>,
    g: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
    phi_knots: Vec<f64>,
    amplitude: f64,
    g_last: f64,
    phi_last: f64,
}

impl Spline {
    fn fit(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::invalid("sampled profile needs at least 3 points"));
        }
        for &(s, g) in samples {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!(
                    "sample coordinate {s} outside [0, 1]"
                )));
            }
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::invalid(format!("sample value {g} outside [0, 1]")));
            }
        }
        let mut pts = samples.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pts.windows(2) {
            if w[1].0 - w[0].0 <= 0.0 {
                return Err(Error::invalid("sample coordinates must be distinct"));
            }
        }
        if pts[0].0 != 0.0 || pts[0].1 != 0.0 {
            return Err(Error::invalid("first sample must be (0, 0)"));
        }
        if pts[pts.len() - 1].0 != 1.0 {
            return Err(Error::invalid("last sample must sit at s = 1"));
        }
        let n = pts.len();
        let s: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let g: Vec<f64> = pts.iter().map(|p| p.1).collect();

        // clamped cubic spline: solve the tridiagonal system for the second
        // derivatives with prescribed endpoint slopes of zero
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        off[0] = h[0];
        rhs[0] = 6.0 * ((g[1] - g[0]) / h[0] - 0.0);
        for i in 1..n - 1 {
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            off[i] = h[i];
            rhs[i] = 6.0 * ((g[i + 1] - g[i]) / h[i] - (g[i] - g[i - 1]) / h[i - 1]);
        }
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = 6.0 * (0.0 - (g[n - 1] - g[n - 2]) / h[n - 2]);

        // Thomas algorithm; the system is symmetric tridiagonal
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = off[0] / diag[0];
        d[0] = rhs[0] / diag[0];
        for i in 1..n {
            let denom = diag[i] - off[i - 1] * c[i - 1];
            if i < n - 1 {
                c[i] = off[i] / denom;
            }
            d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
        }
        let mut m = vec![0.0; n];
        m[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }

        // cumulative exact integrals of each cubic piece
        let mut phi_knots = vec![0.0; n];
        for i in 0..n - 1 {
            let hi = h[i];
            let piece = 0.5 * hi * (g[i] + g[i + 1]) - hi.powi(3) / 24.0 * (m[i] + m[i + 1]);
            phi_knots[i + 1] = phi_knots[i] + piece;
        }

        let spline = Spline {
            amplitude: g.iter().cloned().fold(0.0, f64::max),
            g_last: g[n - 1],
            phi_last: phi_knots[n - 1],
            s,
            g,
            m,
            phi_knots,
        };
        spline.check_range()?;
        Ok(spline)
    }

    fn check_range(&self) -> Result<()> {
        for k in 0..=2000 {
            let s = k as f64 / 2000.0;
            let (g, _, _) = self.eval(s);
            if !(-1e-9..=1.0 + 1e-9).contains(&g) {
                return Err(Error::invalid(format!(
                    "sampled profile overshoots [0, 1] at s = {s} (g = {g})"
                )));
            }
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.s.len();
        let i = match self.s.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let (s0, s1) = (self.s[i], self.s[i + 1]);
        let h = s1 - s0;
        let a = (s1 - x) / h;
        let b = (x - s0) / h;
        let g = a * self.g[i]
            + b * self.g[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0;
        let g_prime = (self.g[i + 1] - self.g[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0;
        // exact integral of the cubic piece from s0 to x
        let term_lin = (self.g[i] * (1.0 - a * a) + self.g[i + 1] * b * b) * h / 2.0;
        let term_cub = (self.m[i] * (2.0 * a * a - a.powi(4) - 1.0)
            + self.m[i + 1] * (b.powi(4) - 2.0 * b * b))
            * h.powi(3)
            / 24.0;
        let phi = self.phi_knots[i] + term_lin + term_cub;
        (g, g_prime, phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_point_values() {
        let sw = SwitchFunction::cubic(1.0).unwrap();
        assert_eq!(
            sw.eval(-1.0),
            SwitchValues {
                g: 0.0,
                g_prime: 0.0,
                phi: 0.0
            }
        );
        let v = sw.eval(0.5);
        assert!((v.g - 0.5).abs() < 1e-15);
        assert!((v.g_prime - 1.5).abs() < 1e-15);
        assert!((v.phi - 0.09375).abs() < 1e-15);
        let v = sw.eval(2.0);
        assert!((v.g - 1.0).abs() < 1e-15);
        assert_eq!(v.g_prime, 0.0);
        assert!((v.phi - 1.5).abs() < 1e-15);
    }

    #[test]
    fn constants_closed_form() {
        let (m, mp) = SwitchFunction::cubic(1.0).unwrap().constants();
        assert_eq!((m, mp), (1.0, 1.5));
        let (m, mp) = SwitchFunction::cubic(0.5).unwrap().constants();
        assert_eq!((m, mp), (0.5, 0.75));
        let (m, mp) = SwitchFunction::quintic(1.0).unwrap().constants();
        assert_eq!((m, mp), (1.0, 1.875));
    }

    #[test]
    fn phi_matches_numeric_integral() {
        for sw in [
            SwitchFunction::cubic(1.0).unwrap(),
            SwitchFunction::quintic(0.7).unwrap(),
        ] {
            for &s_end in &[0.3, 0.9, 1.0, 1.7, 3.0] {
                // composite Simpson on [0, s_end]
                let n = 4000;
                let h = s_end / n as f64;
                let mut acc = 0.0;
                for k in 0..n {
                    let a = k as f64 * h;
                    let f0 = sw.eval(a).g;
                    let fm = sw.eval(a + 0.5 * h).g;
                    let f1 = sw.eval(a + h).g;
                    acc += h / 6.0 * (f0 + 4.0 * fm + f1);
                }
                assert!(
                    (acc - sw.eval(s_end).phi).abs() < 1e-10,
                    "family {:?} s={} diff={}",
                    sw.family(),
                    s_end,
                    (acc - sw.eval(s_end).phi).abs()
                );
            }
        }
    }

    #[test]
    fn cubic_monotone_on_ramp() {
        let sw = SwitchFunction::cubic(1.0).unwrap();
        let mut prev = -1.0;
        for k in 0..=1000 {
            let g = sw.eval(k as f64 / 1000.0).g;
            assert!(g >= prev - 1e-15);
            prev = g;
        }
    }

    #[test]
    fn constants_attained() {
        let sw = SwitchFunction::quintic(1.0).unwrap();
        let (m, mp) = sw.constants();
        let mut found_m = false;
        let mut found_mp = false;
        for k in 0..=100_000 {
            let v = sw.eval(k as f64 / 100_000.0);
            if (v.g.abs() - m).abs() < 1e-6 {
                found_m = true;
            }
            if (v.g_prime.abs() - mp).abs() < 1e-6 {
                found_mp = true;
            }
        }
        assert!(found_m && found_mp);
    }

    #[test]
    fn sampled_profile_tracks_cubic() {
        let reference = SwitchFunction::cubic(1.0).unwrap();
        let samples: Vec<(f64, f64)> = (0..=40)
            .map(|k| {
                let s = k as f64 / 40.0;
                (s, reference.eval(s).g)
            })
            .collect();
        let sw = SwitchFunction::from_samples(&samples).unwrap();
        for k in 0..=200 {
            let s = k as f64 / 100.0; // covers [0, 2]
            let a = sw.eval(s);
            let b = reference.eval(s);
            assert!((a.g - b.g).abs() < 1e-3, "g mismatch at {s}");
            assert!((a.phi - b.phi).abs() < 1e-3, "phi mismatch at {s}");
        }
        // support conditions hold structurally
        assert_eq!(sw.eval(-0.2).g, 0.0);
        assert_eq!(sw.eval(1.5).g_prime, 0.0);
        let (m, mp) = sw.constants();
        assert!((m - 1.0).abs() < 1e-6);
        assert!((mp - 1.5).abs() < 1e-2);
    }

    #[test]
    fn sampled_phi_consistent_with_numeric_integral() {
        let samples: Vec<(f64, f64)> = (0..=20)
            .map(|k| {
                let s = k as f64 / 20.0;
                (s, s * s * (3.0 - 2.0 * s))
            })
            .collect();
        let sw = SwitchFunction::from_samples(&samples).unwrap();
        for &s_end in &[0.37, 0.81, 1.0, 2.4] {
            let n = 4000;
            let h = s_end / n as f64;
            let mut acc = 0.0;
            for k in 0..n {
                let a = k as f64 * h;
                acc += h / 6.0
                    * (sw.eval(a).g + 4.0 * sw.eval(a + 0.5 * h).g + sw.eval(a + h).g);
            }
            assert!(
                (acc - sw.eval(s_end).phi).abs() < 1e-10,
                "s={s_end} diff={}",
                (acc - sw.eval(s_end).phi).abs()
            );
        }
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(SwitchFunction::from_samples(&[(0.0, 0.0), (0.5, 1.2), (1.0, 1.0)]).is_err());
        assert!(SwitchFunction::from_samples(&[(0.0, 0.0), (1.5, 0.5), (1.0, 1.0)]).is_err());
        assert!(SwitchFunction::from_samples(&[(0.1, 0.0), (0.5, 0.5), (1.0, 1.0)]).is_err());
    }
}
