//! Run configuration: one structured TOML file per run, no flag soup.
//! Certificates must be reproducible from the file alone, so everything that
//! affects numbers lives here.

use crate::certify::CertifyOptions;
use crate::error::{Error, Result};
use crate::landau::LandauSpec;
use crate::model::{self, ModelKind, ModelPair};
use crate::switching::SwitchFunction;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub drive: DriveSection,
    #[serde(default)]
    pub certification: CertSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub gamma0: f64,
    #[serde(default)]
    pub seed: u64,
    /// Matrix size for the synthetic builders.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub spectrum_max: Option<f64>,
    #[serde(default)]
    pub coupling: Option<f64>,
    /// Magnetic-patch parameters, required when `kind = "landau"`.
    #[serde(default)]
    pub landau: Option<LandauSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub epsilon: f64,
    /// Time-scale sweep; every certification cell runs once per value.
    #[serde(default)]
    pub eta_sweep: Vec<f64>,
    /// Convenience slice with the time scale tied to the intensity
    /// (the application regime); overrides `eta_sweep` with `[epsilon]`.
    #[serde(default)]
    pub lock_eta_to_epsilon: bool,
    #[serde(default)]
    pub switch: SwitchSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSection {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Two-column `(s, g)` text file for `family = "sampled"`.
    #[serde(default)]
    pub samples_file: Option<String>,
}

fn default_family() -> String {
    "cubic-smoothstep".into()
}

fn default_amplitude() -> f64 {
    1.0
}

impl Default for SwitchSection {
    fn default() -> Self {
        SwitchSection {
            family: default_family(),
            amplitude: default_amplitude(),
            samples_file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertSection {
    /// Orders certified: `n` runs over `[-n_max, n_max]`.
    #[serde(default = "default_n_max")]
    pub n_max: i32,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eps_probe")]
    pub eps_probe: Vec<f64>,
    /// Re-measure each supremum on a grid extended to 1.5 windows on both
    /// sides and record the change.
    #[serde(default)]
    pub window_audit: bool,
    /// Smaller magnetic truncation used for the propagator stage of a
    /// Landau run (the spectrum and commutator audits use the full grid).
    #[serde(default)]
    pub landau_reduction: Option<LandauReduction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauReduction {
    pub grid_points: usize,
    pub half_width: f64,
}

fn default_n_max() -> i32 {
    4
}

fn default_grid_size() -> usize {
    33
}

fn default_tol() -> f64 {
    1e-8
}

fn default_eps_probe() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

impl Default for CertSection {
    fn default() -> Self {
        CertSection {
            n_max: default_n_max(),
            grid_size: default_grid_size(),
            tol: default_tol(),
            eps_probe: default_eps_probe(),
            window_audit: false,
            landau_reduction: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    /// Subset of `json`, `csv`, `plot`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into(), "plot".into()]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_out_dir(),
            formats: default_formats(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        cfg.resolve()
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_str_resolved(text: &str, origin: &str) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        cfg.resolve().map_err(|e| Error::config(origin, e.to_string()))?;
        Ok(cfg)
    }

    /// Fill derived defaults and check everything that does not need the
    /// model built (the intensity margin is checked against the built model
    /// in the runner, before any integration).
    fn resolve(&mut self) -> std::result::Result<(), String> {
        if self.drive.lock_eta_to_epsilon {
            self.drive.eta_sweep = vec![self.drive.epsilon];
        }
        if self.drive.eta_sweep.is_empty() {
            return Err("drive.eta_sweep must be nonempty (or set lock_eta_to_epsilon)".into());
        }
        if self.drive.eta_sweep.iter().any(|&e| !(e > 0.0)) {
            return Err("drive.eta_sweep entries must be positive".into());
        }
        if !(self.drive.epsilon >= 0.0) {
            return Err("drive.epsilon must be nonnegative".into());
        }
        if self.certification.n_max < 0 {
            return Err("certification.n_max must be nonnegative".into());
        }
        if self.certification.grid_size < 9 {
            return Err("certification.grid_size must be at least 9".into());
        }
        if !(self.certification.tol > 0.0) {
            return Err("certification.tol must be positive".into());
        }
        if self.certification.eps_probe.iter().any(|&e| !(e > 0.0)) {
            return Err("certification.eps_probe entries must be positive".into());
        }
        match self.model.kind {
            ModelKind::Spectral | ModelKind::Commuting => {
                if self.model.dim.is_none()
                    || self.model.spectrum_max.is_none()
                    || self.model.coupling.is_none()
                {
                    return Err(
                        "spectral/commuting models need model.dim, model.spectrum_max, model.coupling"
                            .into(),
                    );
                }
            }
            ModelKind::Landau => {
                if self.model.landau.is_none() {
                    return Err("landau models need a [model.landau] table".into());
                }
            }
        }
        for f in &self.output.formats {
            if !matches!(f.as_str(), "json" | "csv" | "plot") {
                return Err(format!("unknown output format {f:?}"));
            }
        }
        Ok(())
    }

    pub fn build_switch(&self) -> Result<SwitchFunction> {
        let s = &self.drive.switch;
        match s.family.as_str() {
            "cubic-smoothstep" => SwitchFunction::cubic(s.amplitude),
            "quintic-smoothstep" => SwitchFunction::quintic(s.amplitude),
            "sampled" => {
                let file = s.samples_file.as_ref().ok_or_else(|| {
                    Error::invalid("sampled switch requires drive.switch.samples_file")
                })?;
                SwitchFunction::from_file(Path::new(file))
            }
            other => Err(Error::invalid(format!("unknown switch family {other:?}"))),
        }
    }

    pub fn build_model(&self) -> Result<ModelPair> {
        match self.model.kind {
            ModelKind::Spectral => model::build_spectral_model(
                self.model.dim.unwrap(),
                self.model.gamma0,
                self.model.spectrum_max.unwrap(),
                self.model.coupling.unwrap(),
                self.model.seed,
            ),
            ModelKind::Commuting => model::build_commuting_model(
                self.model.dim.unwrap(),
                self.model.gamma0,
                self.model.spectrum_max.unwrap(),
                self.model.coupling.unwrap(),
                self.model.seed,
            ),
            ModelKind::Landau => {
                crate::landau::build_landau_model(self.model.landau.as_ref().unwrap(), self.model.gamma0)
            }
        }
    }

    /// The Landau truncation used for the propagator stage.
    pub fn landau_certification_spec(&self) -> Option<LandauSpec> {
        let base = self.model.landau.as_ref()?;
        let mut spec = base.clone();
        if let Some(red) = &self.certification.landau_reduction {
            spec.grid_points = red.grid_points;
            spec.half_width = red.half_width;
        }
        Some(spec)
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            eta_sweep: self.drive.eta_sweep.clone(),
            n_max: self.certification.n_max,
            grid_size: self.certification.grid_size,
            tol: self.certification.tol,
            eps_probe: self.certification.eps_probe.clone(),
            window_audit: self.certification.window_audit,
            gauge_subsample: 8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
[model]
kind = "spectral"
dim = 16
gamma0 = 0.5
spectrum_max = 10.0
coupling = 1.0
seed = 42

[drive]
epsilon = 0.1
eta_sweep = [0.25, 1.0, 4.0, 16.0]

[certification]
n_max = 4
grid_size = 33
tol = 1e-8
"#;

    #[test]
    fn parses_reference() {
        let cfg = RunConfig::from_str_resolved(REFERENCE, "test").unwrap();
        assert_eq!(cfg.model.dim, Some(16));
        assert_eq!(cfg.drive.eta_sweep.len(), 4);
        assert_eq!(cfg.certification.eps_probe, vec![0.2, 0.1, 0.05]);
        assert_eq!(cfg.output.directory, "out");
        let m = cfg.build_model().unwrap();
        assert_eq!(m.dim(), 16);
    }

    #[test]
    fn rejects_unknown_fields_with_location() {
        let bad = REFERENCE.replace("grid_size = 33", "grid_sizes = 33");
        let err = RunConfig::from_str_resolved(&bad, "test").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("grid_sizes"), "{msg}");
    }

    #[test]
    fn rejects_bad_sweep() {
        let bad = REFERENCE.replace("eta_sweep = [0.25, 1.0, 4.0, 16.0]", "eta_sweep = []");
        assert!(RunConfig::from_str_resolved(&bad, "test").is_err());
    }

    #[test]
    fn lock_flag_ties_eta_to_epsilon() {
        let cfg_text = REFERENCE.replace(
            "eta_sweep = [0.25, 1.0, 4.0, 16.0]",
            "lock_eta_to_epsilon = true",
        );
        let cfg = RunConfig::from_str_resolved(&cfg_text, "test").unwrap();
        assert_eq!(cfg.drive.eta_sweep, vec![0.1]);
    }

    #[test]
    fn landau_requires_table() {
        let bad = REFERENCE.replace("kind = \"spectral\"", "kind = \"landau\"");
        assert!(RunConfig::from_str_resolved(&bad, "test").is_err());
    }
}
