//! Configuration-driven runs: certification, the gauge-identity audit, and
//! the magnetic-patch application. Each run builds its model, validates the
//! drive before any integration, executes the pipeline, and writes artifacts
//! under the output directory.

use crate::certify::{self, BoundCertificate, GaugeReport};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::landau::{self, LandauSpec, LevelCluster};
use crate::model::DriveParams;
use crate::report;
use serde::Serialize;
use std::path::{Path, PathBuf};

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

#[derive(Debug)]
pub struct CertifyArtifacts {
    pub certificate: BoundCertificate,
    pub pass: bool,
    pub written: Vec<PathBuf>,
}

/// Full certification run from a configuration.
pub fn run_certify(config: &RunConfig, out_dir: &Path) -> Result<CertifyArtifacts> {
    let model = config.build_model()?;
    let switch = config.build_switch()?;
    // admissibility margin enforced here, before any integration
    let drive = DriveParams::new(&model, config.drive.epsilon, config.drive.eta_sweep[0], switch)?;
    let opts = config.certify_options();
    let certificate = certify::certify(&model, &drive, &opts)?;
    let written = write_certificate_artifacts(config, &certificate, out_dir, "certificate")?;
    Ok(CertifyArtifacts {
        pass: certificate.verdicts.overall,
        certificate,
        written,
    })
}

fn write_certificate_artifacts(
    config: &RunConfig,
    certificate: &BoundCertificate,
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for format in &config.output.formats {
        match format.as_str() {
            "json" => written.push(write_artifact(
                out_dir,
                &format!("{stem}.json"),
                &report::certificate_json(config, certificate)?,
            )?),
            "csv" => written.push(write_artifact(
                out_dir,
                &format!("{stem}.csv"),
                &report::certificate_csv(config, certificate)?,
            )?),
            "plot" => written.push(write_artifact(
                out_dir,
                &format!("{stem}_plot.csv"),
                &report::plot_data(config, certificate)?,
            )?),
            _ => unreachable!("validated at parse time"),
        }
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct GaugeDocument<'a> {
    pub schema: &'static str,
    pub config: &'a RunConfig,
    pub reports: &'a [GaugeReport],
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug)]
pub struct GaugeArtifacts {
    pub reports: Vec<GaugeReport>,
    pub max_residual: f64,
    pub pass: bool,
    pub written: Vec<PathBuf>,
}

/// Standalone audit of the gauge identity linking the two pictures, per
/// sweep entry.
pub fn run_gauge_check(config: &RunConfig, out_dir: &Path) -> Result<GaugeArtifacts> {
    let model = config.build_model()?;
    let switch = config.build_switch()?;
    let drive = DriveParams::new(&model, config.drive.epsilon, config.drive.eta_sweep[0], switch)?;
    let mut reports = Vec::new();
    for &eta in &config.drive.eta_sweep {
        let d = drive.with_eta(eta);
        reports.push(certify::gauge_residual(
            &model,
            &d,
            config.certification.grid_size,
            8,
            config.certification.tol,
        )?);
    }
    let max_residual = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    let doc = GaugeDocument {
        schema: "enbound-gauge-v1",
        config,
        reports: &reports,
        max_residual,
        pass,
    };
    let written = vec![write_artifact(
        out_dir,
        "gauge_report.json",
        &report::to_json_17(&doc)?,
    )?];
    Ok(GaugeArtifacts {
        reports,
        max_residual,
        pass,
        written,
    })
}

#[derive(Debug, Serialize)]
pub struct CommutatorCheck {
    pub coarse_grid: usize,
    pub fine_grid: usize,
    pub coarse_residual: f64,
    pub fine_residual: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct SwitchColumn {
    pub x_first: f64,
    pub x_last: f64,
    pub value_first: f64,
    pub value_last: f64,
    pub endpoints_exact: bool,
}

#[derive(Debug, Serialize)]
pub struct LandauDocument<'a> {
    pub schema: &'static str,
    pub config: &'a RunConfig,
    pub spec: &'a LandauSpec,
    pub certification_spec: &'a LandauSpec,
    pub energy_shift: f64,
    pub warnings: &'a [String],
    pub clusters: &'a [LevelCluster],
    pub clusters_pass: bool,
    pub switch_column: &'a SwitchColumn,
    pub commutator: &'a CommutatorCheck,
    pub certificate: &'a BoundCertificate,
    pub pass: bool,
}

#[derive(Debug)]
pub struct LandauArtifacts {
    pub clusters: Vec<LevelCluster>,
    pub clusters_pass: bool,
    pub commutator: CommutatorCheck,
    pub switch_column: SwitchColumn,
    pub certificate: BoundCertificate,
    pub energy_shift: f64,
    pub warnings: Vec<String>,
    pub pass: bool,
    pub written: Vec<PathBuf>,
}

/// The magnetic-patch application run: flat-band spectrum audit, discrete
/// commutator identity with grid-refinement decay, and a reduced
/// certification on the configured truncation with the time scale tied to
/// the intensity.
pub fn run_landau(config: &RunConfig, out_dir: &Path) -> Result<LandauArtifacts> {
    let spec = config
        .model
        .landau
        .clone()
        .ok_or_else(|| Error::invalid("landau run needs [model.landau]"))?;
    let gamma0 = config.model.gamma0;

    // spectrum audit on the full grid
    let model = landau::build_landau_model(&spec, gamma0)?;
    let clusters = landau::landau_level_clusters(&model, &spec, 3, 0.99)?;
    let clusters_pass = clusters.len() == 3 && clusters.iter().all(|c| c.relative_error <= 0.02);
    let energy_shift = model
        .provenance()
        .params
        .get("energy_shift")
        .and_then(|v| v.as_f64())
        .unwrap_or(0.0);
    let warnings = model.provenance().warnings.clone();

    // switch-column endpoints on the full grid
    let samples = {
        let h1 = model.h1().entries();
        let n = spec.grid_points;
        let first = h1[(0, 0)].re;
        let last = h1[(n - 1, n - 1)].re;
        let h = spec.step();
        SwitchColumn {
            x_first: -spec.half_width + 0.5 * h,
            x_last: spec.half_width - 0.5 * h,
            value_first: first,
            value_last: last,
            endpoints_exact: first == 0.0 && last == 1.0,
        }
    };

    // commutator identity decay under h-halving: the coarse grid has half
    // the points (double spacing) of the configured one
    let coarse_spec = LandauSpec {
        grid_points: spec.grid_points / 2,
        ..spec.clone()
    };
    let coarse_residual = landau::commutator_identity_residual(&coarse_spec)?;
    let fine_residual = landau::commutator_identity_residual(&spec)?;
    let ratio = coarse_residual / fine_residual;
    let commutator = CommutatorCheck {
        coarse_grid: coarse_spec.grid_points,
        fine_grid: spec.grid_points,
        coarse_residual,
        fine_residual,
        ratio,
        pass: ratio >= 3.0,
    };

    // reduced certification on the configured truncation
    let cert_spec = config.landau_certification_spec().unwrap();
    let cert_model = landau::build_landau_model(&cert_spec, gamma0)?;
    let switch = config.build_switch()?;
    let drive = DriveParams::new(
        &cert_model,
        config.drive.epsilon,
        config.drive.eta_sweep[0],
        switch,
    )?;
    let opts = config.certify_options();
    let certificate = certify::certify(&cert_model, &drive, &opts)?;

    let pass = clusters_pass && commutator.pass && samples.endpoints_exact && certificate.verdicts.overall;
    let doc = LandauDocument {
        schema: "enbound-landau-v1",
        config,
        spec: &spec,
        certification_spec: &cert_spec,
        energy_shift,
        warnings: &warnings,
        clusters: &clusters,
        clusters_pass,
        switch_column: &samples,
        commutator: &commutator,
        certificate: &certificate,
        pass,
    };
    let mut written = vec![write_artifact(
        out_dir,
        "landau_report.json",
        &report::to_json_17(&doc)?,
    )?];
    written.extend(write_certificate_artifacts(
        config,
        &certificate,
        out_dir,
        "landau_certificate",
    )?);

    Ok(LandauArtifacts {
        clusters,
        clusters_pass,
        commutator,
        switch_column: samples,
        certificate,
        energy_shift,
        warnings,
        pass,
        written,
    })
}
