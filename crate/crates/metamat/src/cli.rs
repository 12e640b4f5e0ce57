//! Batch orchestration behind the `metamat` binary: load fields, design,
//! analyze, plan, and emit JSON reports.
//!
//! Every command is a plain function over a config/args struct so the
//! binary stays a thin argument parser. All reports carry a
//! `schema_version` field; artifact writing is single-threaded and
//! deterministic, so identical inputs produce byte-identical outputs.
//!
//! Exit-code contract (mapped by the binary): gates pass → 0, a gate fails
//! → 1, any error → 2.

use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{
    criterion_from_parts, dispersion_report, refraction_derivative, DispersionError,
    DispersionModel, DispersionReportRow,
};
use crate::fields::{
    load_density, load_field, save_density, save_field, DensityField, FieldError, FrequencyGrid,
    MediumConstants, SampledField,
};
use crate::inversion::{design_material, InversionError, SampleDiagnostics};
use crate::placement::{plan_embedding, verify_manifest, EmbeddingManifest, PlacementError};

/// Version stamp on every JSON report this module writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_string(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Design-run configuration: a JSON file plus optional flag overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub n0sq_descriptor: PathBuf,
    pub n0sq_values: PathBuf,
    pub nsq_descriptor: PathBuf,
    pub nsq_values: PathBuf,
    pub wave_speed: f64,
    #[serde(default = "default_rho_target")]
    pub rho_target: f64,
    pub radius_a: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Defaults to the voxel edge when voxels are cubic.
    #[serde(default)]
    pub cube_side: Option<f64>,
    #[serde(default = "default_absorption_threshold")]
    pub absorption_threshold: f64,
    pub output_dir: PathBuf,
}

fn default_rho_target() -> f64 {
    crate::inversion::RHO_TARGET_DEFAULT
}

fn default_kappa() -> f64 {
    1.0
}

fn default_absorption_threshold() -> f64 {
    crate::dispersion::ABSORPTION_THRESHOLD_DEFAULT
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|source| CliError::Json { path: path.to_path_buf(), source })
    }
}

/// Per-frequency criterion summary over all voxels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriterionSummaryRow {
    pub omega: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// criterion holds at every voxel (max_value < −1)
    pub holds_everywhere: bool,
}

/// Per-frequency worst-case absorption ratio over all voxels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AbsorptionSummaryRow {
    pub omega: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Embedding summary recorded in the design report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub cubes: usize,
    pub total_balls: u64,
    pub radius_a: f64,
    pub spacing_d: f64,
    pub cube_side: f64,
    pub total_deviation: f64,
    pub deviation_bound: f64,
    pub spacing_ok: bool,
    pub verify_passes: bool,
}

/// Machine-readable record of one design run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignReport {
    pub schema_version: u32,
    pub rho_target: f64,
    pub rho_max_used: f64,
    pub max_residual: f64,
    pub residuals_pass: bool,
    pub samples: Vec<SampleDiagnostics>,
    /// Empty when the band has fewer than two frequencies (no ∂/∂ω).
    pub criterion: Vec<CriterionSummaryRow>,
    pub absorption: Vec<AbsorptionSummaryRow>,
    pub manifest_summary: ManifestSummary,
}

/// Result of `design`: the report, the written artifact paths, and the
/// gate verdict (round-trip residuals).
#[derive(Debug)]
pub struct DesignOutcome {
    pub report: DesignReport,
    pub artifacts: Vec<PathBuf>,
    pub gates_pass: bool,
}

fn resolve_cube_side(config: &RunConfig, grid_spacing: [f64; 3]) -> Result<f64, CliError> {
    if let Some(side) = config.cube_side {
        return Ok(side);
    }
    let [sx, sy, sz] = grid_spacing;
    let cubic = (sx - sy).abs() <= 1e-12 * sx.max(sy) && (sx - sz).abs() <= 1e-12 * sx.max(sz);
    if cubic {
        Ok(sx)
    } else {
        Err(CliError::Config(
            "cube_side is required when voxels are not cubic".into(),
        ))
    }
}

/// Per-voxel principal square roots n(x,ω) = √(n²(x,ω)), Re n ≥ 0.
fn refraction_per_voxel(nsq: &SampledField) -> Result<Vec<Vec<Complex64>>, CliError> {
    let nf = nsq.freqs().len();
    let omegas = nsq.freqs().samples();
    let mut per_voxel = Vec::with_capacity(nsq.grid().voxel_count());
    for voxel in 0..nsq.grid().voxel_count() {
        let mut row = Vec::with_capacity(nf);
        for (f, &omega) in omegas.iter().enumerate() {
            let value = nsq.at(voxel, f);
            if value.im == 0.0 && value.re < 0.0 {
                return Err(CliError::Dispersion(DispersionError::BranchAmbiguity { omega }));
            }
            row.push(value.sqrt());
        }
        per_voxel.push(row);
    }
    Ok(per_voxel)
}

/// Runs the full pipeline: ingest → design → analyze → plan → artifacts.
///
/// Writes the impedance field, density field, manifest (JSON + geometry
/// CSV), and the design report into `output_dir`. The gate is the
/// round-trip residual check; capacity and sign violations surface as
/// errors.
pub fn cmd_design(config: &RunConfig) -> Result<DesignOutcome, CliError> {
    info!("loading fields");
    let n0sq = load_field(&config.n0sq_descriptor, &config.n0sq_values)?;
    let nsq = load_field(&config.nsq_descriptor, &config.nsq_values)?;
    let medium = MediumConstants::new(config.wave_speed)?;

    info!("designing material (rho target {})", config.rho_target);
    let (plan, inv_report) = design_material(&n0sq, &nsq, &medium, config.rho_target)?;

    let cube_side = resolve_cube_side(config, n0sq.grid().spacing())?;
    debug!("planning embedding with cube side {cube_side}");
    let manifest = plan_embedding(
        &plan.density,
        &plan.impedance,
        config.radius_a,
        config.kappa,
        cube_side,
    )?;
    let verification = verify_manifest(&manifest, &plan.density)?;

    // Frequency-dependence analysis of the target: per-voxel tabulated
    // models over the band.
    let omegas = nsq.freqs().samples().to_vec();
    let diameter = nsq.grid().domain_diameter();
    let refraction = refraction_per_voxel(&nsq)?;

    let mut criterion = Vec::new();
    if omegas.len() >= 2 {
        let models: Vec<DispersionModel> = refraction
            .iter()
            .map(|row| DispersionModel::tabulated(omegas.clone(), row.clone()))
            .collect::<Result<_, _>>()?;
        for (f, &omega) in omegas.iter().enumerate() {
            let mut min_value = f64::INFINITY;
            let mut max_value = f64::NEG_INFINITY;
            for (voxel, model) in models.iter().enumerate() {
                let n_re = refraction[voxel][f].re;
                let dn = refraction_derivative(model, omega)?;
                let result = criterion_from_parts(omega, n_re, dn.value)?;
                min_value = min_value.min(result.value);
                max_value = max_value.max(result.value);
            }
            criterion.push(CriterionSummaryRow {
                omega,
                min_value,
                max_value,
                holds_everywhere: max_value < -1.0,
            });
        }
    }

    let absorption: Vec<AbsorptionSummaryRow> = omegas
        .iter()
        .enumerate()
        .map(|(f, &omega)| {
            let max_ratio = refraction
                .iter()
                .map(|row| diameter * row[f].im.abs())
                .fold(0.0f64, f64::max);
            AbsorptionSummaryRow {
                omega,
                max_ratio,
                pass: max_ratio < config.absorption_threshold,
            }
        })
        .collect();

    let report = DesignReport {
        schema_version: SCHEMA_VERSION,
        rho_target: config.rho_target,
        rho_max_used: plan.rho_max_used,
        max_residual: inv_report.max_residual,
        residuals_pass: inv_report.residuals_pass,
        samples: inv_report.samples,
        criterion,
        absorption,
        manifest_summary: ManifestSummary {
            cubes: manifest.cubes.len(),
            total_balls: manifest.total_balls(),
            radius_a: manifest.radius_a,
            spacing_d: manifest.spacing_d,
            cube_side: manifest.cube_side,
            total_deviation: verification.total_deviation,
            deviation_bound: verification.deviation_bound,
            spacing_ok: verification.spacing_ok,
            verify_passes: verification.passes(),
        },
    };

    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.clone(), source })?;
    let artifact = |name: &str| out.join(name);
    let mut artifacts = Vec::new();

    save_field(&plan.impedance, &artifact("h_field.json"), &artifact("h_field.csv"))?;
    artifacts.push(artifact("h_field.json"));
    artifacts.push(artifact("h_field.csv"));
    save_density(&plan.density, &artifact("density.json"), &artifact("density.csv"))?;
    artifacts.push(artifact("density.json"));
    artifacts.push(artifact("density.csv"));
    manifest.save(&artifact("manifest.json"))?;
    artifacts.push(artifact("manifest.json"));
    write_string(&artifact("manifest_geometry.csv"), &manifest.geometry_csv())?;
    artifacts.push(artifact("manifest_geometry.csv"));
    write_string(&artifact("design_report.json"), &to_pretty_json(&report))?;
    artifacts.push(artifact("design_report.json"));

    let gates_pass = report.residuals_pass;
    info!(
        "design complete: {} balls in {} cubes, max residual {:.3e}",
        report.manifest_summary.total_balls,
        report.manifest_summary.cubes,
        report.max_residual
    );
    Ok(DesignOutcome { report, artifacts, gates_pass })
}

/// Dispersion model selection for `dispersion`.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// n(ω) = 1/(1 + c·ω²)
    InverseQuadratic { coefficient: f64 },
    /// CSV table `omega,re,im`
    Tabulated { path: PathBuf },
}

impl ModelSpec {
    pub fn build(&self) -> Result<DispersionModel, CliError> {
        match self {
            Self::InverseQuadratic { coefficient } => {
                Ok(DispersionModel::inverse_quadratic(*coefficient)?)
            }
            Self::Tabulated { path } => {
                let text = read_to_string(path)?;
                let mut lines = text.lines();
                match lines.next() {
                    Some(header) if header.trim() == "omega,re,im" => {}
                    other => {
                        return Err(CliError::Config(format!(
                            "{}: expected header \"omega,re,im\", got {:?}",
                            path.display(),
                            other.unwrap_or("")
                        )))
                    }
                }
                let mut omegas = Vec::new();
                let mut values = Vec::new();
                for (i, line) in lines.enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.len() != 3 {
                        return Err(CliError::Config(format!(
                            "{}: row {} has {} columns, expected 3",
                            path.display(),
                            i + 1,
                            fields.len()
                        )));
                    }
                    let parse = |tok: &str, what: &str| {
                        tok.trim().parse::<f64>().map_err(|_| {
                            CliError::Config(format!(
                                "{}: row {}: cannot parse {what} from {tok:?}",
                                path.display(),
                                i + 1
                            ))
                        })
                    };
                    omegas.push(parse(fields[0], "omega")?);
                    values.push(Complex64::new(
                        parse(fields[1], "re")?,
                        parse(fields[2], "im")?,
                    ));
                }
                Ok(DispersionModel::tabulated(omegas, values)?)
            }
        }
    }
}

/// Arguments for `dispersion`.
#[derive(Debug, Clone)]
pub struct DispersionArgs {
    pub model: ModelSpec,
    pub band_min: f64,
    pub band_max: f64,
    pub band_samples: usize,
    /// Domain diameter L used in the absorption ratio.
    pub diameter: f64,
    pub absorption_threshold: f64,
    /// Gate on the criterion holding across the whole band.
    pub require_negative: bool,
    pub output_dir: PathBuf,
}

/// Wrapper around the per-ω rows written to `dispersion_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReportFile {
    pub schema_version: u32,
    pub require_negative: bool,
    pub all_hold: bool,
    pub absorption_threshold: f64,
    pub absorption_all_pass: bool,
    pub rows: Vec<DispersionReportRow>,
}

#[derive(Debug)]
pub struct DispersionOutcome {
    pub report: DispersionReportFile,
    pub report_path: PathBuf,
    pub gates_pass: bool,
}

/// Evaluates the per-ω dispersion report over a band and writes it.
/// With `require_negative`, the gate is the criterion holding at every
/// sampled frequency.
pub fn cmd_dispersion(args: &DispersionArgs) -> Result<DispersionOutcome, CliError> {
    let model = args.model.build()?;
    let band = FrequencyGrid::linspace(args.band_min, args.band_max, args.band_samples)?;
    let rows = dispersion_report(&model, &band, args.diameter)?;
    let all_hold = rows.iter().all(|r| r.criterion_holds);
    let absorption_all_pass = rows.iter().all(|r| r.absorption_ratio < args.absorption_threshold);

    let report = DispersionReportFile {
        schema_version: SCHEMA_VERSION,
        require_negative: args.require_negative,
        all_hold,
        absorption_threshold: args.absorption_threshold,
        absorption_all_pass,
        rows,
    };
    fs::create_dir_all(&args.output_dir)
        .map_err(|source| CliError::Io { path: args.output_dir.clone(), source })?;
    let report_path = args.output_dir.join("dispersion_report.json");
    write_string(&report_path, &to_pretty_json(&report))?;

    let gates_pass = !args.require_negative || all_hold;
    Ok(DispersionOutcome { report, report_path, gates_pass })
}

/// Verification report file for `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReportFile {
    pub schema_version: u32,
    pub manifest: PathBuf,
    pub total_integral: f64,
    pub total_count_mass: f64,
    pub total_deviation: f64,
    pub deviation_bound: f64,
    pub within_bound: bool,
    pub spacing_ok: bool,
    pub counts_match: bool,
    pub min_spacing: Option<f64>,
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub report: VerifyReportFile,
    pub report_path: PathBuf,
    pub gates_pass: bool,
}

/// Re-checks a manifest against a density field: count mass vs integral
/// within the rounding bound, ball counts, and pairwise spacing.
pub fn cmd_verify(
    manifest_path: &Path,
    density_descriptor: &Path,
    density_values: &Path,
    output_dir: &Path,
) -> Result<VerifyOutcome, CliError> {
    let manifest = EmbeddingManifest::load(manifest_path)?;
    let density: DensityField = load_density(density_descriptor, density_values)?;
    let verification = verify_manifest(&manifest, &density)?;

    let report = VerifyReportFile {
        schema_version: SCHEMA_VERSION,
        manifest: manifest_path.to_path_buf(),
        total_integral: verification.total_integral,
        total_count_mass: verification.total_count_mass,
        total_deviation: verification.total_deviation,
        deviation_bound: verification.deviation_bound,
        within_bound: verification.within_bound,
        spacing_ok: verification.spacing_ok,
        counts_match: verification.counts_match,
        min_spacing: verification.min_spacing,
    };
    fs::create_dir_all(output_dir)
        .map_err(|source| CliError::Io { path: output_dir.to_path_buf(), source })?;
    let report_path = output_dir.join("verify_report.json");
    write_string(&report_path, &to_pretty_json(&report))?;

    let gates_pass = verification.passes();
    Ok(VerifyOutcome { report, report_path, gates_pass })
}

/// Renders a saved design report as a human-readable summary; the gate
/// re-evaluates the recorded verdicts.
pub fn cmd_report(report_path: &Path) -> Result<(String, bool), CliError> {
    let text = read_to_string(report_path)?;
    let report: DesignReport = serde_json::from_str(&text)
        .map_err(|source| CliError::Json { path: report_path.to_path_buf(), source })?;

    let mut out = String::new();
    use std::fmt::Write as _;
    writeln!(out, "design report (schema v{})", report.schema_version).unwrap();
    writeln!(
        out,
        "  inversion: rho target {} (max used {:.6}), max residual {:.3e} [{}]",
        report.rho_target,
        report.rho_max_used,
        report.max_residual,
        if report.residuals_pass { "pass" } else { "FAIL" }
    )
    .unwrap();
    if report.criterion.is_empty() {
        writeln!(out, "  criterion: not evaluated (fewer than two frequencies)").unwrap();
    } else {
        let bands_hold = report.criterion.iter().all(|r| r.holds_everywhere);
        writeln!(
            out,
            "  negative refraction: {} across {} frequencies",
            if bands_hold { "holds" } else { "does not hold everywhere" },
            report.criterion.len()
        )
        .unwrap();
        for row in &report.criterion {
            writeln!(
                out,
                "    omega {:>10.4}: value in [{:.4}, {:.4}] {}",
                row.omega,
                row.min_value,
                row.max_value,
                if row.holds_everywhere { "(holds)" } else { "" }
            )
            .unwrap();
        }
    }
    let absorption_ok = report.absorption.iter().all(|r| r.pass);
    writeln!(
        out,
        "  absorption: {} ({} frequencies)",
        if absorption_ok { "pass" } else { "FAIL" },
        report.absorption.len()
    )
    .unwrap();
    let m = &report.manifest_summary;
    writeln!(
        out,
        "  embedding: {} balls in {} cubes, a = {:.4e}, d = {:.4e}, deviation {:.3e} (bound {:.3e}) [{}]",
        m.total_balls,
        m.cubes,
        m.radius_a,
        m.spacing_d,
        m.total_deviation,
        m.deviation_bound,
        if m.verify_passes { "pass" } else { "FAIL" }
    )
    .unwrap();

    let gates_pass = report.residuals_pass && m.verify_passes;
    Ok((out, gates_pass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SpatialGrid;

    fn write_target_fields(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
        let grid = SpatialGrid::new([0.0; 3], [0.25; 3], [4, 4, 4]).unwrap();
        let freqs = FrequencyGrid::linspace(1.0, 2.0, 8).unwrap();
        let n0sq = SampledField::constant(grid, freqs.clone(), Complex64::new(1.0, 0.0)).unwrap();
        // target n = 1/(1 + 2ω²) so the criterion holds on [1, 2]
        let omegas = freqs.samples().to_vec();
        let nsq = SampledField::from_fn(grid, freqs, |_, f| {
            let n = 1.0 / (1.0 + 2.0 * omegas[f] * omegas[f]);
            Complex64::new(n * n, 0.0)
        })
        .unwrap();
        let paths = (
            dir.join("n0sq.json"),
            dir.join("n0sq.csv"),
            dir.join("nsq.json"),
            dir.join("nsq.csv"),
        );
        save_field(&n0sq, &paths.0, &paths.1).unwrap();
        save_field(&nsq, &paths.2, &paths.3).unwrap();
        paths
    }

    fn config_for(dir: &Path) -> RunConfig {
        let (n0d, n0v, nd, nv) = write_target_fields(dir);
        RunConfig {
            n0sq_descriptor: n0d,
            n0sq_values: n0v,
            nsq_descriptor: nd,
            nsq_values: nv,
            wave_speed: 1.0,
            rho_target: 0.5,
            radius_a: 0.002,
            kappa: 1.0,
            cube_side: Some(0.25),
            absorption_threshold: 0.1,
            output_dir: dir.join("out"),
        }
    }

    #[test]
    fn design_pipeline_produces_artifacts_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_for(dir.path());
        let outcome = cmd_design(&config).unwrap();
        assert!(outcome.gates_pass);
        assert!(outcome.report.residuals_pass);
        assert!(outcome.report.max_residual < 1e-10);
        assert!(outcome.report.criterion.iter().all(|r| r.holds_everywhere));
        assert!(outcome.report.manifest_summary.verify_passes);
        for artifact in &outcome.artifacts {
            assert!(artifact.exists(), "missing {artifact:?}");
        }
    }

    #[test]
    fn design_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = config_for(dir.path());
        cmd_design(&config).unwrap();
        let first: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                let bytes = fs::read(&p).unwrap();
                (p, bytes)
            })
            .collect();
        config.output_dir = dir.path().join("out2");
        cmd_design(&config).unwrap();
        for (path, bytes) in first {
            let twin = dir.path().join("out2").join(path.file_name().unwrap());
            assert_eq!(fs::read(&twin).unwrap(), bytes, "artifact {twin:?} differs");
        }
    }

    #[test]
    fn identity_target_designs_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = config_for(dir.path());
        config.nsq_descriptor = config.n0sq_descriptor.clone();
        config.nsq_values = config.n0sq_values.clone();
        let outcome = cmd_design(&config).unwrap();
        assert!(outcome.gates_pass);
        assert_eq!(outcome.report.manifest_summary.total_balls, 0);
        assert_eq!(outcome.report.max_residual, 0.0);
    }

    #[test]
    fn positive_im_p_is_rejected_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = config_for(dir.path());
        // target with Im n² < 0 makes Im p = −Im(n²)·k² > 0
        let grid = SpatialGrid::new([0.0; 3], [0.25; 3], [4, 4, 4]).unwrap();
        let freqs = FrequencyGrid::linspace(1.0, 2.0, 8).unwrap();
        let bad = SampledField::constant(grid, freqs, Complex64::new(0.5, -0.1)).unwrap();
        let paths = (dir.path().join("bad.json"), dir.path().join("bad.csv"));
        save_field(&bad, &paths.0, &paths.1).unwrap();
        config.nsq_descriptor = paths.0;
        config.nsq_values = paths.1;
        let err = cmd_design(&config).unwrap_err();
        assert!(err.to_string().contains("voxel 0"));
    }

    #[test]
    fn dispersion_command_gates_on_band() {
        let dir = tempfile::tempdir().unwrap();
        let args = DispersionArgs {
            model: ModelSpec::InverseQuadratic { coefficient: 2.0 },
            band_min: 1.0,
            band_max: 3.0,
            band_samples: 9,
            diameter: 1.0,
            absorption_threshold: 0.1,
            require_negative: true,
            output_dir: dir.path().to_path_buf(),
        };
        let outcome = cmd_dispersion(&args).unwrap();
        assert!(outcome.gates_pass);
        assert!(outcome.report_path.exists());

        let args = DispersionArgs {
            model: ModelSpec::InverseQuadratic { coefficient: 0.5 },
            ..args
        };
        let outcome = cmd_dispersion(&args).unwrap();
        assert!(!outcome.gates_pass);
    }

    #[test]
    fn tabulated_model_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("n.csv");
        fs::write(&table, "omega,re,im\n1.0,1.0,0.0\n2.0,1.0,0.0\n3.0,1.0,0.0\n").unwrap();
        let args = DispersionArgs {
            model: ModelSpec::Tabulated { path: table },
            band_min: 1.0,
            band_max: 3.0,
            band_samples: 5,
            diameter: 2.0,
            absorption_threshold: 0.1,
            require_negative: false,
            output_dir: dir.path().to_path_buf(),
        };
        let outcome = cmd_dispersion(&args).unwrap();
        assert!(outcome.gates_pass);
        assert!(outcome.report.rows.iter().all(|r| r.criterion_value == 0.0));
    }

    #[test]
    fn verify_command_round_trip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_for(dir.path());
        cmd_design(&config).unwrap();
        let out = config.output_dir.clone();
        let outcome = cmd_verify(
            &out.join("manifest.json"),
            &out.join("density.json"),
            &out.join("density.csv"),
            &dir.path().join("verify_out"),
        )
        .unwrap();
        assert!(outcome.gates_pass);

        // delete one ball from a nonempty cube
        let mut manifest = EmbeddingManifest::load(&out.join("manifest.json")).unwrap();
        let cube = manifest.cubes.iter_mut().find(|c| !c.balls.is_empty()).unwrap();
        cube.balls.pop();
        let tampered = dir.path().join("tampered.json");
        manifest.save(&tampered).unwrap();
        let outcome = cmd_verify(
            &tampered,
            &out.join("density.json"),
            &out.join("density.csv"),
            &dir.path().join("verify_out2"),
        )
        .unwrap();
        assert!(!outcome.gates_pass);
    }

    #[test]
    fn report_command_summarizes() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_for(dir.path());
        cmd_design(&config).unwrap();
        let (text, pass) = cmd_report(&config.output_dir.join("design_report.json")).unwrap();
        assert!(pass);
        assert!(text.contains("negative refraction: holds"));
        assert!(text.contains("embedding:"));
    }
}
