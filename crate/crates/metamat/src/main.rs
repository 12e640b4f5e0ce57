//! Thin command-line front end; all work happens in the library's `cli`
//! module. Exit codes: 0 all gates pass, 1 a gate failed, 2 error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use metamat::cli::{
    cmd_design, cmd_dispersion, cmd_report, cmd_verify, DispersionArgs, ModelSpec, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "metamat",
    about = "Acoustic metamaterial inverse design: densities, impedances, dispersion analysis, embedding manifests",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full design pipeline from a JSON config
    Design(DesignCmd),
    /// Evaluate the negative-refraction criterion over a frequency band
    Dispersion(DispersionCmd),
    /// Re-check an embedding manifest against a density field
    Verify(VerifyCmd),
    /// Summarize a saved design report
    Report(ReportCmd),
}

#[derive(Args)]
struct DesignCmd {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the density-ratio target in (0, 1)
    #[arg(long, value_name = "F")]
    rho_target: Option<f64>,
    /// Override the ball radius a
    #[arg(long, value_name = "F")]
    radius_a: Option<f64>,
    /// Override the spacing factor in d = kappa * a^(1/3)
    #[arg(long, value_name = "F")]
    kappa: Option<f64>,
    /// Override the partition cube side
    #[arg(long, value_name = "F")]
    cube_side: Option<f64>,
    /// Override the absorption-ratio threshold
    #[arg(long, value_name = "F")]
    absorption_threshold: Option<f64>,
}

#[derive(Args)]
struct DispersionCmd {
    /// Model kind: "inverse-quadratic" or "tabulated"
    #[arg(long)]
    model: String,
    /// Coefficient c of n(omega) = 1/(1 + c omega^2) (inverse-quadratic)
    #[arg(long, value_name = "F")]
    coefficient: Option<f64>,
    /// CSV table "omega,re,im" (tabulated)
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
    /// Band lower edge (rad/s)
    #[arg(long, value_name = "F")]
    band_min: f64,
    /// Band upper edge (rad/s)
    #[arg(long, value_name = "F")]
    band_max: f64,
    /// Number of samples across the band
    #[arg(long, value_name = "N", default_value_t = 16)]
    band_samples: usize,
    /// Domain diameter L for the absorption ratio
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    diameter: f64,
    /// Absorption-ratio threshold
    #[arg(long, value_name = "F", default_value_t = 0.1)]
    absorption_threshold: f64,
    /// Exit nonzero unless the criterion holds across the whole band
    #[arg(long)]
    require_negative: bool,
    /// Output directory for the report
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyCmd {
    /// Manifest JSON produced by `design`
    #[arg(long)]
    manifest: PathBuf,
    /// Density grid descriptor (JSON)
    #[arg(long)]
    density_desc: PathBuf,
    /// Density values (CSV)
    #[arg(long)]
    density_values: PathBuf,
    /// Output directory for the report
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportCmd {
    /// Design report JSON to summarize
    #[arg(long)]
    report: PathBuf,
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Design(cmd) => {
            let mut config = RunConfig::from_file(&cmd.config)
                .with_context(|| format!("loading config {}", cmd.config.display()))?;
            if let Some(out) = cmd.out {
                config.output_dir = out;
            }
            if let Some(v) = cmd.rho_target {
                config.rho_target = v;
            }
            if let Some(v) = cmd.radius_a {
                config.radius_a = v;
            }
            if let Some(v) = cmd.kappa {
                config.kappa = v;
            }
            if let Some(v) = cmd.cube_side {
                config.cube_side = Some(v);
            }
            if let Some(v) = cmd.absorption_threshold {
                config.absorption_threshold = v;
            }
            let outcome = cmd_design(&config)?;
            println!(
                "design: {} balls in {} cubes, max residual {:.3e}, report {}",
                outcome.report.manifest_summary.total_balls,
                outcome.report.manifest_summary.cubes,
                outcome.report.max_residual,
                config.output_dir.join("design_report.json").display()
            );
            Ok(outcome.gates_pass)
        }
        Command::Dispersion(cmd) => {
            let model = match cmd.model.as_str() {
                "inverse-quadratic" => ModelSpec::InverseQuadratic {
                    coefficient: cmd
                        .coefficient
                        .context("--coefficient is required for inverse-quadratic")?,
                },
                "tabulated" => ModelSpec::Tabulated {
                    path: cmd.table.context("--table is required for tabulated")?,
                },
                other => bail!("unknown model {other:?}; use inverse-quadratic or tabulated"),
            };
            let outcome = cmd_dispersion(&DispersionArgs {
                model,
                band_min: cmd.band_min,
                band_max: cmd.band_max,
                band_samples: cmd.band_samples,
                diameter: cmd.diameter,
                absorption_threshold: cmd.absorption_threshold,
                require_negative: cmd.require_negative,
                output_dir: cmd.out,
            })?;
            println!(
                "dispersion: criterion {} over the band, report {}",
                if outcome.report.all_hold { "holds" } else { "does not hold" },
                outcome.report_path.display()
            );
            Ok(outcome.gates_pass)
        }
        Command::Verify(cmd) => {
            let outcome = cmd_verify(&cmd.manifest, &cmd.density_desc, &cmd.density_values, &cmd.out)?;
            println!(
                "verify: deviation {:.3e} (bound {:.3e}), spacing {}, report {}",
                outcome.report.total_deviation,
                outcome.report.deviation_bound,
                if outcome.report.spacing_ok { "ok" } else { "VIOLATED" },
                outcome.report_path.display()
            );
            Ok(outcome.gates_pass)
        }
        Command::Report(cmd) => {
            let (text, gates_pass) = cmd_report(&cmd.report)?;
            print!("{text}");
            Ok(gates_pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("METAMAT_LOG", "warn")).init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
