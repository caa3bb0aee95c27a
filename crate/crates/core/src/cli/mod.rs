//! The `geoequiv` command line.
//!
//! Exit codes: 0 success or pass, 1 usage or I/O error, 2 verification fail,
//! 3 inconclusive, 4 model validation error.

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::constructors::{generate, ConstructError, GENERATORS};
use crate::geometry::{classify_distribution, GeometryModel, Metric, ModelError};
use crate::hamiltonian::{integrate, CovectorPoint, HamiltonianError, IntegratorConfig};
use crate::pair::{PairError, CLUSTER_TOL, DIVISIBILITY_TOL};
use crate::verifier::{verify_equivalence, VerifyConfig, VerifyError};

pub use report::{Report, SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "geoequiv", version, about = "Geodesically equivalent metric pairs on corank-1 distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ModelArg {
    /// Model manifest (JSON).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, clap::Args)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a metric pair in one of the classified normal forms.
    Generate {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(GENERATORS))]
        kind: String,
        /// JSON parameter file; defaults give a working example.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Manifest destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Spectrum, regularity, divisibility and relation residuals at a point.
    Analyze {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
        /// Radius of the regularity ball.
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        #[arg(long, default_value_t = DIVISIBILITY_TOL)]
        tol: f64,
        #[arg(long, default_value_t = CLUSTER_TOL)]
        cluster_tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Integrate one normal extremal.
    Geodesic {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        metric: u8,
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        q: Vec<f64>,
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        p: Vec<f64>,
        #[arg(long = "T", default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-2)]
        max_step: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Numerically certify geodesic equivalence of the pair.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "T", default_value_t = 0.3)]
        t: f64,
        /// Curve tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1e-10)]
        integrator_tol: f64,
        #[arg(long, default_value_t = 1e-2)]
        max_step: f64,
        /// Half-angle (radians) of the excluded cone around the abnormal direction.
        #[arg(long, default_value_t = 0.1)]
        exclude_abnormal_cone: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Divisibility conditions and relation residuals over the probe grid or given points.
    CheckRelations {
        #[command(flatten)]
        model: ModelArg,
        /// Single point; the probe grid of the domain when absent.
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
        at: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DIVISIBILITY_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = if matches!(e, ModelError::Io(_)) { 1 } else { 4 };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConstructError> for CliError {
    fn from(e: ConstructError) -> Self {
        match e {
            ConstructError::Model(m) => m.into(),
            ConstructError::UnknownKind(_) => CliError::usage(e.to_string()),
            other => CliError {
                code: 4,
                message: other.to_string(),
            },
        }
    }
}

impl From<PairError> for CliError {
    fn from(e: PairError) -> Self {
        match e {
            PairError::Model(m) => m.into(),
            other => CliError::usage(other.to_string()),
        }
    }
}

impl From<HamiltonianError> for CliError {
    fn from(e: HamiltonianError) -> Self {
        match e {
            HamiltonianError::Model(m) => m.into(),
            other => CliError::usage(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Pair(p) => p.into(),
            VerifyError::Hamiltonian(h) => h.into(),
            other => CliError::usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

fn load(arg: &ModelArg) -> Result<GeometryModel, CliError> {
    GeometryModel::load(&arg.model).map_err(|e| match e {
        ModelError::Io(io) => CliError::usage(format!("{}: {io}", arg.model.display())),
        other => CliError {
            code: 4,
            message: format!("{}: {other}", arg.model.display()),
        },
    })
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(CliError::from),
    }
}

fn check_positive(pairs: &[(&str, f64)]) -> Result<(), CliError> {
    for (name, v) in pairs {
        if !(*v > 0.0) {
            return Err(CliError::usage(format!("--{name} must be positive, found {v}")));
        }
    }
    Ok(())
}

fn report_text(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(report.to_json()),
        Format::Text => Ok(report.to_text()),
        Format::Csv => Err(CliError::usage("csv output is only available for `geodesic`")),
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Generate {
            kind,
            params,
            out,
            format,
        } => {
            let params_value: Value = match &params {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                    serde_json::from_str(&text).map_err(|e| CliError {
                        code: 4,
                        message: format!("{}: not valid JSON: {e}", path.display()),
                    })?
                }
                None => Value::Object(Default::default()),
            };
            let model = generate(&kind, &params_value)?;
            let manifest = model.to_json() + "\n";
            match out {
                None => emit(&manifest, None, stdout)?,
                Some(path) => {
                    emit(&manifest, Some(&path), stdout)?;
                    let report = Report::new(
                        "generate",
                        serde_json::json!({"kind": kind, "params": params_value, "out": path}),
                        serde_json::json!({"dim": model.dim(), "rank": model.rank(), "coords": model.coords()}),
                    );
                    emit(&report_text(&report, format.unwrap_or(Format::Text))?, None, stdout)?;
                }
            }
            Ok(0)
        }
        Command::Analyze {
            model,
            at,
            radius,
            tol,
            cluster_tol,
            output,
        } => {
            check_positive(&[("tol", tol), ("cluster-tol", cluster_tol), ("radius", radius)])?;
            let m = load(&model)?;
            let result = report::analyze(&m, &at, radius, tol, cluster_tol)?;
            let report = Report::new(
                "analyze",
                serde_json::json!({"model": model.model, "at": at, "radius": radius, "tol": tol, "cluster_tol": cluster_tol}),
                serde_json::to_value(&result).expect("analysis serialises"),
            );
            emit(&report_text(&report, output.format.unwrap_or(Format::Text))?, output.out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::Geodesic {
            model,
            metric,
            q,
            p,
            t,
            tol,
            max_step,
            output,
        } => {
            check_positive(&[("tol", tol), ("max-step", max_step)])?;
            let m = load(&model)?;
            let metric = Metric::from_tag(metric).expect("range checked by the parser");
            if q.len() != m.dim() || p.len() != m.dim() {
                return Err(CliError::usage(format!(
                    "--q and --p need {} components each, found {} and {}",
                    m.dim(),
                    q.len(),
                    p.len()
                )));
            }
            let cfg = IntegratorConfig {
                tol,
                max_step,
                ..Default::default()
            };
            let traj = integrate(&m, metric, &CovectorPoint::new(q.clone(), p.clone()), t, &cfg)?;
            let format = output.format.unwrap_or(Format::Csv);
            let text = match format {
                Format::Csv => traj.to_csv_string(),
                _ => {
                    let report = Report::new(
                        "geodesic",
                        serde_json::json!({"model": model.model, "metric": metric, "q": q, "p": p, "T": t, "integrator": cfg}),
                        serde_json::json!({
                            "samples": traj.len(),
                            "final_time": traj.final_time(),
                            "clipped": traj.clipped,
                            "energy_drift": traj.energy_drift(),
                            "end": traj.last(),
                            "trajectory": traj,
                        }),
                    );
                    report_text(&report, format)?
                }
            };
            emit(&text, output.out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::Verify {
            model,
            samples,
            seed,
            t,
            tol,
            integrator_tol,
            max_step,
            exclude_abnormal_cone,
            output,
        } => {
            check_positive(&[("T", t), ("tol", tol), ("integrator-tol", integrator_tol), ("max-step", max_step)])?;
            if samples == 0 {
                return Err(CliError::usage("--samples must be positive"));
            }
            let m = load(&model)?;
            let cfg = VerifyConfig {
                samples,
                seed,
                t,
                tol_curve: tol,
                integrator: IntegratorConfig {
                    tol: integrator_tol,
                    max_step,
                    ..Default::default()
                },
                abnormal_cone: exclude_abnormal_cone,
            };
            let rep = verify_equivalence(&m, &cfg)?;
            let code = rep.verdict.exit_code();
            let report = Report::new(
                "verify",
                serde_json::json!({"model": model.model, "verify": cfg}),
                serde_json::to_value(&rep).expect("report serialises"),
            );
            emit(&report_text(&report, output.format.unwrap_or(Format::Text))?, output.out.as_deref(), stdout)?;
            Ok(code)
        }
        Command::CheckRelations {
            model,
            at,
            seed,
            tol,
            output,
        } => {
            check_positive(&[("tol", tol)])?;
            let m = load(&model)?;
            let points = match &at {
                Some(q) => vec![q.clone()],
                None => m.domain().probe_points(seed),
            };
            let kind = classify_distribution(&m)?.kind;
            let result = report::check_relations(&m, &points, tol, kind)?;
            let report = Report::new(
                "check-relations",
                serde_json::json!({"model": model.model, "at": at, "seed": seed, "tol": tol, "points": points.len()}),
                serde_json::to_value(&result).expect("relations serialise"),
            );
            emit(&report_text(&report, output.format.unwrap_or(Format::Text))?, output.out.as_deref(), stdout)?;
            Ok(0)
        }
    }
}

/// Runs the command line with explicit streams and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
