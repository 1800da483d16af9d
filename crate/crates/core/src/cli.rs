//! Command-line surface: `solve`, `certify`, `sweep` and `example`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::certificate::{certify_system, CertificateError, DEFAULT_CURVE_SAMPLES};
use crate::feeder::{parse_feeder, FeederError, FeederFile, VectorFile};
use crate::loads::LoadSet;
use crate::network::NetworkModel;
use crate::reference::{three_node, two_node, ReferenceError, ThreeNodeParams, TwoNodeParams};
use crate::report::{CertReport, SolveReport};
use crate::solver::{empirical_rate, solve, InitialVoltage, LambdaChoice, SolveConfig, SolveError};
use crate::system::{SystemError, SystemMatrices};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "zbuscert",
    version,
    about = "Z-Bus load flow and contraction certificates for three-phase feeders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Z-Bus iteration. Exit 0 converged, 2 not converged, 1 input error.
    Solve(SolveArgs),
    /// Compute the certified radius interval. Exit 0 feasible, 3 infeasible, 1 input error.
    Certify(CertifyArgs),
    /// Scale constant-power and constant-current loads and tabulate certificate and solve results.
    Sweep(SweepArgs),
    /// Print a built-in example feeder.
    #[command(subcommand)]
    Example(ExampleCommand),
}

#[derive(Debug, Args)]
pub struct SolveOptions {
    /// identity | diag-w | file:<path>
    #[arg(long, default_value = "identity")]
    pub lambda: String,
    /// no-load | flat | file:<path>
    #[arg(long, default_value = "no-load")]
    pub init: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub feeder: PathBuf,
    #[command(flatten)]
    pub options: SolveOptions,
    /// Write the iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    pub feeder: PathBuf,
    /// identity | diag-w | file:<path>
    #[arg(long, default_value = "identity")]
    pub lambda: String,
    #[arg(long, default_value_t = DEFAULT_CURVE_SAMPLES)]
    pub curve_samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub feeder: PathBuf,
    /// start:stop:step multiplying every constant-power and constant-current load
    #[arg(long)]
    pub scale: String,
    #[command(flatten)]
    pub options: SolveOptions,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExampleCommand {
    /// Single wye node behind an ideal line with identical ZIP loads on each phase.
    TwoNode {
        #[arg(long, allow_hyphen_values = true)]
        s_l: f64,
        #[arg(long, default_value_t = 0.5)]
        y_t: f64,
        #[arg(long, default_value_t = 0.5)]
        y_l: f64,
        #[arg(long, default_value_t = 0.5)]
        i_l: f64,
    },
    /// Two wye nodes with coupled line blocks and loads scaled by theta.
    ThreeNode {
        #[arg(long)]
        theta: f64,
    },
}

pub fn parse_lambda(spec: &str) -> Result<LambdaChoice, CliError> {
    match spec {
        "identity" => Ok(LambdaChoice::Identity),
        "diag-w" => Ok(LambdaChoice::DiagW),
        other => match other.strip_prefix("file:") {
            Some(path) => Ok(LambdaChoice::Custom(VectorFile::read(Path::new(path))?)),
            None => Err(CliError::Argument(format!(
                "--lambda expects identity, diag-w or file:<path>, got {other:?}"
            ))),
        },
    }
}

pub fn parse_init(spec: &str) -> Result<InitialVoltage, CliError> {
    match spec {
        "no-load" => Ok(InitialVoltage::NoLoad),
        "flat" => Ok(InitialVoltage::Flat),
        other => match other.strip_prefix("file:") {
            Some(path) => Ok(InitialVoltage::Custom(VectorFile::read(Path::new(path))?)),
            None => Err(CliError::Argument(format!(
                "--init expects no-load, flat or file:<path>, got {other:?}"
            ))),
        },
    }
}

impl SolveOptions {
    fn config(&self) -> Result<SolveConfig, CliError> {
        Ok(SolveConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            initial: parse_init(&self.init)?,
            lambda: parse_lambda(&self.lambda)?,
            ..SolveConfig::default()
        })
    }
}

/// Scale factors `start + k step` up to `stop` (inclusive within roundoff).
/// A step larger than the range yields the single value `start`.
pub fn parse_scale(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Argument(format!("--scale expects start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(CliError::Argument(format!(
            "--scale needs finite start <= stop and step > 0, got {spec:?}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| round12(start + k as f64 * step))
        .collect())
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Write {
            path: p.display().to_string(),
            source,
        }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn load(path: &Path) -> Result<(NetworkModel, LoadSet, SystemMatrices), CliError> {
    let (network, loads) = parse_feeder(path)?;
    let system = SystemMatrices::new(&network, &loads)?;
    Ok((network, loads, system))
}

pub fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = args.options.config()?;
    let (network, loads, system) = load(&args.feeder)?;
    let trace = solve(&network, &system, &loads, &cfg)?;
    if let Some(path) = &args.trace {
        write_output(Some(path), &trace.to_csv(), stdout)?;
    }
    let report = SolveReport::new(&network, &trace, &cfg);
    write_output(args.out.as_deref(), &report.to_json(), stdout)?;
    Ok(if report.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_certify(args: &CertifyArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let lambda = parse_lambda(&args.lambda)?;
    let (network, loads, system) = load(&args.feeder)?;
    let result = certify_system(&network, &system, &loads, &lambda, args.curve_samples)?;
    let report = CertReport::new(&result, lambda.label(), args.curve_samples);
    write_output(args.out.as_deref(), &report.to_json(), stdout)?;
    Ok(if report.feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

pub const SWEEP_HEADER: &str =
    "theta,feasible,r_min,r_max,alpha_at_rmin,solve_status,iters,empirical_rate";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_table(
    network: &NetworkModel,
    loads: &LoadSet,
    scales: &[f64],
    cfg: &SolveConfig,
) -> Result<String, CliError> {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for &theta in scales {
        let scaled = loads.scaled(theta);
        let system = SystemMatrices::new(network, &scaled)?;
        let cert = certify_system(network, &system, &scaled, &cfg.lambda, 2)?;
        let trace = solve(network, &system, &scaled, cfg)?;
        out.push_str(&format!(
            "{theta},{},{},{},{},{},{},{}\n",
            cert.feasible,
            opt(cert.r_min),
            opt(cert.r_max),
            opt(cert.alpha_at_rmin),
            trace.status.label(),
            trace.iterations(),
            opt(empirical_rate(&trace).ok()),
        ));
    }
    Ok(out)
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let scales = parse_scale(&args.scale)?;
    let cfg = args.options.config()?;
    let (network, loads) = parse_feeder(&args.feeder)?;
    let table = sweep_table(&network, &loads, &scales, &cfg)?;
    write_output(args.out.as_deref(), &table, stdout)?;
    Ok(EXIT_OK)
}

pub fn cmd_example(cmd: &ExampleCommand, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let (network, loads) = match *cmd {
        ExampleCommand::TwoNode { s_l, y_t, y_l, i_l } => {
            two_node(&TwoNodeParams { y_t, y_l, i_l, s_l })?
        }
        ExampleCommand::ThreeNode { theta } => three_node(&ThreeNodeParams { theta })?,
    };
    write_output(
        None,
        &FeederFile::from_model(&network, &loads, None).emit(),
        stdout,
    )?;
    Ok(EXIT_OK)
}

/// Runs a parsed command; errors go to `stderr` and map to exit code 1.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Certify(a) => cmd_certify(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Example(c) => cmd_example(c, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

/// Parses `args` (including the program name) and runs; usage errors exit 1.
pub fn run_from_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, stdout, stderr),
        Err(e) => {
            let _ = write!(stderr, "{e}");
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INPUT,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_ranges() {
        assert_eq!(parse_scale("0.02:0.16:0.02").unwrap().len(), 8);
        assert_eq!(parse_scale("0.02:0.16:0.02").unwrap()[2], 0.06);
        assert_eq!(parse_scale("0.5:0.6:1").unwrap(), vec![0.5]);
        assert_eq!(parse_scale("1:1:0.1").unwrap(), vec![1.0]);
        assert!(parse_scale("1:0:0.1").is_err());
        assert!(parse_scale("0:1:0").is_err());
        assert!(parse_scale("0:1").is_err());
        assert!(parse_scale("a:1:1").is_err());
    }

    #[test]
    fn lambda_and_init_specs() {
        assert_eq!(parse_lambda("identity").unwrap(), LambdaChoice::Identity);
        assert_eq!(parse_lambda("diag-w").unwrap(), LambdaChoice::DiagW);
        assert!(parse_lambda("nope").is_err());
        assert!(parse_lambda("file:/nonexistent/x.json").is_err());
        assert_eq!(parse_init("flat").unwrap(), InitialVoltage::Flat);
        assert!(parse_init("cold").is_err());
    }

    #[test]
    fn usage_error_is_input_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(
            run_from_args(["zbuscert", "frobnicate"], &mut out, &mut err),
            EXIT_INPUT
        );
    }

    #[test]
    fn example_accepts_negative_s_l() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_from_args(
            ["zbuscert", "example", "two-node", "--s-l", "-0.5"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, EXIT_OK, "{}", String::from_utf8_lossy(&err));
        assert!(String::from_utf8(out)
            .unwrap()
            .contains("\"schema_version\": \"1\""));
    }
}
