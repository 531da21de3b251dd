//! Command-line front end for the `iokraus` library.
//!
//! Exit codes are a stable contract: 0 success, 1 usage or I/O error,
//! 2 channel not incoherent, 3 invalid channel.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use iokraus::canonical::CanonicalIO4;
use iokraus::channel::{self, BlochVector, ChannelJson, IncoherencePattern, QubitChannel};
use iokraus::classify::{self, ChannelReport};
use iokraus::complexmat::{self, CMatrix};
use iokraus::decompose::{self, BlockWeights, DecompositionBranch, QuadraticData, Residuals};
use iokraus::sampler::{self, SamplerConfig};
use iokraus::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    NotIncoherent = 2,
    InvalidChannel = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// A failure with its exit status and a one-line diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            status: ExitStatus::Usage,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::NotIncoherentChannel { .. } | Error::NotIncoherentOperator { .. } => ExitStatus::NotIncoherent,
            Error::Format(_)
            | Error::UnknownExample { .. }
            | Error::OutsideBlochBall { .. }
            | Error::InvalidParameters(_)
            | Error::UnsupportedDimension(_)
            | Error::EmptyChannel => ExitStatus::Usage,
            _ => ExitStatus::InvalidChannel,
        };
        CliError {
            status,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "iokraus", version, about = "Decompose, classify and sample incoherent qubit channels")]
pub struct Cli {
    /// Numerical tolerance, in (0, 1e-3).
    #[arg(long, global = true, default_value = "1e-9")]
    pub tolerance: f64,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose an incoherent qubit channel into at most four incoherent Kraus operators.
    Decompose(InputArgs),
    /// Report IO/SIO membership and Kraus, IO and SIO ranks.
    Classify(InputArgs),
    /// Check completeness, operator patterns and Choi positivity.
    Verify(InputArgs),
    /// Sample random incoherent channels and apply them to one input state.
    Region(RegionArgs),
    /// Print a reference channel, or list the available names.
    Examples(ExampleArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Channel JSON file.
    #[arg(required_unless_present = "example", conflicts_with = "example")]
    pub input: Option<PathBuf>,
    /// Use a reference channel instead of a file.
    #[arg(long)]
    pub example: Option<String>,
    /// Angle θ of the `eq15` example.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Phase φ of the `eq15` example.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Input Bloch vector as `x,y,z`.
    #[arg(long, default_value = "0.5,0,0.5", allow_hyphen_values = true)]
    pub initial: String,
    /// Number of sampled channels.
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    /// Also write an SVG scatter of the x-z projection to this file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    /// Reference channel name; omit to list the names.
    pub name: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
}

/// Settings shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub tolerance: f64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl CliConfig {
    pub fn new(tolerance: f64, seed: u64, output_path: Option<PathBuf>) -> Result<Self, CliError> {
        if !(tolerance > 0.0 && tolerance < 1e-3) {
            return Err(CliError::usage(format!("--tolerance {tolerance} must lie in (0, 1e-3)")));
        }
        Ok(CliConfig {
            tolerance,
            seed,
            output_path,
        })
    }
}

/// What a command produced: the primary document plus diagnostic lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: ExitStatus,
    pub body: String,
    pub diagnostics: Vec<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome {
            status: ExitStatus::Success,
            body,
            diagnostics: Vec::new(),
        }
    }
}

/// Parses `args`, runs the command and writes to `out` / `err`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    ExitStatus::Success.code()
                }
                _ => {
                    let _ = write!(err, "{text}");
                    ExitStatus::Usage.code()
                }
            };
        }
    };
    match execute(cli) {
        Ok((outcome, config)) => {
            for line in &outcome.diagnostics {
                let _ = writeln!(err, "{line}");
            }
            if let Err(e) = emit(&outcome.body, config.output_path.as_deref(), out) {
                let _ = writeln!(err, "error: {}", e.message);
                return e.status.code();
            }
            outcome.status.code()
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.status.code()
        }
    }
}

fn emit(body: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(path) => write_file(path, body),
        None => out
            .write_all(body.as_bytes())
            .map_err(|e| CliError::usage(format!("cannot write output: {e}"))),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<(Outcome, CliConfig), CliError> {
    let config = CliConfig::new(cli.tolerance, cli.seed, cli.output)?;
    let outcome = match &cli.command {
        Command::Decompose(input) => cmd_decompose(&load_channel(input)?, &config)?,
        Command::Classify(input) => cmd_classify(&load_channel(input)?)?,
        Command::Verify(input) => cmd_verify(&load_json(input)?, &config)?,
        Command::Region(args) => cmd_region(args, &config)?,
        Command::Examples(args) => cmd_examples(args)?,
    };
    Ok((outcome, config))
}

/// JSON with one top-level field per line and each value kept compact.
fn json(value: &impl Serialize) -> String {
    let value = serde_json::to_value(value).expect("output serialises");
    match value {
        serde_json::Value::Object(map) if !map.is_empty() => {
            let fields: Vec<String> = map
                .iter()
                .map(|(k, v)| format!("  {}: {}", serde_json::Value::String(k.clone()), v))
                .collect();
            format!("{{\n{}\n}}\n", fields.join(",\n"))
        }
        other => format!("{other}\n"),
    }
}

fn example_channel(name: &str, theta: Option<f64>, phi: Option<f64>) -> Result<QubitChannel, CliError> {
    if name == "eq15" {
        let theta = theta.unwrap_or(classify::EQ15_DEFAULT_THETA);
        let phi = phi.unwrap_or(classify::EQ15_DEFAULT_PHI);
        return Ok(classify::eq15(theta, phi)?);
    }
    if theta.is_some() || phi.is_some() {
        return Err(CliError::usage(format!("--theta and --phi apply only to eq15, not {name}")));
    }
    Ok(classify::gallery(name)?)
}

fn load_json(input: &InputArgs) -> Result<ChannelJson, CliError> {
    match (&input.input, &input.example) {
        (_, Some(name)) => Ok(example_channel(name, input.theta, input.phi)?.to_json()),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            Ok(ChannelJson::parse(&text)?)
        }
        (None, None) => Err(CliError::usage("an input file or --example is required")),
    }
}

fn load_channel(input: &InputArgs) -> Result<QubitChannel, CliError> {
    Ok(load_json(input)?.into_channel()?)
}

/// Decomposition output; `dim` and `kraus` make it a valid channel file.
#[derive(Debug, Serialize)]
pub struct DecomposeOutput {
    pub dim: usize,
    pub kraus: Vec<CMatrix>,
    pub canonical: Option<CanonicalIO4>,
    pub branch: DecompositionBranch,
    pub k: Option<f64>,
    pub weights: Option<BlockWeights>,
    pub quadratic: Option<QuadraticData>,
    pub residuals: Residuals,
}

pub fn cmd_decompose(ch: &QubitChannel, config: &CliConfig) -> Result<Outcome, CliError> {
    let sol = decompose::decompose_channel(ch, config.tolerance)?;
    let doc = DecomposeOutput {
        dim: sol.kraus.dim(),
        kraus: sol.kraus.matrices(),
        canonical: sol.canonical,
        branch: sol.branch,
        k: sol.k,
        weights: sol.weights,
        quadratic: sol.quadratic,
        residuals: sol.residuals,
    };
    Ok(Outcome::ok(json(&doc)))
}

pub fn cmd_classify(ch: &QubitChannel) -> Result<Outcome, CliError> {
    let report: ChannelReport = classify::report(ch);
    Ok(Outcome::ok(json(&report)))
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub valid: bool,
    pub dim: usize,
    pub operators: usize,
    pub completeness_residual: f64,
    pub patterns: Vec<IncoherencePattern>,
    pub choi_min_eigenvalue: Option<f64>,
    pub choi_max_eigenvalue: Option<f64>,
    pub operators_incoherent: bool,
    pub operators_strictly_incoherent: bool,
    /// Choi-level membership; only for valid qubit channels.
    pub choi_io: Option<bool>,
    pub choi_sio: Option<bool>,
    pub failures: Vec<String>,
}

pub fn cmd_verify(parsed: &ChannelJson, config: &CliConfig) -> Result<Outcome, CliError> {
    let ops = &parsed.kraus;
    let mut failures = Vec::new();
    if ops.iter().any(|k| k.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        failures.push("non-finite matrix entry".to_string());
    }
    let residual = channel::completeness_residual(ops)?;
    if residual.is_nan() || residual > channel::COMPLETENESS_TOL {
        failures.push(format!("completeness residual {residual:.1e}"));
    }
    let patterns: Vec<IncoherencePattern> = ops.iter().map(|k| channel::classify_pattern(k, config.tolerance)).collect();
    let choi = channel::unchecked_choi(ops)?;
    let margin = complexmat::psd_margin(&choi, complexmat::HERMITIAN_TOL);
    match margin {
        Some((min, max)) if min < -complexmat::PSD_TOL * max.max(1.0) => {
            failures.push(format!("Choi matrix has eigenvalue {min:.1e}"));
        }
        None => failures.push("Choi matrix is not Hermitian".to_string()),
        _ => {}
    }
    let valid = failures.is_empty();
    let (choi_io, choi_sio) = match (valid, parsed.dim) {
        (true, 2) => {
            let m = channel::choi(&QubitChannel::new(ops.clone())?);
            (
                Some(decompose::io_membership(&m, config.tolerance)),
                Some(classify::is_sio_choi(&m, config.tolerance)),
            )
        }
        _ => (None, None),
    };
    let report = VerifyReport {
        valid,
        dim: parsed.dim,
        operators: ops.len(),
        completeness_residual: residual,
        operators_incoherent: patterns.iter().all(|p| p.is_incoherent()),
        operators_strictly_incoherent: patterns.iter().all(|p| p.is_strictly_incoherent()),
        patterns,
        choi_min_eigenvalue: margin.map(|m| m.0),
        choi_max_eigenvalue: margin.map(|m| m.1),
        choi_io,
        choi_sio,
        failures: failures.clone(),
    };
    Ok(Outcome {
        status: if valid { ExitStatus::Success } else { ExitStatus::InvalidChannel },
        body: json(&report),
        diagnostics: failures.into_iter().map(|f| format!("invalid channel: {f}")).collect(),
    })
}

/// Parses `x,y,z` into a Bloch vector inside the unit ball.
pub fn parse_initial(text: &str) -> Result<BlochVector, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::usage(format!("--initial expects x,y,z, got '{text}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.parse::<f64>().map_err(|_| bad())?;
        if !slot.is_finite() {
            return Err(bad());
        }
    }
    Ok(BlochVector::new(v[0], v[1], v[2])?)
}

pub fn cmd_region(args: &RegionArgs, config: &CliConfig) -> Result<Outcome, CliError> {
    let initial = parse_initial(&args.initial)?;
    let cfg = SamplerConfig {
        seed: config.seed,
        count: args.count,
        ..SamplerConfig::default()
    };
    let result = sampler::achievable_region(&cfg, initial)?;
    if let Some(path) = &args.svg {
        write_file(path, &result.to_svg())?;
    }
    Ok(Outcome::ok(result.to_csv()))
}

pub fn cmd_examples(args: &ExampleArgs) -> Result<Outcome, CliError> {
    match &args.name {
        Some(name) => {
            let ch = example_channel(name, args.theta, args.phi)?;
            Ok(Outcome::ok(json(&ch.to_json())))
        }
        None => Ok(Outcome::ok(classify::GALLERY_NAMES.join("\n") + "\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("iokraus").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn tolerance_bounds() {
        assert!(CliConfig::new(1e-9, 0, None).is_ok());
        assert_eq!(CliConfig::new(0.0, 0, None).unwrap_err().status, ExitStatus::Usage);
        assert_eq!(CliConfig::new(1e-3, 0, None).unwrap_err().status, ExitStatus::Usage);
        assert_eq!(CliConfig::new(f64::NAN, 0, None).unwrap_err().status, ExitStatus::Usage);
    }

    #[test]
    fn error_mapping() {
        let not_io = Error::NotIncoherentChannel {
            slot: "02",
            magnitude: 0.25,
        };
        assert_eq!(CliError::from(not_io).status, ExitStatus::NotIncoherent);
        let incomplete = Error::Completeness {
            residual: 0.03,
            limit: 1e-8,
        };
        assert_eq!(CliError::from(incomplete).status, ExitStatus::InvalidChannel);
        assert_eq!(CliError::from(Error::Format("x".into())).status, ExitStatus::Usage);
    }

    #[test]
    fn parse_initial_accepts_and_rejects() {
        let b = parse_initial("0.5, 0, 0.5").unwrap();
        assert_eq!((b.x, b.y, b.z), (0.5, 0.0, 0.5));
        assert!(parse_initial("0,0,1.5").is_err());
        assert!(parse_initial("0,0").is_err());
        assert!(parse_initial("a,0,0").is_err());
        assert!(parse_initial("nan,0,0").is_err());
    }

    #[test]
    fn bad_flags_exit_one() {
        let (code, _, err) = run_str(&["decompose", "--bogus"]);
        assert_eq!(code, 1);
        assert!(!err.is_empty());
        let (code, out, _) = run_str(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("decompose"));
    }

    #[test]
    fn theta_only_for_eq15() {
        let (code, _, err) = run_str(&["examples", "eq14", "--theta", "1.0"]);
        assert_eq!(code, 1);
        assert!(err.contains("eq15"));
    }

    #[test]
    fn example_listing() {
        let (code, out, _) = run_str(&["examples"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), classify::GALLERY_NAMES.len());
    }
}
