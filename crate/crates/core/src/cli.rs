//! `mlmc` command-line front end.
//!
//! Subcommands: `plan`, `pilot`, `run`, `report`, and `topography` for CSV
//! export of a random bottom field. Exit codes: 0 success, 1 I/O, 2 invalid
//! flags or configuration, 3 degenerate statistics, 4 model failure,
//! 5 malformed report file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::executor::{write_sample_log, Executor, PilotEstimate, RunReport};
use crate::hierarchy::ResolutionHierarchy;
use crate::models::{sample_topography, GbmSpec, ModelSpec, TopographySpec};
use crate::planner::{self, LevelPlan, StrategyId};
use crate::stats::{SolutionParameters, DEFAULT_SIGMA};

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_MODEL: i32 = 4;
pub const EXIT_BAD_REPORT: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Degenerate(_) | Error::EmptySamples | Error::InsufficientSamples(_) => EXIT_DEGENERATE,
            Error::ModelFailure { .. } => EXIT_MODEL,
            _ => EXIT_USAGE,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mlmc", version, about = "Multilevel Monte Carlo planning and execution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Level counts, sample sizes and loads for each strategy.
    Plan(PlanArgs),
    /// Estimate delta, alpha and e from a three-level pilot ensemble.
    Pilot(PilotArgs),
    /// Execute a plan and write a run report.
    Run(RunArgs),
    /// Compare run reports.
    Report(ReportArgs),
    /// Export one random topography sample as a CSV grid.
    Topography(TopographyArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long = "err", allow_negative_numbers = true)]
    pub err: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA, allow_negative_numbers = true)]
    pub sigma: f64,
    /// `all`, `mc`, or `s1`..`s4`.
    #[arg(long, default_value = "all")]
    pub strategy: String,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long, default_value = "plans.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PilotArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// A plan JSON (single plan or a `plan` output file).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every evaluation to this CSV file.
    #[arg(long = "log-samples")]
    pub log_samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopographyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 101)]
    pub nx: usize,
    #[arg(long, default_value_t = 101)]
    pub ny: usize,
    #[arg(long, default_value = "topography.csv")]
    pub out: PathBuf,
}

/// Optional replacements for pilot-estimated parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterOverrides {
    pub delta: Option<f64>,
    pub e: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
}

impl ParameterOverrides {
    fn complete(&self) -> Option<SolutionParameters> {
        Some(SolutionParameters {
            delta: self.delta?,
            e: self.e?,
            alpha: self.alpha?,
            sigma: self.sigma.unwrap_or(DEFAULT_SIGMA),
            c2: None,
        })
    }

    fn apply(&self, base: SolutionParameters) -> SolutionParameters {
        SolutionParameters {
            delta: self.delta.unwrap_or(base.delta),
            e: self.e.unwrap_or(base.e),
            alpha: self.alpha.unwrap_or(base.alpha),
            sigma: self.sigma.unwrap_or(base.sigma),
            c2: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub sample_log: Option<PathBuf>,
}

fn default_strategy() -> StrategyId {
    StrategyId::S2
}

fn default_pilot_samples() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub hierarchy: ResolutionHierarchy,
    #[serde(default)]
    pub parameters: ParameterOverrides,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyId,
    #[serde(default = "default_pilot_samples")]
    pub pilot_samples: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub log_samples: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Gbm(GbmSpec::default()),
            hierarchy: ResolutionHierarchy::default(),
            parameters: ParameterOverrides::default(),
            strategy: default_strategy(),
            pilot_samples: default_pilot_samples(),
            base_seed: 0,
            workers: None,
            output: OutputPaths::default(),
            log_samples: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every precondition that can be checked before work starts.
    pub fn validate(&self) -> crate::Result<()> {
        self.model.build()?;
        self.hierarchy.ensure_standard()?;
        ResolutionHierarchy::new(self.hierarchy.r1, self.hierarchy.c1)?;
        let p = &self.parameters;
        for (name, v) in [("delta", p.delta), ("e", p.e), ("sigma", p.sigma)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidInput(format!("parameter {name} must be positive, got {v}")));
                }
            }
        }
        if let Some(a) = p.alpha {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidInput(format!("parameter alpha must be non-negative, got {a}")));
            }
        }
        if self.pilot_samples < 2 {
            return Err(Error::InvalidInput("pilot_samples must be at least 2".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidInput("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Contents of the `plan` subcommand's output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub hierarchy: ResolutionHierarchy,
    pub plans: Vec<LevelPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub wall_time_seconds: f64,
    pub pilot: Option<PilotEstimate>,
}

/// Formats `x` with four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 {
        return "0.000".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => Ok(RunConfig::from_json(&read_to_string(p)?)?),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::new(EXIT_IO, format!("stdout: {e}")))
}

pub fn plan_table(plans: &[LevelPlan]) -> String {
    let width = plans.iter().map(|p| p.levels).max().unwrap_or(1);
    let mut s = format!("{:<14} {:>3}", "", "L");
    for l in 1..=width {
        s.push_str(&format!(" {:>8}", format!("m_{l}")));
    }
    s.push_str(&format!(" {:>12}\n", "load"));
    for p in plans {
        let levels = if p.strategy == StrategyId::ClassicalMC { "n/a".to_string() } else { p.levels.to_string() };
        s.push_str(&format!("{:<14} {:>3}", p.strategy.label(), levels));
        for l in 0..width {
            match p.samples.get(l) {
                Some(m) => s.push_str(&format!(" {m:>8}")),
                None => s.push_str(&format!(" {:>8}", "")),
            }
        }
        s.push_str(&format!(" {:>12}\n", sig4(p.relative_load)));
    }
    s
}

fn cmd_plan(args: &PlanArgs, out: &mut dyn Write) -> CliResult<()> {
    let params = SolutionParameters::new(args.delta, args.err, args.alpha, args.sigma)?;
    let mut hierarchy = ResolutionHierarchy::default();
    if args.r1.is_some() || args.c1.is_some() {
        hierarchy = ResolutionHierarchy::new(args.r1.unwrap_or(hierarchy.r1), args.c1.unwrap_or(hierarchy.c1))?;
    }
    let strategies: Vec<StrategyId> = if args.strategy.eq_ignore_ascii_case("all") {
        StrategyId::ALL.to_vec()
    } else {
        vec![args.strategy.parse()?]
    };
    let plans =
        strategies.into_iter().map(|s| planner::plan_on(&hierarchy, s, &params)).collect::<crate::Result<Vec<_>>>()?;
    emit(out, &plan_table(&plans))?;
    write_json(&args.out, &PlanFile { hierarchy, plans })
}

fn cmd_pilot(args: &PilotArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(n) = args.samples {
        config.pilot_samples = n;
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    config.validate()?;
    let model = config.model.build()?;
    let pilot = Executor::new().workers(config.workers).pilot_estimate_parameters(
        model.as_ref(),
        config.pilot_samples,
        config.base_seed,
    )?;
    let p = pilot.parameters;
    emit(
        out,
        &format!(
            "delta = {}  alpha = {}  e = {}  (delta_12 = {}, delta_23 = {}; {} samples on levels 1-3, delta from level {})\n",
            sig4(p.delta),
            sig4(p.alpha),
            sig4(p.e),
            sig4(pilot.delta_12),
            sig4(pilot.delta_23),
            pilot.samples,
            pilot.delta_level
        ),
    )?;
    if let Some(path) = &args.out {
        write_json(path, &pilot)?;
    }
    Ok(())
}

fn load_plan(path: &Path, strategy: StrategyId) -> CliResult<LevelPlan> {
    let text = read_to_string(path)?;
    let plan = if let Ok(plan) = serde_json::from_str::<LevelPlan>(&text) {
        plan
    } else {
        let file: PlanFile = serde_json::from_str(&text)
            .map_err(|e| CliError::new(EXIT_USAGE, format!("{}: not a plan file: {e}", path.display())))?;
        file.plans
            .into_iter()
            .find(|p| p.strategy == strategy)
            .ok_or_else(|| CliError::new(EXIT_USAGE, format!("{} has no {strategy} plan", path.display())))?
    };
    plan.validate()?;
    Ok(plan)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    if let Some(s) = &args.strategy {
        config.strategy = s.parse()?;
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    if let Some(p) = &args.out {
        config.output.report = Some(p.clone());
    }
    if let Some(p) = &args.log_samples {
        config.output.sample_log = Some(p.clone());
        config.log_samples = true;
    }
    config.validate()?;
    let model = config.model.build()?;
    let executor = Executor::new().workers(config.workers).record_samples(config.log_samples);

    let mut pilot = None;
    let plan = match &args.plan {
        Some(path) => load_plan(path, config.strategy)?,
        None => {
            let params = match config.parameters.complete() {
                Some(p) => p,
                None => {
                    let est =
                        executor.pilot_estimate_parameters(model.as_ref(), config.pilot_samples, config.base_seed)?;
                    pilot = Some(est);
                    config.parameters.apply(est.parameters)
                }
            };
            planner::plan_on(&config.hierarchy, config.strategy, &params)?
        }
    };
    let outcome = executor.run_plan(model.as_ref(), &plan, config.base_seed)?;
    let report = &outcome.report;

    let report_path = config.output.report.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    write_json(&report_path, report)?;
    let meta_path = report_path.with_extension("meta.json");
    write_json(&meta_path, &RunMetadata { wall_time_seconds: report.wall_time.as_secs_f64(), pilot })?;
    if config.log_samples {
        let path = config.output.sample_log.clone().unwrap_or_else(|| PathBuf::from("samples.csv"));
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        write_sample_log(&outcome.samples, std::io::BufWriter::new(file)).map_err(|e| CliError::io(&path, e))?;
    }
    emit(out, &report_table(&[(report_path.display().to_string(), report.clone())]))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(sig4).unwrap_or_else(|| "n/a".into())
}

pub fn report_table(reports: &[(String, RunReport)]) -> String {
    let with_savings = reports.len() > 1;
    let mut s = format!(
        "{:<24} {:<12} {:>12} {:>12} {:>12} {:>12}",
        "report", "strategy", "estimate", "error bound", "std error", "load"
    );
    if with_savings {
        s.push_str(&format!(" {:>10}", "savings"));
    }
    s.push('\n');
    let base = reports.first().map(|r| r.1.realized_load).unwrap_or(0.0);
    for (name, r) in reports {
        s.push_str(&format!(
            "{:<24} {:<12} {:>12} {:>12} {:>12} {:>12}",
            name,
            r.strategy.to_string(),
            sig4(r.estimate),
            fmt_opt(r.a_priori_error_bound),
            fmt_opt(r.estimated_std_error),
            sig4(r.realized_load)
        ));
        if with_savings {
            s.push_str(&format!(" {:>9}%", sig4(load_savings_percent(base, r.realized_load))));
        }
        s.push('\n');
    }
    s
}

/// Percentage saved relative to `base`: `100 (1 - load / base)`.
pub fn load_savings_percent(base: f64, load: f64) -> f64 {
    100.0 * (1.0 - load / base)
}

fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::new(EXIT_BAD_REPORT, format!("{}: {e}", path.display())))?;
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| CliError::new(EXIT_BAD_REPORT, format!("{}: malformed report: {e}", path.display())))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        reports.push((name, report));
    }
    emit(out, &report_table(&reports))
}

fn cmd_topography(args: &TopographyArgs) -> CliResult<()> {
    let spec = TopographySpec::default();
    let sample = sample_topography(&spec, args.seed);
    let file = fs::File::create(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    sample.write_csv(args.nx, args.ny, std::io::BufWriter::new(file))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a, out),
        Command::Pilot(a) => cmd_pilot(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Topography(a) => cmd_topography(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(22.40625), "22.41");
        assert_eq!(sig4(1096.08), "1096");
        assert_eq!(sig4(107.75), "107.8");
        assert_eq!(sig4(59.0), "59.00");
        assert_eq!(sig4(0.0123456), "0.01235");
        assert_eq!(sig4(12345.6), "12346");
        assert_eq!(sig4(0.0), "0.000");
    }

    #[test]
    fn savings() {
        assert!((load_savings_percent(59.0, 22.4) - 62.03).abs() < 0.01);
        assert_eq!(load_savings_percent(10.0, 10.0), 0.0);
    }

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig::default();
        c.parameters.alpha = Some(1.0);
        c.output.report = Some(PathBuf::from("r.json"));
        let once = c.to_json();
        let back = RunConfig::from_json(&once).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), once);
    }

    #[test]
    fn config_defaults_fill_in() {
        let c = RunConfig::from_json(r#"{"model":{"kind":"constant","value":1.0,"max_level":3}}"#).unwrap();
        assert_eq!(c.strategy, StrategyId::S2);
        assert_eq!(c.pilot_samples, 256);
        assert!(c.validate().is_ok());
        let bad = RunConfig { pilot_samples: 1, ..c.clone() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { parameters: ParameterOverrides { e: Some(-1.0), ..Default::default() }, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Degenerate("x".into())).code, EXIT_DEGENERATE);
        assert_eq!(CliError::from(Error::ModelFailure { level: 1, seed: 2, message: "m".into() }).code, EXIT_MODEL);
        assert_eq!(CliError::from(Error::InvalidInput("x".into())).code, EXIT_USAGE);
    }
}
