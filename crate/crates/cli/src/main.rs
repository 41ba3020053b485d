//! Command-line surface of the sequential portscan-detection toolkit:
//! parameter tuning, observation bounds, exact risk/ASN curves, boundary
//! exports, seeded simulation and streaming detection over JSONL events.
//!
//! Failures exit nonzero and print one machine-readable JSON error object
//! to stderr: `{"error": "<kind>", "message": "..."}`.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use seqscan::detector::{BoundaryTable, DetectorError, TestSpec, TunedParams, Verdict};
use seqscan::ingest::{ConnectionEvent, DetectorConfig, SessionStore};
use seqscan::maxobs::solve_max_obs;
use seqscan::oc::{evaluate_with, EvalOptions, OcReport};
use seqscan::sim::simulate;
use seqscan::triple::{build_triple_plan, TripleError, TripleSpec};
use seqscan::trwa::{TrwaParams, TrwaPlan, DEFAULT_HORIZON};
use seqscan::tuning::{minimax_tune, trace_csv, TuneError};

mod config;
use config::ConfigFile;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    InvalidArguments(String),
    InvalidConfig(String),
    InfeasibleTuning(String),
    MalformedJsonl(String),
    Io(String),
    Evaluation(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidArguments(_) => "invalid-arguments",
            CliError::InvalidConfig(_) => "invalid-config",
            CliError::InfeasibleTuning(_) => "infeasible-tuning",
            CliError::MalformedJsonl(_) => "malformed-jsonl",
            CliError::Io(_) => "io",
            CliError::Evaluation(_) => "evaluation",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::InvalidArguments(m)
            | CliError::InvalidConfig(m)
            | CliError::InfeasibleTuning(m)
            | CliError::MalformedJsonl(m)
            | CliError::Io(m)
            | CliError::Evaluation(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        CliError::InvalidConfig(e.to_string())
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::InfeasibleWeights { .. } => CliError::InfeasibleTuning(e.to_string()),
            TuneError::Detector(inner) => CliError::InvalidConfig(inner.to_string()),
            other => CliError::Evaluation(other.to_string()),
        }
    }
}

impl From<TripleError> for CliError {
    fn from(e: TripleError) -> Self {
        match e {
            TripleError::InvalidChain | TripleError::InvalidDeltas { .. } => {
                CliError::InvalidConfig(e.to_string())
            }
            TripleError::Tune(inner) => inner.into(),
            other => CliError::Evaluation(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// CLI grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "seqscan",
    version,
    about = "Sequential portscan detection: tune, evaluate, simulate and detect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune weighting coefficients and the risk tuning parameter
    Tune(TuneArgs),
    /// Solve the hard observation bound (z*, m*, n_max)
    Maxobs(MaxobsArgs),
    /// Exact risk / ASN curves over a grid of success rates
    Evaluate(EvaluateArgs),
    /// Export stopping boundaries or triple acceptance regions as CSV
    Boundaries(BoundariesArgs),
    /// Seeded Monte Carlo simulation of a detector
    Simulate(SimulateArgs),
    /// Stream JSONL connection events through per-source detectors
    Detect(DetectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    New,
    Trwa,
    Triple,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    p0: f64,
    #[arg(long)]
    p1: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Maximum minimax iterations
    #[arg(long, default_value_t = 20)]
    kmax: u32,
    /// Write the per-iteration diagnostics CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MaxobsArgs {
    #[arg(long)]
    p0: f64,
    #[arg(long)]
    p1: f64,
    #[arg(long)]
    zeta: f64,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
}

/// Config file plus per-value flag overrides (flags win).
#[derive(Args)]
struct ConfigArgs {
    /// Configuration file; SEQSCAN_CONFIG supplies the default path
    #[arg(long, env = "SEQSCAN_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    k0: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    /// TRWA evaluation truncation horizon
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    triple_p0: Option<f64>,
    #[arg(long)]
    triple_p1: Option<f64>,
    #[arg(long)]
    triple_p0_lo: Option<f64>,
    #[arg(long)]
    triple_p0_hi: Option<f64>,
    #[arg(long)]
    triple_p1_lo: Option<f64>,
    #[arg(long)]
    triple_p1_hi: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    triple_kmax: Option<u32>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Which detector to evaluate
    #[arg(long, value_enum)]
    detector: Kind,
    /// Grid of success rates as lo:hi:step
    #[arg(long)]
    pgrid: String,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append TRWA baseline ASN and the ASN ratio columns (new detector only)
    #[arg(long)]
    ratio_vs_trwa: bool,
}

#[derive(Args)]
struct BoundariesArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Detector kind; defaults to the config file's [detector] kind
    #[arg(long, value_enum)]
    detector: Option<Kind>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_enum)]
    detector: Option<Kind>,
    /// True success rate to simulate at
    #[arg(long)]
    p: f64,
    #[arg(long)]
    runs: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_enum)]
    detector: Option<Kind>,
    /// JSONL event file (stdin when omitted)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Decision JSONL output (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Session snapshot: loaded at start when present, written at end
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Configuration resolution
// ---------------------------------------------------------------------------

fn load_config(args: &ConfigArgs) -> Result<ConfigFile, CliError> {
    match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            ConfigFile::parse(&text)
        }
        None => Ok(ConfigFile::default()),
    }
}

fn require(section: &str, key: &str, value: Option<f64>) -> Result<f64, CliError> {
    value.ok_or_else(|| {
        CliError::InvalidConfig(format!("missing [{section}] {key} (config file or flag)"))
    })
}

fn resolve_spec(file: &ConfigFile, args: &ConfigArgs) -> Result<TestSpec, CliError> {
    let p0 = require("spec", "p0", args.p0.or(file.f64("spec", "p0")?))?;
    let p1 = require("spec", "p1", args.p1.or(file.f64("spec", "p1")?))?;
    let alpha = require("spec", "alpha", args.alpha.or(file.f64("spec", "alpha")?))?;
    let beta = require("spec", "beta", args.beta.or(file.f64("spec", "beta")?))?;
    Ok(TestSpec::new(p0, p1, alpha, beta)?)
}

fn resolve_params(file: &ConfigFile, args: &ConfigArgs) -> Result<TunedParams, CliError> {
    let a = require("params", "a", args.a.or(file.f64("params", "a")?))?;
    let b = require("params", "b", args.b.or(file.f64("params", "b")?))?;
    let zeta = require("params", "zeta", args.zeta.or(file.f64("params", "zeta")?))?;
    Ok(TunedParams::new(a, b, zeta)?)
}

fn resolve_trwa(
    file: &ConfigFile,
    args: &ConfigArgs,
    spec: &TestSpec,
) -> Result<(TrwaParams, u64), CliError> {
    let defaults = TrwaParams::from_risk_budgets(spec);
    let k0 = args.k0.or(file.f64("trwa", "k0")?).unwrap_or(defaults.k0());
    let k1 = args.k1.or(file.f64("trwa", "k1")?).unwrap_or(defaults.k1());
    let horizon = args
        .horizon
        .or(file.u64("trwa", "horizon")?)
        .unwrap_or(DEFAULT_HORIZON);
    let params = TrwaParams::new(k0, k1).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
    Ok((params, horizon))
}

fn resolve_triple(file: &ConfigFile, args: &ConfigArgs) -> Result<(TripleSpec, u32), CliError> {
    let grab = |key: &str, flag: Option<f64>| -> Result<f64, CliError> {
        require("triple", key, flag.or(file.f64("triple", key)?))
    };
    let spec = TripleSpec::new(
        grab("p0", args.triple_p0)?,
        grab("p1", args.triple_p1)?,
        grab("p0_lo", args.triple_p0_lo)?,
        grab("p0_hi", args.triple_p0_hi)?,
        grab("p1_lo", args.triple_p1_lo)?,
        grab("p1_hi", args.triple_p1_hi)?,
        grab("delta0", args.delta0)?,
        grab("delta1", args.delta1)?,
        grab("delta2", args.delta2)?,
    )?;
    let kmax = args
        .triple_kmax
        .or(file.u64("triple", "kmax")?.map(|v| v as u32))
        .unwrap_or(8);
    Ok((spec, kmax))
}

fn resolve_kind(file: &ConfigFile, flag: Option<Kind>) -> Result<Kind, CliError> {
    if let Some(kind) = flag {
        return Ok(kind);
    }
    match file.get("detector", "kind") {
        Some("new") => Ok(Kind::New),
        Some("trwa") => Ok(Kind::Trwa),
        Some("triple") => Ok(Kind::Triple),
        Some(other) => Err(CliError::InvalidConfig(format!(
            "unknown detector kind `{other}` (expected new, trwa or triple)"
        ))),
        None => Err(CliError::InvalidConfig(
            "missing [detector] kind (config file or --detector)".into(),
        )),
    }
}

fn parse_pgrid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(CliError::InvalidArguments(format!(
            "--pgrid must be lo:hi:step, got `{text}`"
        )));
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::InvalidArguments(format!("`{s}` in --pgrid is not a number")))
    };
    let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
    if !(lo > 0.0 && lo <= hi && hi < 1.0 && step > 0.0) {
        return Err(CliError::InvalidArguments(format!(
            "--pgrid needs 0 < lo <= hi < 1 and step > 0, got `{text}`"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(CliError::InvalidArguments(format!(
            "--pgrid would generate {count} points"
        )));
    }
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => {
            fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run_tune(args: &TuneArgs) -> Result<(), CliError> {
    let spec = TestSpec::new(args.p0, args.p1, args.alpha, args.beta)?;
    let (params, diag) = minimax_tune(&spec, args.kmax)?;
    println!(
        "{}",
        json!({
            "a": params.a(),
            "b": params.b(),
            "zeta": params.zeta(),
            "zeta_star": diag.zeta_star,
            "pre_absorption": {"a": diag.pre_absorption.0, "b": diag.pre_absorption.1},
            "a_ratio": diag.a_ratio,
            "b_ratio": diag.b_ratio,
            "q": diag.q,
            "r": diag.r,
            "iterations": diag.trace.len(),
        })
    );
    write_output(args.out.as_deref(), &trace_csv(&diag))
}

fn run_maxobs(args: &MaxobsArgs) -> Result<(), CliError> {
    // risk budgets do not enter the bound; placeholder values
    let spec = TestSpec::new(args.p0, args.p1, 0.5, 0.5)?;
    let params = TunedParams::new(args.a, args.b, args.zeta)?;
    let result = solve_max_obs(&spec, &params).map_err(|e| CliError::Evaluation(e.to_string()))?;
    println!(
        "{}",
        json!({"z_star": result.z_star, "m_star": result.m_star, "n_max": result.n_max})
    );
    Ok(())
}

/// Risk of a binary detector at one evaluated rate; unspecified inside
/// (p0, p1).
fn binary_risk(report: &OcReport, spec: &TestSpec) -> (f64, bool) {
    if report.p <= spec.p0() {
        (report.accept_prob(Verdict::Benign), true)
    } else if report.p >= spec.p1() {
        (report.accept_prob(Verdict::Scanner), true)
    } else {
        (0.0, false)
    }
}

fn map_oc(e: seqscan::oc::OcError) -> CliError {
    CliError::Evaluation(e.to_string())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let file = load_config(&args.cfg)?;
    let grid = parse_pgrid(&args.pgrid)?;
    if args.ratio_vs_trwa && args.detector != Kind::New {
        return Err(CliError::InvalidArguments(
            "--ratio-vs-trwa applies to --detector new".into(),
        ));
    }

    let csv = match args.detector {
        Kind::New => {
            let spec = resolve_spec(&file, &args.cfg)?;
            let params = resolve_params(&file, &args.cfg)?;
            let bound =
                solve_max_obs(&spec, &params).map_err(|e| CliError::Evaluation(e.to_string()))?;
            let table = BoundaryTable::build(&spec, &params, bound.n_max);
            let baseline = if args.ratio_vs_trwa {
                let (trwa_params, horizon) = resolve_trwa(&file, &args.cfg, &spec)?;
                Some(TrwaPlan::new(spec, trwa_params, horizon))
            } else {
                None
            };

            let mut csv =
                String::from("p,accept_scanner,accept_benign,asn,residual,risk,specified");
            csv.push_str(if baseline.is_some() {
                ",trwa_asn,asn_ratio\n"
            } else {
                "\n"
            });
            for &p in &grid {
                let report = evaluate_with(&table, p, EvalOptions::default()).map_err(map_oc)?;
                let (risk, specified) = binary_risk(&report, &spec);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}",
                    p,
                    report.accept_prob(Verdict::Scanner),
                    report.accept_prob(Verdict::Benign),
                    report.asn,
                    report.residual_mass,
                    risk,
                    specified
                ));
                if let Some(baseline) = &baseline {
                    let b = evaluate_with(baseline, p, EvalOptions::truncated()).map_err(map_oc)?;
                    csv.push_str(&format!(",{},{}", b.asn, report.asn / b.asn));
                }
                csv.push('\n');
            }
            csv
        }
        Kind::Trwa => {
            let spec = resolve_spec(&file, &args.cfg)?;
            let (params, horizon) = resolve_trwa(&file, &args.cfg, &spec)?;
            let plan = TrwaPlan::new(spec, params, horizon);
            let mut csv =
                String::from("p,accept_scanner,accept_benign,asn,residual,risk,specified\n");
            for &p in &grid {
                let report = evaluate_with(&plan, p, EvalOptions::truncated()).map_err(map_oc)?;
                let (risk, specified) = binary_risk(&report, &spec);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p,
                    report.accept_prob(Verdict::Scanner),
                    report.accept_prob(Verdict::Benign),
                    report.asn,
                    report.residual_mass,
                    risk,
                    specified
                ));
            }
            csv
        }
        Kind::Triple => {
            let (tspec, kmax) = resolve_triple(&file, &args.cfg)?;
            let plan = build_triple_plan(&tspec, kmax)?;
            let mut csv = String::from(
                "p,accept_scanner,accept_marginal,accept_benign,asn,residual,risk,in_indifference_zone\n",
            );
            for &p in &grid {
                let report = evaluate_with(&plan, p, EvalOptions::default()).map_err(map_oc)?;
                let correct = if p <= tspec.p0() {
                    Verdict::Scanner
                } else if p < tspec.p1() {
                    Verdict::Marginal
                } else {
                    Verdict::Benign
                };
                let risk = 1.0 - report.accept_prob(correct) - report.residual_mass;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    p,
                    report.accept_prob(Verdict::Scanner),
                    report.accept_prob(Verdict::Marginal),
                    report.accept_prob(Verdict::Benign),
                    report.asn,
                    report.residual_mass,
                    risk,
                    tspec.in_indifference_zone(p)
                ));
            }
            csv
        }
    };
    write_output(args.out.as_deref(), &csv)
}

fn run_boundaries(args: &BoundariesArgs) -> Result<(), CliError> {
    let file = load_config(&args.cfg)?;
    let csv = match resolve_kind(&file, args.detector)? {
        Kind::New => {
            let spec = resolve_spec(&file, &args.cfg)?;
            let params = resolve_params(&file, &args.cfg)?;
            let bound =
                solve_max_obs(&spec, &params).map_err(|e| CliError::Evaluation(e.to_string()))?;
            BoundaryTable::build(&spec, &params, bound.n_max).to_csv()
        }
        Kind::Triple => {
            let (tspec, kmax) = resolve_triple(&file, &args.cfg)?;
            build_triple_plan(&tspec, kmax)?.regions_csv()
        }
        Kind::Trwa => {
            return Err(CliError::InvalidArguments(
                "the random walk has no bounded stopping table; use --detector new or triple"
                    .into(),
            ))
        }
    };
    write_output(args.out.as_deref(), &csv)
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file = load_config(&args.cfg)?;
    let map_sim = |e: seqscan::sim::SimError| CliError::InvalidArguments(e.to_string());

    let report = match resolve_kind(&file, args.detector)? {
        Kind::New => {
            let spec = resolve_spec(&file, &args.cfg)?;
            let params = resolve_params(&file, &args.cfg)?;
            let bound =
                solve_max_obs(&spec, &params).map_err(|e| CliError::Evaluation(e.to_string()))?;
            let table = BoundaryTable::build(&spec, &params, bound.n_max);
            simulate(&table, args.p, args.runs, args.seed).map_err(map_sim)?
        }
        Kind::Trwa => {
            let spec = resolve_spec(&file, &args.cfg)?;
            let (params, horizon) = resolve_trwa(&file, &args.cfg, &spec)?;
            let plan = TrwaPlan::new(spec, params, horizon);
            simulate(&plan, args.p, args.runs, args.seed).map_err(map_sim)?
        }
        Kind::Triple => {
            let (tspec, kmax) = resolve_triple(&file, &args.cfg)?;
            let plan = build_triple_plan(&tspec, kmax)?;
            simulate(&plan, args.p, args.runs, args.seed).map_err(map_sim)?
        }
    };
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serialization cannot fail")
    );
    Ok(())
}

fn run_detect(args: &DetectArgs) -> Result<(), CliError> {
    let file = load_config(&args.cfg)?;
    let detector_config = match resolve_kind(&file, args.detector)? {
        Kind::New => DetectorConfig::New {
            spec: resolve_spec(&file, &args.cfg)?,
            params: resolve_params(&file, &args.cfg)?,
        },
        Kind::Trwa => {
            let spec = resolve_spec(&file, &args.cfg)?;
            let (params, _) = resolve_trwa(&file, &args.cfg, &spec)?;
            DetectorConfig::Trwa { spec, params }
        }
        Kind::Triple => {
            let (tspec, kmax) = resolve_triple(&file, &args.cfg)?;
            DetectorConfig::Triple {
                plan: Box::new(build_triple_plan(&tspec, kmax)?),
            }
        }
    };

    let mut store = match &args.snapshot {
        Some(path) if path.exists() => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            SessionStore::from_snapshot_json(detector_config, &text)
                .map_err(|e| CliError::InvalidConfig(e.to_string()))?
        }
        _ => SessionStore::new(detector_config),
    };

    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(io::BufReader::new(
            fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::BufReader::new(io::stdin())),
    };
    let mut writer: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    };

    let mut malformed = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match ConnectionEvent::parse(line) {
            Ok(event) => {
                let record = store
                    .ingest(&event)
                    .expect("parsed events are always valid");
                if let Some(record) = record {
                    writeln!(writer, "{}", serde_json::to_string(&record).unwrap())?;
                }
            }
            Err(e) => {
                // per-line error record; the stream continues
                malformed += 1;
                writeln!(
                    writer,
                    "{}",
                    json!({"error": "malformed-jsonl", "line": idx + 1, "message": e.to_string()})
                )?;
            }
        }
    }
    for record in store.undecided_summary() {
        writeln!(writer, "{}", serde_json::to_string(&record).unwrap())?;
    }
    writer.flush()?;

    if let Some(path) = &args.snapshot {
        fs::write(path, store.snapshot_json())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }

    let stats = store.stats();
    eprintln!(
        "{}",
        json!({
            "events": stats.events,
            "decisions": stats.decisions,
            "duplicate_pairs": stats.duplicate_pairs,
            "after_decision": stats.after_decision,
            "malformed": malformed,
            "sessions": store.len(),
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Tune(args) => run_tune(args),
        Command::Maxobs(args) => run_maxobs(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Boundaries(args) => run_boundaries(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Detect(args) => run_detect(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!(
                "{}",
                json!({"error": "invalid-arguments", "message": e.to_string()})
            );
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.message()}));
            ExitCode::from(1)
        }
    }
}
