//! Command-line scenario runner.
//!
//! A scenario is resolved from an optional TOML file, then overridden by
//! flags. Reports are JSON (canonical) or CSV, with every float rounded to 12
//! significant digits and keys in sorted order, so a given scenario always
//! produces the same bytes regardless of the worker count.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::noise::{DephasingSpec, LossChannelSpec};
use crate::protocols::{
    run_chain, run_swapper_exhaustive, run_swapper_sampled, run_teleporter_exhaustive, run_teleporter_sampled,
    ChainConfig, FidelityStats, InputQubit, Scheme,
};
use crate::rng::trial_rng;
use crate::verify::{run_checks, Check};

/// Environment variable naming the default report directory.
pub const OUTPUT_DIR_ENV: &str = "LQC_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    #[default]
    Teleport,
    Swap,
    Chain,
    Verify,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything that determines a run. Complex amplitudes are `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: CommandKind,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    /// Replace the fixed qubit by this many uniformly random ones.
    pub random_qubits: Option<u64>,
    pub trials: u64,
    pub seed: u64,
    pub segments: usize,
    pub survival: Option<f64>,
    pub segment_length: Option<f64>,
    pub attenuation_length: Option<f64>,
    pub scheme: Scheme,
    pub sigma: f64,
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            command: CommandKind::Teleport,
            alpha: [1.0, 0.0],
            beta: [0.0, 0.0],
            random_qubits: None,
            trials: 10_000,
            seed: 0,
            segments: 1,
            survival: None,
            segment_length: None,
            attenuation_length: None,
            scheme: Scheme::I,
            sigma: 0.0,
            format: Format::Json,
            output: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invariant(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Input qubits with the seed each one's trials run under.
    pub fn qubits(&self) -> Result<Vec<(InputQubit, u64)>> {
        match self.random_qubits {
            Some(0) => Err(Error::InvalidConfig("random_qubits must be at least 1".into())),
            Some(k) => {
                let mut rng = trial_rng(self.seed, u64::MAX);
                Ok((0..k)
                    .map(|j| (InputQubit::random(&mut rng), self.seed.wrapping_add(j)))
                    .collect())
            }
            None => {
                let c = |x: [f64; 2]| Complex64::new(x[0], x[1]);
                Ok(vec![(InputQubit::new(c(self.alpha), c(self.beta))?, self.seed)])
            }
        }
    }

    pub fn loss(&self) -> Result<LossChannelSpec> {
        match (self.survival, self.segment_length, self.attenuation_length) {
            (Some(p), None, None) => Ok(LossChannelSpec::Survival(p)),
            (None, Some(segment_length), Some(attenuation_length)) => Ok(LossChannelSpec::Lengths {
                segment_length,
                attenuation_length,
            }),
            (None, None, None) => Err(Error::InvalidConfig(
                "chain needs either survival or both segment_length and attenuation_length".into(),
            )),
            _ => Err(Error::InvalidConfig(
                "give either survival or segment_length with attenuation_length, not a mix".into(),
            )),
        }
    }

    pub fn chain_config(&self, seed: u64) -> Result<ChainConfig> {
        let cfg = ChainConfig {
            segments: self.segments,
            loss: self.loss()?,
            scheme: self.scheme,
            dephasing: DephasingSpec { sigma: self.sigma },
            trials: self.trials,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lqc", version, about = "Linear-optics teleportation, swapping and repeater-chain simulator")]
pub struct Cli {
    /// TOML scenario file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for trial fan-out; does not affect results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Teleport a polarization qubit through one two-PBS teleporter.
    Teleport {
        #[command(flatten)]
        qubit: QubitArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Swap entanglement between two singlet pairs.
    Swap {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Send a qubit down a lossy repeater chain.
    Chain {
        #[command(flatten)]
        qubit: QubitArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check the engine against the literal expansion and closed forms.
    Verify {
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct QubitArgs {
    /// H amplitude, e.g. `0.6`, `0.6+0.1i` or `-0.2i`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub alpha: Option<Complex64>,
    /// V amplitude.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub beta: Option<Complex64>,
    /// Use this many random qubits instead.
    #[arg(long)]
    pub random_qubits: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub segments: Option<usize>,
    /// Per-segment survival probability.
    #[arg(long)]
    pub survival: Option<f64>,
    #[arg(long)]
    pub segment_length: Option<f64>,
    #[arg(long)]
    pub attenuation_length: Option<f64>,
    /// `I` (teleporter relay) or `II` (swapper chain).
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// Dephasing standard deviation per segment, radians.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report path; defaults to `$LQC_OUTPUT_DIR/<command>-<seed>.<ext>` or stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    s.trim()
        .parse::<Complex64>()
        .map_err(|_| format!("`{s}` is not a complex number (try 0.6, 0.6+0.8i or 0.8i)"))
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "I" | "i" | "1" => Ok(Scheme::I),
        "II" | "ii" | "2" => Ok(Scheme::II),
        _ => Err(format!("unknown scheme `{s}`, expected I or II")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_qubit(cfg: &mut ScenarioConfig, q: QubitArgs) {
    set(&mut cfg.alpha, q.alpha.map(|c| [c.re, c.im]));
    set(&mut cfg.beta, q.beta.map(|c| [c.re, c.im]));
    if q.alpha.is_some() || q.beta.is_some() {
        cfg.random_qubits = None;
    }
    if q.random_qubits.is_some() {
        cfg.random_qubits = q.random_qubits;
    }
}

fn apply_run(cfg: &mut ScenarioConfig, r: RunArgs) {
    set(&mut cfg.trials, r.trials);
    set(&mut cfg.seed, r.seed);
}

fn apply_out(cfg: &mut ScenarioConfig, o: OutputArgs) {
    set(&mut cfg.format, o.format);
    if o.output.is_some() {
        cfg.output = o.output;
    }
}

fn apply_chain(cfg: &mut ScenarioConfig, c: ChainArgs) {
    set(&mut cfg.segments, c.segments);
    if c.survival.is_some() {
        cfg.survival = c.survival;
        cfg.segment_length = None;
        cfg.attenuation_length = None;
    }
    if c.segment_length.is_some() || c.attenuation_length.is_some() {
        cfg.survival = None;
        cfg.segment_length = c.segment_length.or(cfg.segment_length);
        cfg.attenuation_length = c.attenuation_length.or(cfg.attenuation_length);
    }
    set(&mut cfg.scheme, c.scheme);
    set(&mut cfg.sigma, c.sigma);
}

impl Cli {
    /// Merges the config file (if any) with the flags.
    pub fn scenario(self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        match self.command {
            Command::Teleport { qubit, run, out } => {
                cfg.command = CommandKind::Teleport;
                apply_qubit(&mut cfg, qubit);
                apply_run(&mut cfg, run);
                apply_out(&mut cfg, out);
            }
            Command::Swap { run, out } => {
                cfg.command = CommandKind::Swap;
                apply_run(&mut cfg, run);
                apply_out(&mut cfg, out);
            }
            Command::Chain { qubit, run, chain, out } => {
                cfg.command = CommandKind::Chain;
                apply_qubit(&mut cfg, qubit);
                apply_run(&mut cfg, run);
                apply_chain(&mut cfg, chain);
                apply_out(&mut cfg, out);
            }
            Command::Verify { out } => {
                cfg.command = CommandKind::Verify;
                apply_out(&mut cfg, out);
            }
        }
        Ok(cfg)
    }
}

/// Full report of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: ScenarioConfig,
    pub seed: u64,
    /// Exact branch probabilities.
    pub exhaustive: BTreeMap<String, f64>,
    /// Monte Carlo branch counts.
    pub sampled: BTreeMap<String, u64>,
    pub fidelity: FidelityStats,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl Report {
    fn new(config: &ScenarioConfig) -> Self {
        Report {
            config: config.clone(),
            seed: config.seed,
            exhaustive: BTreeMap::new(),
            sampled: BTreeMap::new(),
            fidelity: FidelityStats::from_values([]),
            summary: BTreeMap::new(),
            checks: Vec::new(),
        }
    }
}

fn bump(map: &mut BTreeMap<String, u64>, key: String, by: u64) {
    *map.entry(key).or_insert(0) += by;
}

fn teleport_report(cfg: &ScenarioConfig) -> Result<Report> {
    let mut r = Report::new(cfg);
    let qubits = cfg.qubits()?;
    let mut per_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut fids = Vec::new();
    for (q, seed) in &qubits {
        let mut seen: BTreeMap<String, f64> = BTreeMap::new();
        for (rec, p) in run_teleporter_exhaustive(q)? {
            *seen.entry(rec.label()).or_insert(0.0) += p;
        }
        for (k, p) in seen {
            per_label.entry(k).or_default().push(p);
        }
        for rec in run_teleporter_sampled(q, cfg.trials, *seed)? {
            bump(&mut r.sampled, rec.label(), 1);
            fids.extend(rec.fidelity_to_input);
        }
    }
    let n = qubits.len() as f64;
    let mut spread: f64 = 0.0;
    for (k, ps) in per_label {
        let lo = ps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
        r.exhaustive.insert(k, ps.iter().sum::<f64>() / n);
    }
    r.fidelity = FidelityStats::from_values(fids);
    r.summary.insert("exhaustive_total".into(), r.exhaustive.values().sum());
    r.summary.insert("probability_spread_over_qubits".into(), spread);
    r.summary.insert("qubits".into(), n);
    r.summary.insert("trials".into(), (cfg.trials * qubits.len() as u64) as f64);
    Ok(r)
}

fn swap_report(cfg: &ScenarioConfig) -> Result<Report> {
    let mut r = Report::new(cfg);
    let key = |a: crate::measurement::BellLabel, b: crate::measurement::BellLabel| format!("{a}->{b}");
    for (rec, p) in run_swapper_exhaustive()? {
        r.exhaustive.insert(key(rec.bsm_label, rec.heralded_bell), p);
    }
    let m = crate::protocols::SWAPPER;
    let mut fids = Vec::new();
    for rec in run_swapper_sampled(cfg.trials, cfg.seed)? {
        bump(&mut r.sampled, key(rec.bsm_label, rec.heralded_bell), 1);
        let target = crate::measurement::bell_state(rec.heralded_bell, m.b, m.d)?;
        fids.push(rec.heralded_state.fidelity(&target)?);
    }
    r.fidelity = FidelityStats::from_values(fids);
    r.summary.insert("exhaustive_total".into(), r.exhaustive.values().sum());
    r.summary.insert("trials".into(), cfg.trials as f64);
    Ok(r)
}

fn chain_report(cfg: &ScenarioConfig) -> Result<Report> {
    let mut r = Report::new(cfg);
    let qubits = cfg.qubits()?;
    let mut fids_mean = Vec::new();
    let (mut trials, mut arrived) = (0u64, 0u64);
    let mut expected = 0.0;
    let mut fid_min: Option<f64> = None;
    let mut fid_max: Option<f64> = None;
    for (q, seed) in &qubits {
        let rec = run_chain(&cfg.chain_config(*seed)?, q)?;
        expected = rec.expected_arrival;
        trials += rec.trials;
        arrived += rec.arrived;
        for (k, v) in &rec.tallies {
            bump(&mut r.sampled, k.clone(), *v);
        }
        for (i, v) in rec.lost_at_segment.iter().enumerate() {
            bump(&mut r.sampled, format!("lost.segment{}", i + 1), *v);
        }
        if let (Some(lo), Some(mean), Some(hi)) = (rec.fidelity.min, rec.fidelity.mean, rec.fidelity.max) {
            fid_min = Some(fid_min.map_or(lo, |m| m.min(lo)));
            fid_max = Some(fid_max.map_or(hi, |m| m.max(hi)));
            fids_mean.push((mean, rec.fidelity.count));
        }
    }
    bump(&mut r.sampled, "arrived".into(), arrived);
    let count: u64 = fids_mean.iter().map(|(_, c)| c).sum();
    r.fidelity = FidelityStats {
        count,
        min: fid_min,
        mean: (count > 0).then(|| fids_mean.iter().map(|(m, c)| m * *c as f64).sum::<f64>() / count as f64),
        max: fid_max,
    };
    let freq = arrived as f64 / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    r.exhaustive.insert("arrival".into(), expected);
    r.summary.insert("arrival_frequency".into(), freq);
    r.summary.insert("arrival_sigma".into(), sigma);
    r.summary.insert(
        "arrival_z".into(),
        if sigma > 0.0 { (freq - expected) / sigma } else { 0.0 },
    );
    r.summary.insert("segment_survival".into(), cfg.loss()?.survival()?);
    r.summary.insert("trials".into(), trials as f64);
    Ok(r)
}

fn verify_report(cfg: &ScenarioConfig) -> Result<Report> {
    let mut r = Report::new(cfg);
    r.checks = run_checks()?;
    let passed = r.checks.iter().filter(|c| c.pass).count();
    r.summary.insert("passed".into(), passed as f64);
    r.summary.insert("failed".into(), (r.checks.len() - passed) as f64);
    Ok(r)
}

/// Runs the scenario and builds its report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    match cfg.command {
        CommandKind::Teleport => teleport_report(cfg),
        CommandKind::Swap => swap_report(cfg),
        CommandKind::Chain => chain_report(cfg),
        CommandKind::Verify => verify_report(cfg),
    }
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round12(n.as_f64().expect("f64 number"));
            if let Some(m) = serde_json::Number::from_f64(x) {
                *n = m;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Report bytes in the requested format.
pub fn serialize_report(report: &Report, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut v = serde_json::to_value(report).map_err(|e| Error::Invariant(e.to_string()))?;
            round_value(&mut v);
            let mut out = serde_json::to_vec_pretty(&v).map_err(|e| Error::Invariant(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => Ok(to_csv(report).into_bytes()),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_csv(r: &Report) -> String {
    let mut out = String::from("section,label,probability,count\n");
    let labels: std::collections::BTreeSet<&String> = r.exhaustive.keys().chain(r.sampled.keys()).collect();
    for l in labels {
        let p = r.exhaustive.get(l).map(|p| round12(*p).to_string()).unwrap_or_default();
        let c = r.sampled.get(l).map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!("branch,{},{p},{c}\n", csv_field(l)));
    }
    for (name, v) in [("min", r.fidelity.min), ("mean", r.fidelity.mean), ("max", r.fidelity.max)] {
        let v = v.map(|x| round12(x).to_string()).unwrap_or_default();
        out.push_str(&format!("fidelity,{name},{v},{}\n", r.fidelity.count));
    }
    for (k, v) in &r.summary {
        out.push_str(&format!("summary,{},{},\n", csv_field(k), round12(*v)));
    }
    for c in &r.checks {
        out.push_str(&format!("check,{},{},\n", csv_field(&c.name), if c.pass { "PASS" } else { "FAIL" }));
    }
    out
}

fn command_name(c: CommandKind) -> &'static str {
    match c {
        CommandKind::Teleport => "teleport",
        CommandKind::Swap => "swap",
        CommandKind::Chain => "chain",
        CommandKind::Verify => "verify",
    }
}

/// Where the report goes: the explicit path, else the env directory.
fn report_path(cfg: &ScenarioConfig) -> Option<PathBuf> {
    if let Some(p) = &cfg.output {
        return Some(p.clone());
    }
    let dir = std::env::var_os(OUTPUT_DIR_ENV)?;
    let ext = match cfg.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    Some(PathBuf::from(dir).join(format!("{}-{}.{ext}", command_name(cfg.command), cfg.seed)))
}

/// Exit code for an error: 2 for bad input, 3 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::SurvivalOutOfRange(_) | Error::InvalidQubit(_) | Error::UnsupportedLabel(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_INTERNAL,
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let workers = cli.workers;
    let cfg = cli.scenario()?;
    let report = match workers {
        Some(0) => return Err(Error::InvalidConfig("workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invariant(e.to_string()))?
            .install(|| run_scenario(&cfg))?,
        None => run_scenario(&cfg)?,
    };
    let bytes = serialize_report(&report, cfg.format)?;
    let path = report_path(&cfg);
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if cfg.command == CommandKind::Verify {
        for c in &report.checks {
            let _ = writeln!(lock, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    match path {
        Some(p) => std::fs::write(&p, &bytes)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", p.display())))?,
        None if cfg.command != CommandKind::Verify => {
            let _ = lock.write_all(&bytes);
        }
        None => {}
    }
    let failed = report.checks.iter().any(|c| !c.pass);
    Ok(if failed { EXIT_INTERNAL } else { EXIT_OK })
}

/// Entry point: parses `argv`, runs, and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
