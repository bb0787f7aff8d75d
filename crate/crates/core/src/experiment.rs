//! Config-driven experiments: single runs and parameter sweeps.
//!
//! A run builds the topology and the trace, plays the periodic learner,
//! solves the periodic-static benchmark for the same partition, and writes
//! a run-log CSV, a regret report JSON and a benchmark JSON. Every file
//! written is listed with its SHA-256 in `manifest.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{
    dynamic_partition, solve_dynamic, solve_ops, solve_static, static_partition, BenchmarkSolution, SolverConfig,
};
use crate::cost::{lipschitz_bound, CostParams};
use crate::error::{Error, Result};
use crate::learner::{run_perone, LearnerConfig};
use crate::metrics::{
    benchmark_log, count_violations, raw_cost_regret, regret_from_series, theoretical_bound, LipschitzSource,
    RegretReport, RunLog,
};
use crate::topology::{build_topology, LocationGrid, RadioConfig, Topology};
use crate::traffic::{build_partition, generate_synthetic, load_trace_csv, SyntheticProfile, TrafficTrace};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySource {
    Generate { radio: RadioConfig, grid: LocationGrid },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    Synthetic {
        horizon: usize,
        seed: u64,
        profile: SyntheticProfile,
    },
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
}

/// Zones per period and their length. Give either `slots_per_zone`, or
/// `period_slots` to derive it as `period_slots / zones` (useful when
/// sweeping over `zones`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub zones: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots_per_zone: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_slots: Option<usize>,
}

impl PartitionConfig {
    fn slots_per_zone_for(&self, zones: usize) -> Result<usize> {
        match (self.slots_per_zone, self.period_slots) {
            (Some(z), None) => Ok(z),
            (None, Some(period)) => {
                if zones == 0 || period % zones != 0 {
                    Err(Error::config(
                        "partition.period_slots",
                        format!("{period} slots per period cannot be split into {zones} equal zones"),
                    ))
                } else {
                    Ok(period / zones)
                }
            }
            _ => Err(Error::config(
                "partition",
                "give exactly one of `slots_per_zone` and `period_slots`",
            )),
        }
    }
}

/// Learner step size: a fixed value or the bound-minimising one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "EtaRepr", into = "EtaRepr")]
pub enum EtaChoice {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EtaRepr {
    Value(f64),
    Keyword(String),
}

impl TryFrom<EtaRepr> for EtaChoice {
    type Error = String;

    fn try_from(r: EtaRepr) -> std::result::Result<Self, String> {
        match r {
            EtaRepr::Value(v) => Ok(EtaChoice::Fixed(v)),
            EtaRepr::Keyword(s) if s == "auto" => Ok(EtaChoice::Auto),
            EtaRepr::Keyword(s) => Err(format!("eta must be a number or \"auto\", got \"{s}\"")),
        }
    }
}

impl From<EtaChoice> for EtaRepr {
    fn from(e: EtaChoice) -> Self {
        match e {
            EtaChoice::Auto => EtaRepr::Keyword("auto".into()),
            EtaChoice::Fixed(v) => EtaRepr::Value(v),
        }
    }
}

impl std::fmt::Display for EtaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EtaChoice::Auto => f.write_str("auto"),
            EtaChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Extra hindsight benchmarks beyond the periodic one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkToggles {
    #[serde(default, rename = "static")]
    pub static_benchmark: bool,
    #[serde(default, rename = "dynamic")]
    pub dynamic_benchmark: bool,
}

/// Value lists for a sweep; a missing list keeps the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepLists {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zones: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<EtaChoice>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    pub trace: TraceSource,
    pub partition: PartitionConfig,
    pub cost: CostParams,
    #[serde(default)]
    pub eta: EtaChoice,
    #[serde(default)]
    pub benchmarks: BenchmarkToggles,
    #[serde(default)]
    pub lipschitz: LipschitzSource,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Also write the full run log as JSON.
    #[serde(default)]
    pub write_runlog_json: bool,
    /// Default output directory; `--out` overrides it.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepLists>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::config("config", e.to_string()))?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let TopologySource::File(p) = &mut cfg.topology {
            resolve(p);
        }
        if let TraceSource::Csv { path, .. } = &mut cfg.trace {
            resolve(path);
        }
        if let Some(out) = &mut cfg.output_dir {
            resolve(out);
        }
        Ok(cfg)
    }

    /// Replaces the synthetic trace seed.
    pub fn override_seed(&mut self, seed: u64) {
        if let TraceSource::Synthetic { seed: s, .. } = &mut self.trace {
            *s = seed;
        }
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        if let TopologySource::Generate { radio, grid } = &self.topology {
            radio.validate().map_err(|e| prefix_key("topology.generate.radio", e))?;
            if grid.columns == 0 || grid.rows == 0 {
                return Err(Error::config("topology.generate.grid", "needs at least one location"));
            }
            if !grid.spacing.is_finite() || grid.spacing <= 0.0 {
                return Err(Error::config("topology.generate.grid.spacing", "must be finite and > 0"));
            }
        }
        if let TraceSource::Synthetic { horizon, profile, .. } = &self.trace {
            if *horizon == 0 {
                return Err(Error::config("trace.synthetic.horizon", "must be at least 1"));
            }
            profile.validate().map_err(|e| prefix_key("trace.synthetic.profile", e))?;
        }
        if self.partition.zones == 0 {
            return Err(Error::config("partition.zones", "must be at least 1"));
        }
        self.partition.slots_per_zone_for(self.partition.zones)?;
        self.cost.validate().map_err(|e| prefix_key("cost", e))?;
        check_eta("eta", self.eta)?;
        self.solver.validate()?;
        if let Some(sweep) = &self.sweep {
            fn nonempty<T>(key: &str, v: &Option<Vec<T>>) -> Result<()> {
                match v {
                    Some(list) if list.is_empty() => Err(Error::config(key, "sweep list must not be empty")),
                    _ => Ok(()),
                }
            }
            nonempty("sweep.zones", &sweep.zones)?;
            nonempty("sweep.rho0", &sweep.rho0)?;
            nonempty("sweep.alpha", &sweep.alpha)?;
            nonempty("sweep.eta", &sweep.eta)?;
            for (n, e) in sweep.eta.iter().flatten().enumerate() {
                check_eta(&format!("sweep.eta[{n}]"), *e)?;
            }
        }
        Ok(())
    }

    /// The single combination described by the base settings.
    pub fn base_combination(&self) -> Combination {
        Combination {
            zones: self.partition.zones,
            rho0: self.cost.rho0,
            alpha: self.cost.alpha,
            eta: self.eta,
        }
    }

    /// Cartesian product of the sweep lists, in `zones, rho0, alpha, eta`
    /// order.
    pub fn sweep_combinations(&self) -> Result<Vec<Combination>> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("sweep", "sweep mode needs a `sweep` section"))?;
        let base = self.base_combination();
        let zones = sweep.zones.clone().unwrap_or_else(|| vec![base.zones]);
        let rho0 = sweep.rho0.clone().unwrap_or_else(|| vec![base.rho0]);
        let alpha = sweep.alpha.clone().unwrap_or_else(|| vec![base.alpha]);
        let eta = sweep.eta.clone().unwrap_or_else(|| vec![base.eta]);
        let mut out = Vec::new();
        for &k in &zones {
            for &r in &rho0 {
                for &a in &alpha {
                    for &e in &eta {
                        out.push(Combination {
                            zones: k,
                            rho0: r,
                            alpha: a,
                            eta: e,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

fn check_eta(key: &str, eta: EtaChoice) -> Result<()> {
    match eta {
        EtaChoice::Fixed(v) if !v.is_finite() || v <= 0.0 => {
            Err(Error::config(key, format!("must be a positive number or \"auto\", got {v}")))
        }
        _ => Ok(()),
    }
}

fn prefix_key(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { key, message } => Error::Config {
            key: format!("{prefix}.{key}"),
            message,
        },
        other => other,
    }
}

/// One point of the `(K, rho0, alpha, eta)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub zones: usize,
    pub rho0: f64,
    pub alpha: f64,
    pub eta: EtaChoice,
}

impl Combination {
    /// File-name stem, e.g. `K24_rho0.5_alpha0_etaauto`.
    pub fn tag(&self) -> String {
        format!("K{}_rho{}_alpha{}_eta{}", self.zones, self.rho0, self.alpha, self.eta)
    }
}

/// Topology and trace shared by every combination of an experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub trace: TrafficTrace,
}

pub fn build_topology_from(source: &TopologySource) -> Result<Topology> {
    match source {
        TopologySource::Generate { radio, grid } => build_topology(radio, &grid.positions()),
        TopologySource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Topology::from_json(&text)
        }
    }
}

pub fn build_trace_from(source: &TraceSource, n_locations: usize) -> Result<TrafficTrace> {
    match source {
        TraceSource::Synthetic { horizon, seed, profile } => generate_synthetic(n_locations, *horizon, *seed, profile),
        TraceSource::Csv { path, horizon } => load_trace_csv(path, n_locations, *horizon),
    }
}

impl Scenario {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let topology = build_topology_from(&config.topology)?;
        let trace = build_trace_from(&config.trace, topology.n_locations())?;
        Ok(Self { topology, trace })
    }
}

/// Step size actually used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedEta {
    pub eta: f64,
    pub auto: bool,
    /// Bound-minimising step for this run's `L`, when defined and positive.
    pub eta_star: Option<f64>,
    pub lipschitz: f64,
}

/// Everything one combination produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub combination: Combination,
    pub slots_per_zone: usize,
    pub resolved_eta: ResolvedEta,
    pub underflow_events: usize,
    pub benchmark_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamic_regret: Option<f64>,
    #[serde(flatten)]
    pub regret: RegretReport,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub log: RunLog,
    pub benchmark: BenchmarkSolution,
    pub static_benchmark: Option<BenchmarkSolution>,
    pub dynamic_benchmark: Option<BenchmarkSolution>,
}

/// Runs one combination in memory.
pub fn run_combination(config: &ExperimentConfig, scenario: &Scenario, combo: &Combination) -> Result<RunOutcome> {
    let Scenario { topology, trace } = scenario;
    let params = CostParams::new(combo.alpha, combo.rho0, config.cost.psi).map_err(|e| prefix_key("cost", e))?;
    check_eta("eta", combo.eta)?;
    let z = config.partition.slots_per_zone_for(combo.zones)?;
    let partition = build_partition(trace.horizon(), combo.zones, z).map_err(|e| prefix_key("partition", e))?;
    let (m_i, m_j) = topology.max_degrees();

    let analytic_l = lipschitz_bound(topology, trace.max_intensity(), &params)?;
    let star = theoretical_bound(combo.zones, trace.horizon(), analytic_l, 1.0, m_i, m_j, topology.n_locations())?
        .eta_star
        .filter(|e| *e > 0.0);
    let eta = match combo.eta {
        EtaChoice::Fixed(v) => v,
        // degenerate bound (no gradient or a single AP everywhere): nothing to tune
        EtaChoice::Auto => star.unwrap_or(1.0),
    };

    let log = run_perone(topology, trace, &partition, &params, &LearnerConfig::new(eta))?;
    let benchmark = solve_ops(topology, trace, &partition, &params, &config.solver)?;
    let bench_log = benchmark_log(&benchmark, trace, &partition, topology, &params)?;

    let online_costs = log.costs();
    let mut regret = regret_from_series(&online_costs, &bench_log.costs(), &partition);
    regret.violations_online = Some(count_violations(&log));
    regret.violations_benchmark = Some(count_violations(&bench_log));
    regret.raw_cost_regret = raw_cost_regret(&log, &bench_log, &params);
    let (l, source) = match config.lipschitz {
        LipschitzSource::Analytic => (analytic_l, LipschitzSource::Analytic),
        LipschitzSource::Empirical => (log.empirical_lipschitz(), LipschitzSource::Empirical),
    };
    regret.attach_bound(topology, l, source, eta)?;

    let online_total = regret.total_online_cost;
    let static_benchmark = if config.benchmarks.static_benchmark {
        Some(solve_static(topology, trace, &params, &config.solver)?)
    } else {
        None
    };
    let static_regret = match &static_benchmark {
        Some(b) => {
            let p = static_partition(trace.horizon())?;
            Some(online_total - benchmark_log(b, trace, &p, topology, &params)?.total_cost())
        }
        None => None,
    };
    let dynamic_benchmark = if config.benchmarks.dynamic_benchmark {
        Some(solve_dynamic(topology, trace, &params, &config.solver)?)
    } else {
        None
    };
    let dynamic_regret = match &dynamic_benchmark {
        Some(b) => {
            let p = dynamic_partition(trace.horizon())?;
            Some(online_total - benchmark_log(b, trace, &p, topology, &params)?.total_cost())
        }
        None => None,
    };

    Ok(RunOutcome {
        report: RunReport {
            combination: *combo,
            slots_per_zone: z,
            resolved_eta: ResolvedEta {
                eta,
                auto: combo.eta == EtaChoice::Auto,
                eta_star: star,
                lipschitz: analytic_l,
            },
            underflow_events: log.underflow_events,
            benchmark_converged: benchmark.all_converged(),
            static_regret,
            dynamic_regret,
            regret,
        },
        log,
        benchmark,
        static_benchmark,
        dynamic_benchmark,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub tag: String,
    pub combination: Combination,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved_eta: Option<ResolvedEta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark_converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
    pub files: Vec<ManifestFile>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes files into one directory and remembers their hashes.
struct OutputWriter {
    dir: PathBuf,
    files: Vec<ManifestFile>,
}

impl OutputWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestFile {
            name: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    fn write_outcome(&mut self, config: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
        let tag = outcome.report.combination.tag();
        self.write(&format!("{tag}.runlog.csv"), &outcome.log.to_csv())?;
        self.write(&format!("{tag}.regret.json"), &serde_json::to_string_pretty(&outcome.report)?)?;
        self.write(&format!("{tag}.benchmark.json"), &outcome.benchmark.to_json()?)?;
        if let Some(b) = &outcome.static_benchmark {
            self.write(&format!("{tag}.benchmark_static.json"), &b.to_json()?)?;
        }
        if let Some(b) = &outcome.dynamic_benchmark {
            self.write(&format!("{tag}.benchmark_dynamic.json"), &b.to_json()?)?;
        }
        if config.write_runlog_json {
            self.write(&format!("{tag}.runlog.json"), &outcome.log.to_json()?)?;
        }
        Ok(())
    }

    fn finish(self, config: &ExperimentConfig, runs: Vec<ManifestRun>) -> Result<Manifest> {
        let manifest = Manifest {
            config: config.clone(),
            runs,
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn manifest_entry(combo: &Combination, outcome: &Result<RunOutcome>) -> ManifestRun {
    match outcome {
        Ok(o) => ManifestRun {
            tag: combo.tag(),
            combination: *combo,
            resolved_eta: Some(o.report.resolved_eta),
            benchmark_converged: Some(o.report.benchmark_converged),
            error: None,
        },
        Err(e) => ManifestRun {
            tag: combo.tag(),
            combination: *combo,
            resolved_eta: None,
            benchmark_converged: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs the base combination and writes its artifacts plus the manifest.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<(Manifest, RunOutcome)> {
    config.validate()?;
    let scenario = Scenario::from_config(config)?;
    let combo = config.base_combination();
    let outcome = run_combination(config, &scenario, &combo)?;
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write_outcome(config, &outcome)?;
    let manifest = writer.finish(config, vec![manifest_entry(&combo, &Ok(outcome.clone()))])?;
    Ok((manifest, outcome))
}

/// One line of the consolidated sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub combination: Combination,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

impl SweepRow {
    fn csv_line(&self) -> String {
        let c = &self.combination;
        let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        match (&self.report, &self.error) {
            (Some(r), _) => {
                let reg = &r.regret;
                let bound = reg.bound.as_ref().map_or(String::new(), |b| b.terms.general.to_string());
                let v_on = reg.violations_online.map_or(0, |v| v.slot_ap);
                let v_b = reg.violations_benchmark.map_or(0, |v| v.slot_ap);
                format!(
                    "{},{},{},{},{},{},{},{},{},{},",
                    c.zones,
                    c.rho0,
                    c.alpha,
                    r.resolved_eta.eta,
                    reg.total_online_cost,
                    reg.total_benchmark_cost,
                    reg.regret,
                    bound,
                    v_on,
                    v_b
                )
            }
            (None, err) => format!(
                "{},{},{},{},,,,,,,{}",
                c.zones,
                c.rho0,
                c.alpha,
                c.eta,
                quote(err.as_deref().unwrap_or("unknown error"))
            ),
        }
    }
}

pub const SWEEP_HEADER: &str = "K,rho0,alpha,eta,total_online_cost,total_benchmark_cost,regret,bound,violations_online,violations_benchmark,error";

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub manifest: Manifest,
    pub rows: Vec<SweepRow>,
}

/// Runs every combination of the sweep lists, at most `jobs` at a time.
/// Failed combinations become rows with an error message.
pub fn sweep(config: &ExperimentConfig, out_dir: &Path, jobs: Option<usize>) -> Result<SweepOutcome> {
    config.validate()?;
    let combos = config.sweep_combinations()?;
    let scenario = Scenario::from_config(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("jobs", format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<RunOutcome>> =
        pool.install(|| combos.par_iter().map(|c| run_combination(config, &scenario, c)).collect());

    let mut writer = OutputWriter::new(out_dir)?;
    let mut runs = Vec::with_capacity(combos.len());
    let mut rows = Vec::with_capacity(combos.len());
    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for (combo, outcome) in combos.iter().zip(&outcomes) {
        runs.push(manifest_entry(combo, outcome));
        let row = match outcome {
            Ok(o) => {
                writer.write_outcome(config, o)?;
                SweepRow {
                    combination: *combo,
                    report: Some(o.report.clone()),
                    error: None,
                }
            }
            Err(e) => SweepRow {
                combination: *combo,
                report: None,
                error: Some(e.to_string()),
            },
        };
        table.push_str(&row.csv_line());
        table.push('\n');
        rows.push(row);
    }
    writer.write(SWEEP_FILE, &table)?;
    let manifest = writer.finish(config, runs)?;
    Ok(SweepOutcome { manifest, rows })
}
