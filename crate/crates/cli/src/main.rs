use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perone::experiment::{self, build_topology_from, build_trace_from, ExperimentConfig, Scenario, TopologySource};
use perone::Error;

#[derive(Parser)]
#[command(name = "perone", version, about = "Periodic online user association experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base configuration once.
    Run(Common),
    /// Run every combination of the sweep lists.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Maximum number of combinations run at once.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write the generated topology as JSON.
    GenTopology(Common),
    /// Write the synthetic trace as CSV.
    GenTrace(Common),
    /// Check the configuration and its inputs without running anything.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output_dir` from the config, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the synthetic trace seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> perone::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        cfg.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Config { .. } | Error::Json(_) | Error::Parse { .. } | Error::Domain(_) | Error::Topology(_) => 2,
        _ => 1,
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> perone::Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

fn execute(cli: Cli) -> perone::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, out) = common.load()?;
            let (manifest, outcome) = experiment::run_experiment(&cfg, &out)?;
            let r = &outcome.report;
            println!(
                "{}: regret {:.6} (online {:.6}, benchmark {:.6}), eta {}, benchmark converged: {}",
                r.combination.tag(),
                r.regret.regret,
                r.regret.total_online_cost,
                r.regret.total_benchmark_cost,
                r.resolved_eta.eta,
                r.benchmark_converged
            );
            println!("{} files written to {}", manifest.files.len() + 1, out.display());
        }
        Command::Sweep { common, jobs } => {
            let (cfg, out) = common.load()?;
            let outcome = experiment::sweep(&cfg, &out, jobs)?;
            let failed = outcome.rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} combinations ({} failed), table at {}",
                outcome.rows.len(),
                failed,
                out.join(experiment::SWEEP_FILE).display()
            );
        }
        Command::GenTopology(common) => {
            let (cfg, out) = common.load()?;
            if matches!(cfg.topology, TopologySource::File(_)) {
                return Err(Error::Config {
                    key: "topology".into(),
                    message: "gen-topology needs a `generate` topology source".into(),
                });
            }
            let topo = build_topology_from(&cfg.topology)?;
            let path = write_file(&out, "topology.json", &topo.to_json()?)?;
            println!(
                "{} APs, {} locations, {} links -> {}",
                topo.n_aps(),
                topo.n_locations(),
                topo.n_links(),
                path.display()
            );
        }
        Command::GenTrace(common) => {
            let (cfg, out) = common.load()?;
            let topo = build_topology_from(&cfg.topology)?;
            let trace = build_trace_from(&cfg.trace, topo.n_locations())?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let path = out.join("trace.csv");
            trace.write_csv(&path)?;
            println!(
                "{} slots x {} locations -> {}",
                trace.horizon(),
                trace.n_locations(),
                path.display()
            );
        }
        Command::Validate(common) => {
            let (cfg, _) = common.load()?;
            let scenario = Scenario::from_config(&cfg)?;
            let combos = match &cfg.sweep {
                Some(_) => cfg.sweep_combinations()?,
                None => vec![cfg.base_combination()],
            };
            let horizon = scenario.trace.horizon();
            for c in &combos {
                let z = match (cfg.partition.slots_per_zone, cfg.partition.period_slots) {
                    (Some(z), _) => z,
                    (None, Some(p)) => p / c.zones.max(1),
                    (None, None) => 0,
                };
                perone::traffic::build_partition(horizon, c.zones, z).map_err(|e| match e {
                    Error::Config { message, .. } => Error::Config {
                        key: "partition".into(),
                        message: format!("K={}: {message}", c.zones),
                    },
                    other => other,
                })?;
            }
            let (m_i, m_j) = scenario.topology.max_degrees();
            println!(
                "ok: {} APs, {} locations (M_I={m_i}, M_J={m_j}), {horizon} slots, {} combination(s)",
                scenario.topology.n_aps(),
                scenario.topology.n_locations(),
                combos.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
