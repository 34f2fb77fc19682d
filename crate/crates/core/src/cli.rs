//! Experiment front-end: config files, presets, seed sweeps and outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cultivation::CultivationParams;
use crate::engine::{
    assign_arrivals, run_simulation, solo_times, Ablation, ArrivalModel, MagicMode, MagicStats,
    Policy, SimConfig, SimTrace, WorkloadRecord, DEFAULT_HORIZON,
};
use crate::floorplan::{LayoutPattern, LayoutSpec, PortRule};
use crate::metrics::{self, mean_std, MetricsReport, WaitBreakdown};
use crate::workload::{sample_mix, GeneratorParams, MixCategory, PhaseModel, Workload, WorkloadMix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    Offline,
    Poisson,
    /// Uniform arrivals inside a window of `arrival_span_frac` of the summed
    /// solo times of the full mix.
    Window,
    Schedule,
}

/// Flat experiment configuration; every key has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub rows: u32,
    pub cols: u32,
    pub data_density: f64,
    pub layout_pattern: LayoutPattern,
    pub num_ports: u32,
    pub port_rule: PortRule,
    pub layout_seed: u64,

    pub mode: MagicMode,
    pub policy: Policy,
    pub ablation: Option<Ablation>,

    pub t_prep: u32,
    pub t_init_port: u32,
    #[serde(alias = "t_init_cultivation")]
    pub cultivation_latency: u32,
    pub p_fail: f64,
    pub core_reserve_frac: f64,
    pub park_patience: u64,

    pub phase_duration: u32,
    pub t_layer_duration: u32,
    pub routing_slack: u32,
    pub magic_lane_tiles: u32,

    pub mix: MixCategory,
    pub count: u32,
    /// Keep only the first `prefix` workloads of the sampled mix.
    pub prefix: Option<u32>,
    pub workloads_file: Option<PathBuf>,
    pub t_depth_min: u32,
    pub t_depth_max: u32,
    pub clifford_column_frac: f64,
    pub t_per_column_min: f64,
    pub t_per_column_max: f64,

    pub arrival: ArrivalKind,
    pub arrival_span_frac: f64,
    pub arrival_schedule: Vec<u64>,

    pub random_reach: u32,
    pub random_attempts: u32,
    pub horizon: u64,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        let sim = SimConfig::default();
        let phase = PhaseModel::default();
        let gen = GeneratorParams::default();
        let span = match sim.arrival {
            ArrivalModel::Poisson { span_frac } => span_frac,
            _ => unreachable!("default arrival is poisson"),
        };
        Self {
            rows: sim.layout.rows,
            cols: sim.layout.cols,
            data_density: sim.layout.data_density,
            layout_pattern: sim.layout.layout_pattern,
            num_ports: sim.layout.num_ports,
            port_rule: sim.layout.port_rule,
            layout_seed: sim.layout.seed,
            mode: sim.mode,
            policy: sim.policy,
            ablation: None,
            t_prep: sim.t_prep,
            t_init_port: sim.t_init_port,
            cultivation_latency: sim.cultivation.latency,
            p_fail: sim.cultivation.p_fail,
            core_reserve_frac: sim.core_reserve_frac,
            park_patience: sim.park_patience,
            phase_duration: phase.clifford_duration,
            t_layer_duration: phase.t_layer_duration,
            routing_slack: phase.routing_slack,
            magic_lane_tiles: phase.magic_lane_tiles,
            mix: MixCategory::Balanced,
            count: 100,
            prefix: None,
            workloads_file: None,
            t_depth_min: gen.t_depth_range.0,
            t_depth_max: gen.t_depth_range.1,
            clifford_column_frac: gen.clifford_column_frac,
            t_per_column_min: gen.t_per_column_frac.0,
            t_per_column_max: gen.t_per_column_frac.1,
            arrival: ArrivalKind::Poisson,
            arrival_span_frac: span,
            arrival_schedule: Vec::new(),
            random_reach: sim.random_reach,
            random_attempts: sim.random_attempts,
            horizon: DEFAULT_HORIZON,
            seed: 0,
        }
    }
}

impl Settings {
    /// Reads a TOML file (if any) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for kv in overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("override '{kv}' is not key=value"))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        toml::Value::Table(table)
            .try_into()
            .context("invalid configuration")
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            layout: LayoutSpec {
                rows: self.rows,
                cols: self.cols,
                data_density: self.data_density,
                layout_pattern: self.layout_pattern,
                num_ports: self.num_ports,
                port_rule: self.port_rule,
                seed: self.layout_seed,
            },
            mode: self.mode,
            policy: self.policy,
            ablation: self.ablation,
            phase_model: PhaseModel {
                clifford_duration: self.phase_duration,
                t_layer_duration: self.t_layer_duration,
                routing_slack: self.routing_slack,
                magic_lane_tiles: self.magic_lane_tiles,
            },
            t_prep: self.t_prep,
            t_init_port: self.t_init_port,
            cultivation: CultivationParams {
                latency: self.cultivation_latency,
                p_fail: self.p_fail,
            },
            core_reserve_frac: self.core_reserve_frac,
            park_patience: self.park_patience,
            random_reach: self.random_reach,
            random_attempts: self.random_attempts,
            arrival: ArrivalModel::Offline,
            horizon: self.horizon,
            seed,
        }
    }

    fn generator(&self) -> GeneratorParams {
        GeneratorParams {
            t_depth_range: (self.t_depth_min, self.t_depth_max),
            clifford_column_frac: self.clifford_column_frac,
            t_per_column_frac: (self.t_per_column_min, self.t_per_column_max),
        }
    }

    pub fn workloads(&self, seed: u64) -> Result<Vec<Workload>> {
        match &self.workloads_file {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
            None => Ok(sample_mix(&WorkloadMix {
                category: self.mix,
                count: self.count,
                seed,
                params: self.generator(),
            })),
        }
    }

    /// Everything the solo reference times depend on.
    fn solo_key(&self, seed: u64) -> String {
        let mut s = self.clone();
        s.policy = Policy::Proposed;
        s.ablation = None;
        s.prefix = None;
        s.arrival = ArrivalKind::Offline;
        s.arrival_span_frac = 0.0;
        s.arrival_schedule.clear();
        s.park_patience = 0;
        s.random_reach = 0;
        s.random_attempts = 0;
        format!("{}#{seed}", serde_json::to_string(&s).expect("serializable"))
    }

    fn prefix_key(&self, seed: u64) -> String {
        format!(
            "{}|{:?}|{}|{:?}|{:?}",
            self.solo_key(seed),
            self.arrival,
            self.arrival_span_frac,
            self.arrival_schedule,
            self.prefix
        )
    }
}

fn parse_value(v: &str) -> toml::Value {
    format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

/// Workloads with arrival times and their solo references, infeasible ones
/// removed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub workloads: Vec<Workload>,
    pub solo: Vec<Option<u64>>,
    pub excluded: usize,
}

pub fn prepare(settings: &Settings, seed: u64) -> Result<Prepared> {
    let full = settings.workloads(seed)?;
    let cfg = settings.sim_config(seed);
    let solo = solo_times(&cfg, &full)?;
    prepare_with(settings, seed, full, solo)
}

fn prepare_with(
    settings: &Settings,
    seed: u64,
    mut full: Vec<Workload>,
    solo: Vec<Option<u64>>,
) -> Result<Prepared> {
    let solo_sum: u64 = solo.iter().flatten().sum();
    let model = match settings.arrival {
        ArrivalKind::Offline => ArrivalModel::Offline,
        ArrivalKind::Poisson => ArrivalModel::Poisson {
            span_frac: settings.arrival_span_frac,
        },
        ArrivalKind::Window => ArrivalModel::Window {
            cycles: (settings.arrival_span_frac * solo_sum as f64).round() as u64,
        },
        ArrivalKind::Schedule => ArrivalModel::Schedule {
            cycles: settings.arrival_schedule.clone(),
        },
    };
    if settings.workloads_file.is_none() || settings.arrival != ArrivalKind::Offline {
        assign_arrivals(&mut full, &model, solo_sum, seed)?;
    }
    let keep = settings.prefix.map_or(full.len(), |p| (p as usize).min(full.len()));
    let mut workloads = Vec::with_capacity(keep);
    let mut kept_solo = Vec::with_capacity(keep);
    let mut excluded = 0;
    for (w, s) in full.into_iter().zip(solo).take(keep) {
        if s.is_some() {
            workloads.push(w);
            kept_solo.push(s);
        } else {
            excluded += 1;
        }
    }
    Ok(Prepared {
        workloads,
        solo: kept_solo,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSummary {
    #[serde(flatten)]
    pub record: WorkloadRecord,
    pub solo: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub excluded_infeasible: usize,
    pub horizon_reached: bool,
    pub incomplete: Vec<crate::workload::WorkloadId>,
    pub magic: MagicStats,
    pub occupancy_digest: String,
    pub violations: Vec<String>,
    pub workloads: Vec<WorkloadSummary>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub label: String,
    pub seed: u64,
    pub summary: RunSummary,
    pub trace: SimTrace,
}

pub fn run_prepared(label: &str, settings: &Settings, seed: u64, prep: &Prepared) -> Result<RunOutcome> {
    let cfg = settings.sim_config(seed);
    let trace = run_simulation(&cfg, &prep.workloads)?;
    let report = metrics::report(&trace, &prep.solo)?;
    let summary = RunSummary {
        label: label.to_string(),
        seed,
        metrics: report,
        excluded_infeasible: prep.excluded,
        horizon_reached: trace.horizon_reached,
        incomplete: trace.incomplete.clone(),
        magic: trace.magic,
        occupancy_digest: format!("{:016x}", trace.occupancy_digest),
        violations: trace.violations.clone(),
        workloads: trace
            .workloads
            .iter()
            .zip(&prep.solo)
            .map(|(r, &solo)| WorkloadSummary {
                record: r.clone(),
                solo,
            })
            .collect(),
    };
    Ok(RunOutcome {
        label: label.to_string(),
        seed,
        summary,
        trace,
    })
}

/// One named configuration of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub label: String,
    pub settings: Settings,
}

impl Arm {
    pub fn new(label: impl Into<String>, settings: Settings) -> Self {
        Self {
            label: label.into(),
            settings,
        }
    }
}

pub const PRESETS: [&str; 6] = ["rq1", "rq2-ablation", "rq2-scaling", "rq3", "rq4", "custom"];

/// Ports scaled with the boundary length of the default floorplan.
pub fn scaled_ports(rows: u32, cols: u32) -> u32 {
    let base = LayoutSpec::default();
    let boundary = |r: u32, c: u32| (2 * (r + c) - 4) as f64;
    (base.num_ports as f64 * boundary(rows, cols) / boundary(base.rows, base.cols)).round() as u32
}

/// Arms of a named preset, built on top of `base`.
pub fn preset_arms(name: &str, base: &Settings) -> Result<Vec<Arm>> {
    let with = |f: &dyn Fn(&mut Settings)| {
        let mut s = base.clone();
        f(&mut s);
        s
    };
    let policies = [
        ("proposed", Policy::Proposed),
        ("naive", Policy::Naive),
        ("random", Policy::Random),
    ];
    Ok(match name {
        "rq1" => policies
            .iter()
            .map(|&(l, p)| Arm::new(l, with(&|s| s.policy = p)))
            .collect(),
        "rq2-ablation" => [Ablation::C0, Ablation::C1, Ablation::C2, Ablation::C3]
            .into_iter()
            .map(|a| Arm::new(format!("{a:?}"), with(&|s| s.ablation = Some(a))))
            .collect(),
        "rq2-scaling" => {
            let sizes = [(20, 12, 100), (30, 18, 250), (40, 24, 400), (60, 36, 900)];
            let mut arms = Vec::new();
            for (rows, cols, count) in sizes {
                for &(l, p) in &policies {
                    arms.push(Arm::new(
                        format!("{rows}x{cols}-{l}"),
                        with(&|s| {
                            s.rows = rows;
                            s.cols = cols;
                            s.num_ports = scaled_ports(rows, cols);
                            s.count = count;
                            s.policy = p;
                        }),
                    ));
                }
            }
            arms
        }
        "rq3" => {
            let mut arms = Vec::new();
            for mix in MixCategory::ALL {
                for n in [25u32, 50, 75, 100] {
                    arms.push(Arm::new(
                        format!("{}-n{n}", mix.name()),
                        with(&|s| {
                            s.mix = mix;
                            s.count = 100;
                            s.prefix = Some(n);
                            s.arrival = ArrivalKind::Window;
                            s.arrival_span_frac = RQ3_WINDOW_FRAC;
                        }),
                    ));
                }
            }
            arms
        }
        "rq4" => vec![
            Arm::new(
                "ports",
                with(&|s| {
                    s.mode = MagicMode::Ports;
                    s.num_ports = 1;
                }),
            ),
            Arm::new("cultivation", with(&|s| s.mode = MagicMode::Cultivation)),
        ],
        "custom" => vec![Arm::new("custom", base.clone())],
        other => bail!("unknown preset '{other}' (expected one of {})", PRESETS.join(", ")),
    })
}

/// Arrival window of the queue-pressure preset, as a share of the summed solo
/// times of the full 100-workload mix.
pub const RQ3_WINDOW_FRAC: f64 = 3.0;

/// Runs every arm for every seed. Solo references are shared between arms
/// that only differ in policy. Per-run failures are reported, not fatal.
pub fn run_sweep(arms: &[Arm], seeds: &[u64]) -> Vec<(String, u64, Result<RunOutcome, String>)> {
    let mut solo_jobs: BTreeMap<String, (Settings, u64)> = BTreeMap::new();
    for arm in arms {
        for &seed in seeds {
            solo_jobs
                .entry(arm.settings.solo_key(seed))
                .or_insert_with(|| (arm.settings.clone(), seed));
        }
    }
    let solo: BTreeMap<String, Result<(Vec<Workload>, Vec<Option<u64>>), String>> = solo_jobs
        .into_par_iter()
        .map(|(key, (settings, seed))| {
            let res = (|| -> Result<_> {
                let ws = settings.workloads(seed)?;
                let solo = solo_times(&settings.sim_config(seed), &ws)?;
                Ok((ws, solo))
            })()
            .map_err(|e| format!("{e:#}"));
            (key, res)
        })
        .collect();

    let mut prepared: BTreeMap<String, Result<Prepared, String>> = BTreeMap::new();
    for arm in arms {
        for &seed in seeds {
            let key = arm.settings.prefix_key(seed);
            if prepared.contains_key(&key) {
                continue;
            }
            let p = match &solo[&arm.settings.solo_key(seed)] {
                Ok((ws, s)) => prepare_with(&arm.settings, seed, ws.clone(), s.clone())
                    .map_err(|e| format!("{e:#}")),
                Err(e) => Err(e.clone()),
            };
            prepared.insert(key, p);
        }
    }

    let jobs: Vec<(&Arm, u64)> = arms
        .iter()
        .flat_map(|a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(arm, seed)| {
            let res = match &prepared[&arm.settings.prefix_key(seed)] {
                Ok(p) => run_prepared(&arm.label, &arm.settings, seed, p).map_err(|e| format!("{e:#}")),
                Err(e) => Err(e.clone()),
            };
            (arm.label.clone(), seed, res)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmAggregate {
    pub label: String,
    pub runs: usize,
    pub failures: Vec<String>,
    pub eta_mean: f64,
    pub eta_std: f64,
    pub slowdown_mean: f64,
    pub slowdown_std: f64,
    pub waits: WaitBreakdown,
    pub waits_std: WaitBreakdown,
    pub cmax_mean: f64,
    pub cmax_at_peak: f64,
}

/// Per-arm mean and standard deviation across seeds, in arm order.
pub fn aggregate(arms: &[Arm], runs: &[(String, u64, Result<RunSummary, String>)]) -> Vec<ArmAggregate> {
    arms.iter()
        .map(|arm| {
            let mut ok: Vec<&RunSummary> = Vec::new();
            let mut failures = Vec::new();
            for (label, seed, r) in runs {
                if *label != arm.label {
                    continue;
                }
                match r {
                    Ok(s) => ok.push(s),
                    Err(e) => failures.push(format!("seed {seed}: {e}")),
                }
            }
            let col = |f: &dyn Fn(&RunSummary) -> f64| -> (f64, f64) {
                mean_std(&ok.iter().map(|s| f(s)).collect::<Vec<_>>())
            };
            let (eta_mean, eta_std) = col(&|s| s.metrics.eta);
            let (slowdown_mean, slowdown_std) = col(&|s| s.metrics.mean_slowdown);
            let q = col(&|s| s.metrics.waits.queue);
            let p = col(&|s| s.metrics.waits.parked);
            let wp = col(&|s| s.metrics.waits.wait_primary);
            let ws = col(&|s| s.metrics.waits.wait_secondary);
            ArmAggregate {
                label: arm.label.clone(),
                runs: ok.len(),
                failures,
                eta_mean,
                eta_std,
                slowdown_mean,
                slowdown_std,
                waits: WaitBreakdown {
                    queue: q.0,
                    parked: p.0,
                    wait_primary: wp.0,
                    wait_secondary: ws.0,
                },
                waits_std: WaitBreakdown {
                    queue: q.1,
                    parked: p.1,
                    wait_primary: wp.1,
                    wait_secondary: ws.1,
                },
                cmax_mean: col(&|s| s.metrics.cmax.mean).0,
                cmax_at_peak: col(&|s| s.metrics.cmax.at_peak).0,
            }
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    let stem = format!("{}_s{}", outcome.label, outcome.seed);
    fs::write(dir.join(format!("{stem}.csv")), outcome.trace.to_csv())
        .with_context(|| format!("writing {stem}.csv"))?;
    write_json(&dir.join(format!("{stem}.json")), &outcome.summary)
}

fn summary_csv(runs: &[(String, u64, Result<RunSummary, String>)]) -> String {
    let mut out = String::from(
        "label,seed,eta,mean_slowdown,wait_queue,wait_parked,wait_primary,wait_secondary,cmax_mean,cmax_at_peak\n",
    );
    for (label, seed, r) in runs {
        if let Ok(s) = r {
            let m = &s.metrics;
            out.push_str(&format!(
                "{label},{seed},{:.6},{:.6},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6}\n",
                m.eta,
                m.mean_slowdown,
                m.waits.queue,
                m.waits.parked,
                m.waits.wait_primary,
                m.waits.wait_secondary,
                m.cmax.mean,
                m.cmax.at_peak
            ));
        }
    }
    out
}

#[derive(Debug, Parser)]
#[command(name = "tilemux", version, about = "Surface-code floorplan multiprogramming simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set policy=naive`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a preset over several seeds.
    Sweep {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sample a workload mix to a JSON file.
    GenWorkloads {
        #[arg(long)]
        mix: MixCategory,
        #[arg(long)]
        count: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct SweepAggregate<'a> {
    preset: &'a str,
    seeds: &'a [u64],
    arms: Vec<ArmAggregate>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            set,
            seed,
            out,
        } => {
            let settings = Settings::load(config.as_deref(), &set)?;
            let seed = seed.unwrap_or(settings.seed);
            let prep = prepare(&settings, seed)?;
            let outcome = run_prepared("run", &settings, seed, &prep)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_run(&out, &outcome)?;
            let m = &outcome.summary.metrics;
            println!(
                "{}",
                serde_json::json!({
                    "eta": m.eta,
                    "eta_partial": m.eta_partial,
                    "mean_slowdown": m.mean_slowdown,
                    "makespan": m.makespan,
                    "completed": m.completed,
                    "violations": outcome.summary.violations.len(),
                })
            );
            Ok(())
        }
        Command::Sweep {
            preset,
            config,
            set,
            seeds,
            jobs,
            out,
        } => {
            if seeds.is_empty() {
                bail!("--seeds must list at least one seed");
            }
            let base = Settings::load(config.as_deref(), &set)?;
            let arms = preset_arms(&preset, &base)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .context("building thread pool")?;
            let results = pool.install(|| run_sweep(&arms, &seeds));
            let runs_dir = out.join("runs");
            fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;
            let mut summaries = Vec::with_capacity(results.len());
            for (label, seed, r) in results {
                match r {
                    Ok(outcome) => {
                        write_run(&runs_dir, &outcome)?;
                        summaries.push((label, seed, Ok(outcome.summary)));
                    }
                    Err(e) => {
                        eprintln!("{}", serde_json::json!({"run": label, "seed": seed, "error": e}));
                        summaries.push((label, seed, Err(e)));
                    }
                }
            }
            let agg = aggregate(&arms, &summaries);
            write_json(
                &out.join("aggregate.json"),
                &SweepAggregate {
                    preset: &preset,
                    seeds: &seeds,
                    arms: agg.clone(),
                },
            )?;
            fs::write(out.join("summary.csv"), summary_csv(&summaries))?;
            for a in &agg {
                println!(
                    "{:<16} eta {:.3} ± {:.3}  slowdown {:.3} ± {:.3}  wait_secondary {:.2}%",
                    a.label, a.eta_mean, a.eta_std, a.slowdown_mean, a.slowdown_std, a.waits.wait_secondary
                );
            }
            Ok(())
        }
        Command::GenWorkloads {
            mix,
            count,
            seed,
            out,
        } => {
            if count == 0 {
                bail!("--count must be at least 1");
            }
            let ws = sample_mix(&WorkloadMix::new(mix, count, seed));
            write_json(&out, &ws)
        }
    }
}
