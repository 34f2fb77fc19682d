//! Cycle-level simulation: one tick is one surface-code cycle.
//!
//! Tick order: arrivals, admission + placement, boundary arbitration, magic
//! service, phase advance, trace row.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cultivation::{assign_magic, CultivationField, CultivationParams};
use crate::floorplan::{FloorplanError, FloorplanGraph, LayoutSpec, Occupancy, TileClass, TileId};
use crate::placement::Core;
use crate::policies::{
    ancilla_arbitrate, commit_port, fifo_admit, fifo_arbitrate, online_admit,
    port_latencies, random_idle_port, serve_port_requests, AdmissionCandidate, AdmissionLimits,
    AdmissionMode, AncillaPools, BoundaryRequest, Decision, MagicRequest, ParkedInfo,
    PlacementMode, PortModel, PortRequest, WorkloadState,
};
use crate::workload::{phase_sequence, PhaseDescriptor, PhaseModel, SizeClass, Workload, WorkloadId};

pub const DEFAULT_HORIZON: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagicMode {
    Ports,
    Cultivation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Proposed,
    Naive,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    C0,
    C1,
    C2,
    C3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitrationMode {
    Hierarchy,
    Fifo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortPolicy {
    /// Earliest delivery, contention resolved oldest-first.
    Arbitrated,
    /// Always the nearest port, requests in workload order.
    NearestFixed,
    /// Uniform among idle ports.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub placement: PlacementMode,
    pub arbitration: ArbitrationMode,
    pub admission: AdmissionMode,
    pub ports: PortPolicy,
}

impl Components {
    pub fn of(policy: Policy, ablation: Option<Ablation>) -> Self {
        use AdmissionMode as Ad;
        use ArbitrationMode as Ar;
        let c = |placement, arbitration, admission, ports| Components {
            placement,
            arbitration,
            admission,
            ports,
        };
        if let Some(a) = ablation {
            return match a {
                Ablation::C0 => c(PlacementMode::Random, Ar::Fifo, Ad::Fifo, PortPolicy::Arbitrated),
                Ablation::C1 => c(PlacementMode::Compact, Ar::Fifo, Ad::Fifo, PortPolicy::Arbitrated),
                Ablation::C2 => c(PlacementMode::Compact, Ar::Hierarchy, Ad::Fifo, PortPolicy::Arbitrated),
                Ablation::C3 => Self::of(Policy::Proposed, None),
            };
        }
        match policy {
            Policy::Proposed => c(PlacementMode::Compact, Ar::Hierarchy, Ad::Online, PortPolicy::Arbitrated),
            Policy::Naive => c(PlacementMode::Compact, Ar::Fifo, Ad::Online, PortPolicy::NearestFixed),
            Policy::Random => c(PlacementMode::Random, Ar::Fifo, Ad::Fifo, PortPolicy::Random),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalModel {
    /// Everything arrives at cycle 0.
    Offline,
    /// Exponential gaps; the mean span is `span_frac` of the summed solo times.
    Poisson { span_frac: f64 },
    /// Independent uniform arrival cycle per workload in `[0, cycles)`.
    Window { cycles: u64 },
    /// Explicit arrival cycles, one per workload.
    Schedule { cycles: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub layout: LayoutSpec,
    pub mode: MagicMode,
    pub policy: Policy,
    pub ablation: Option<Ablation>,
    pub phase_model: PhaseModel,
    pub t_prep: u32,
    pub t_init_port: u32,
    pub cultivation: CultivationParams,
    /// Share of the ancilla kept out of the core budget.
    pub core_reserve_frac: f64,
    /// Cycles a secondary request may wait before backfilling stops and
    /// residents may be parked on its behalf.
    pub park_patience: u64,
    pub random_reach: u32,
    pub random_attempts: u32,
    pub arrival: ArrivalModel,
    pub horizon: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            layout: LayoutSpec::default(),
            mode: MagicMode::Ports,
            policy: Policy::Proposed,
            ablation: None,
            phase_model: PhaseModel::default(),
            t_prep: 11,
            t_init_port: 11,
            cultivation: CultivationParams::default(),
            core_reserve_frac: 0.25,
            park_patience: 256,
            random_reach: 0,
            random_attempts: 1,
            arrival: ArrivalModel::Poisson { span_frac: 0.1 },
            horizon: DEFAULT_HORIZON,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn components(&self) -> Components {
        Components::of(self.policy, self.ablation)
    }

    /// Floorplan for this config; cultivation mode has no ports.
    pub fn floorplan(&self) -> Result<FloorplanGraph, SimError> {
        let g = FloorplanGraph::build(&self.layout)?;
        Ok(match self.mode {
            MagicMode::Ports => g,
            MagicMode::Cultivation => g.without_ports(),
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..1.0).contains(&self.core_reserve_frac) {
            return Err(SimError::Config(format!(
                "core_reserve_frac {} outside [0, 1)",
                self.core_reserve_frac
            )));
        }
        if !(0.0..=1.0).contains(&self.cultivation.p_fail) {
            return Err(SimError::Config(format!("p_fail {} outside [0, 1]", self.cultivation.p_fail)));
        }
        if self.cultivation.latency == 0 {
            return Err(SimError::Config("cultivation_latency must be positive".into()));
        }
        if self.mode == MagicMode::Ports && self.layout.num_ports == 0 {
            return Err(SimError::Config("ports mode needs at least one port".into()));
        }
        if let ArrivalModel::Poisson { span_frac } = self.arrival {
            if !(span_frac >= 0.0 && span_frac.is_finite()) {
                return Err(SimError::Config(format!("span_frac {span_frac} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Floorplan(#[from] FloorplanError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("workload {0} has no circuit columns")]
    NoColumns(WorkloadId),
    #[error("schedule lists {got} arrivals for {want} workloads")]
    Schedule { got: usize, want: usize },
}

/// Per-tick aggregate; consecutive equal rows are stored once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TickRow {
    pub free_total: u32,
    pub largest_free: u32,
    pub n_running: u32,
    pub n_parked: u32,
    pub n_waitp: u32,
    pub n_waits: u32,
}

impl TickRow {
    pub fn cmax_frac(&self) -> f64 {
        if self.free_total == 0 {
            1.0
        } else {
            self.largest_free as f64 / self.free_total as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRun {
    pub start: u64,
    pub len: u64,
    pub row: TickRow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub t: u64,
    pub workload: WorkloadId,
    pub from: WorkloadState,
    pub to: WorkloadState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadRecord {
    pub id: WorkloadId,
    pub qubits: u32,
    pub class: Option<SizeClass>,
    pub arrival: u64,
    pub admitted: Option<u64>,
    pub completed: Option<u64>,
    /// Cycles spent in each state, indexed by `WorkloadState::index`.
    pub dwell: [u64; 7],
    pub parks: u32,
    /// Never admissible on this floorplan; excluded from metrics.
    pub infeasible: bool,
}

impl WorkloadRecord {
    pub fn lifetime(&self) -> Option<u64> {
        self.completed.map(|c| c - self.arrival)
    }

    pub fn dwell_in(&self, s: WorkloadState) -> u64 {
        self.dwell[s.index()]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagicStats {
    pub requested: u64,
    pub delivered: u64,
    pub consumed: u64,
    pub escapes: u64,
    /// Deliveries by any single port inside one `t_prep` window, maximum.
    pub port_window_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub makespan: u64,
    pub rows: Vec<RowRun>,
    pub workloads: Vec<WorkloadRecord>,
    pub transitions: Vec<Transition>,
    pub horizon_reached: bool,
    pub incomplete: Vec<WorkloadId>,
    pub magic: MagicStats,
    pub occupancy_digest: u64,
    pub violations: Vec<String>,
    pub total_tiles: u32,
    pub free_tiles_total: u32,
}

impl SimTrace {
    pub fn tick_rows(&self) -> impl Iterator<Item = (u64, TickRow)> + '_ {
        self.rows
            .iter()
            .flat_map(|r| (r.start..r.start + r.len).map(move |t| (t, r.row)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,free_total,cmax_frac,n_running,n_parked,n_waitp,n_waits\n");
        for (t, r) in self.tick_rows() {
            out.push_str(&format!(
                "{t},{},{:.6},{},{},{},{}\n",
                r.free_total,
                r.cmax_frac(),
                r.n_running,
                r.n_parked,
                r.n_waitp,
                r.n_waits
            ));
        }
        out
    }

    pub fn completed_all(&self) -> bool {
        self.incomplete.is_empty()
    }
}

/// Assigns arrival cycles in place. `solo_sum` scales the Poisson span.
pub fn assign_arrivals(
    workloads: &mut [Workload],
    model: &ArrivalModel,
    solo_sum: u64,
    seed: u64,
) -> Result<(), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    match model {
        ArrivalModel::Offline => workloads.iter_mut().for_each(|w| w.arrival_time = 0),
        ArrivalModel::Poisson { span_frac } => {
            let n = workloads.len().max(1) as f64;
            let mean_gap = span_frac * solo_sum as f64 / n;
            let mut clock = 0.0f64;
            for (k, w) in workloads.iter_mut().enumerate() {
                if k > 0 && mean_gap > 0.0 {
                    clock += Exp::new(1.0 / mean_gap).expect("positive rate").sample(&mut rng);
                }
                w.arrival_time = clock.round() as u64;
            }
        }
        ArrivalModel::Window { cycles } => {
            for w in workloads.iter_mut() {
                w.arrival_time = rng.gen_range(0..(*cycles).max(1));
            }
        }
        ArrivalModel::Schedule { cycles } => {
            if cycles.len() != workloads.len() {
                return Err(SimError::Schedule {
                    got: cycles.len(),
                    want: workloads.len(),
                });
            }
            for (w, &c) in workloads.iter_mut().zip(cycles) {
                w.arrival_time = c;
            }
        }
    }
    Ok(())
}

struct Active {
    phase: PhaseDescriptor,
    tiles: Vec<TileId>,
    /// Magic states not yet assigned (cultivation) or requested (ports).
    magic_left: u32,
    first: Option<u64>,
    last: u64,
    end: Option<u64>,
}

struct Live {
    id: WorkloadId,
    qubits: u32,
    phases: Vec<PhaseDescriptor>,
    arrival: u64,
    state: Option<WorkloadState>,
    data: Vec<TileId>,
    core: Core,
    footprint: Vec<TileId>,
    latencies: Vec<u32>,
    /// Qubit indices of the T gates in each column.
    t_qubits: Vec<Vec<u32>>,
    /// Nearest port of each qubit's data tile (fixed-port policy only).
    qubit_ports: Vec<usize>,
    next_phase: usize,
    since: u64,
    active: Option<Active>,
    parked_at: Option<u64>,
}

impl Live {
    fn resident(&self) -> bool {
        self.state.is_some_and(|s| s.is_resident())
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    comp: Components,
    g: &'a FloorplanGraph,
    occ: Occupancy,
    core_mask: Vec<bool>,
    resident_core_total: usize,
    core_budget: usize,
    ports: Vec<PortModel>,
    field: Option<CultivationField>,
    /// Workloads waiting for ready states, in request order.
    magic_queue: Vec<usize>,
    live: Vec<Live>,
    records: Vec<WorkloadRecord>,
    transitions: Vec<Transition>,
    rows: Vec<RowRun>,
    magic: MagicStats,
    violations: Vec<String>,
    place_rng: ChaCha8Rng,
    port_rng: ChaCha8Rng,
    tile_rng: ChaCha8Rng,
    admission_dirty: bool,
    core_blocked: bool,
    occ_version: u64,
    digest: DefaultHasher,
    digested_version: u64,
    audited_version: u64,
    admit_version: u64,
    summary_version: u64,
    free_summary: (usize, usize),
    port_deliveries: Vec<Vec<u64>>,
}

/// Runs one shared simulation. Arrival times are taken from the workloads.
pub fn run_simulation(cfg: &SimConfig, workloads: &[Workload]) -> Result<SimTrace, SimError> {
    let g = cfg.floorplan()?;
    run_on(cfg, &g, workloads, false)
}

/// Solo completion time of one workload, arriving at cycle 0 on an otherwise
/// empty floorplan with the proposed mechanics and warm magic-state sources.
/// `None` when the workload cannot be placed.
pub fn run_solo(cfg: &SimConfig, g: &FloorplanGraph, w: &Workload) -> Result<Option<u64>, SimError> {
    let mut solo_cfg = cfg.clone();
    solo_cfg.policy = Policy::Proposed;
    solo_cfg.ablation = None;
    let mut w = w.clone();
    w.arrival_time = 0;
    let trace = run_on(&solo_cfg, g, std::slice::from_ref(&w), true)?;
    Ok(trace.workloads[0].completed)
}

/// Solo times for a batch, computed in parallel.
pub fn solo_times(cfg: &SimConfig, workloads: &[Workload]) -> Result<Vec<Option<u64>>, SimError> {
    use rayon::prelude::*;
    let g = cfg.floorplan()?;
    workloads.par_iter().map(|w| run_solo(cfg, &g, w)).collect()
}

fn run_on(
    cfg: &SimConfig,
    g: &FloorplanGraph,
    workloads: &[Workload],
    warm: bool,
) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg, g, workloads, warm)?;
    let order = {
        let mut o: Vec<usize> = (0..sim.live.len()).collect();
        o.sort_by_key(|&i| (sim.live[i].arrival, sim.live[i].id));
        o
    };
    let mut remaining = sim.records.iter().filter(|r| !r.infeasible).count();
    let mut next_arrival = 0usize;
    let mut t = 0u64;
    let mut horizon_reached = false;
    while remaining > 0 {
        if t >= cfg.horizon {
            horizon_reached = true;
            break;
        }
        // Nothing resident and nothing queued: jump to the next arrival.
        if !sim.live.iter().any(|l| l.state.is_some_and(|s| s != WorkloadState::Complete)) {
            while next_arrival < order.len() && sim.records[order[next_arrival]].infeasible {
                next_arrival += 1;
            }
            if let Some(&i) = order.get(next_arrival) {
                if sim.live[i].arrival > t {
                    let idle = sim.live[i].arrival - t;
                    sim.push_row(t, idle);
                    t = sim.live[i].arrival;
                }
            }
        }
        while next_arrival < order.len() && sim.live[order[next_arrival]].arrival <= t {
            let i = order[next_arrival];
            next_arrival += 1;
            if !sim.records[i].infeasible {
                sim.live[i].state = Some(WorkloadState::Queue);
                sim.admission_dirty = true;
            }
        }
        remaining -= sim.admit(t);
        sim.arbitrate(t);
        sim.serve_magic(t);
        sim.count_dwell();
        remaining -= sim.advance(t);
        sim.audit(t);
        sim.push_row(t, 1);
        t += 1;
    }
    Ok(sim.finish(t, horizon_reached))
}

impl<'a> Sim<'a> {
    fn new(
        cfg: &'a SimConfig,
        g: &'a FloorplanGraph,
        workloads: &[Workload],
        warm: bool,
    ) -> Result<Self, SimError> {
        let data_total = g.count_of(TileClass::Data) as u32;
        let ancilla_total = g.count_of(TileClass::Ancilla);
        let mut live = Vec::with_capacity(workloads.len());
        let mut records = Vec::with_capacity(workloads.len());
        for w in workloads {
            if w.columns == 0 {
                return Err(SimError::NoColumns(w.id));
            }
            live.push(Live {
                id: w.id,
                qubits: w.qubits,
                phases: phase_sequence(w, &cfg.phase_model),
                arrival: w.arrival_time,
                state: None,
                data: Vec::new(),
                core: Core::default(),
                footprint: Vec::new(),
                latencies: Vec::new(),
                t_qubits: w
                    .t_gates
                    .iter()
                    .map(|col| col.iter().map(|g| g.qubit).collect())
                    .collect(),
                qubit_ports: Vec::new(),
                next_phase: 0,
                since: 0,
                active: None,
                parked_at: None,
            });
            records.push(WorkloadRecord {
                id: w.id,
                qubits: w.qubits,
                class: w.class,
                arrival: w.arrival_time,
                admitted: None,
                completed: None,
                dwell: [0; 7],
                parks: 0,
                infeasible: w.qubits > data_total || w.qubits == 0,
            });
        }
        let ports = match cfg.mode {
            MagicMode::Ports => g
                .tiles_of(TileClass::MagicPort)
                .into_iter()
                .map(|p| {
                    let m = PortModel::new(p, cfg.t_init_port, cfg.t_prep);
                    if warm {
                        m.warmed()
                    } else {
                        m
                    }
                })
                .collect(),
            MagicMode::Cultivation => Vec::new(),
        };
        let field = match cfg.mode {
            MagicMode::Ports => None,
            MagicMode::Cultivation if warm => Some(CultivationField::prewarmed(g, cfg.cultivation)),
            MagicMode::Cultivation => Some(CultivationField::new(g, cfg.cultivation)),
        };
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(k);
            r
        };
        let reserve = (cfg.core_reserve_frac * ancilla_total as f64).floor() as usize;
        let n_ports = ports.len();
        Ok(Self {
            cfg,
            comp: cfg.components(),
            g,
            occ: Occupancy::for_graph(g),
            core_mask: vec![false; g.len()],
            resident_core_total: 0,
            core_budget: ancilla_total - reserve,
            ports,
            field,
            magic_queue: Vec::new(),
            live,
            records,
            transitions: Vec::new(),
            rows: Vec::new(),
            magic: MagicStats::default(),
            violations: Vec::new(),
            place_rng: stream(1),
            port_rng: stream(2),
            tile_rng: stream(3),
            admission_dirty: false,
            core_blocked: false,
            occ_version: 0,
            digest: DefaultHasher::new(),
            digested_version: u64::MAX,
            audited_version: u64::MAX,
            admit_version: u64::MAX,
            summary_version: u64::MAX,
            free_summary: (0, 0),
            port_deliveries: vec![Vec::new(); n_ports],
        })
    }

    fn transition(&mut self, i: usize, t: u64, to: WorkloadState) {
        let from = self.live[i].state.expect("arrived");
        if !from.can_transition_to(to) {
            self.violations
                .push(format!("t={t} {}: illegal transition {from:?} -> {to:?}", self.live[i].id));
        }
        self.transitions.push(Transition {
            t,
            workload: self.live[i].id,
            from,
            to,
        });
        self.live[i].state = Some(to);
    }

    fn claim(&mut self, t: TileId, w: WorkloadId, now: u64) {
        if let Err(e) = self.occ.claim(t, w) {
            self.violations.push(format!("t={now} {e}"));
        }
        self.occ_version += 1;
    }

    fn release(&mut self, t: TileId) {
        self.occ.release(t);
        if let Some(f) = self.field.as_mut() {
            f.release(t);
        }
        self.occ_version += 1;
    }

    /// Admission step. Returns how many queued workloads were found
    /// unplaceable even on an empty floorplan.
    fn admit(&mut self, t: u64) -> usize {
        if !(self.admission_dirty || self.core_blocked) {
            return 0;
        }
        // A blocked compact retry only makes sense once some tile has changed
        // hands; random placement redraws every cycle.
        if !self.admission_dirty
            && self.admit_version == self.occ_version
            && self.comp.placement == PlacementMode::Compact
        {
            return 0;
        }
        self.admission_dirty = false;
        self.admit_version = self.occ_version;
        let candidates: Vec<AdmissionCandidate> = self
            .live
            .iter()
            .filter(|l| matches!(l.state, Some(WorkloadState::Queue | WorkloadState::Parked)))
            .map(|l| AdmissionCandidate {
                workload: l.id,
                qubits: l.qubits,
                anchor: self.ports.iter().map(|p| p.port).collect(),
                arrival: l.arrival,
                parked: l.parked_at.map(|parked_at| ParkedInfo {
                    data: l.data.clone(),
                    parked_at,
                }),
            })
            .collect();
        if candidates.is_empty() {
            self.core_blocked = false;
            return 0;
        }
        let floor_empty = !self.live.iter().any(Live::resident);
        let limits = AdmissionLimits {
            core_budget: self.core_budget,
            resident_core_total: self.resident_core_total,
            random_attempts: self.cfg.random_attempts,
            random_reach: self.cfg.random_reach,
        };
        let plans = match self.comp.admission {
            AdmissionMode::Online => {
                online_admit(self.g, &self.occ, &candidates, self.comp.placement, limits, &mut self.place_rng)
            }
            AdmissionMode::Fifo => {
                fifo_admit(self.g, &self.occ, &candidates, self.comp.placement, limits, &mut self.place_rng)
            }
        };
        let free_data = self.occ.free_of(self.g, TileClass::Data).len() as u32;
        // Retry on ancilla releases while some candidate fits on data alone.
        self.core_blocked = plans.len() < candidates.len()
            && candidates
                .iter()
                .any(|c| c.parked.is_some() || c.qubits <= free_data);
        let admitted = plans.len();
        for plan in plans {
            let i = self.index_of(plan.workload);
            let w = plan.workload;
            if !plan.resumed {
                for &d in &plan.data {
                    self.claim(d, w, t);
                }
                self.live[i].data = plan.data.clone();
                self.records[i].admitted = Some(t);
            }
            for &a in &plan.core.ancilla {
                self.claim(a, w, t);
                self.core_mask[a.index()] = true;
            }
            self.resident_core_total += plan.core.ancilla.len();
            let l = &mut self.live[i];
            l.footprint = l.data.iter().chain(&plan.core.ancilla).copied().collect();
            l.footprint.sort_unstable();
            l.core = plan.core;
            l.parked_at = None;
            l.since = t;
            l.latencies = port_latencies(self.g, &self.ports, &l.footprint);
            if self.comp.ports == PortPolicy::NearestFixed && !self.ports.is_empty() {
                let g = self.g;
                let ports = &self.ports;
                l.qubit_ports = l
                    .data
                    .iter()
                    .map(|&d| {
                        (0..ports.len())
                            .min_by_key(|&k| (g.dist(ports[k].port, d), k))
                            .expect("at least one port")
                    })
                    .collect();
            }
            self.transition(i, t, WorkloadState::Ready);
        }
        if !(floor_empty && admitted == 0) || self.comp.placement == PlacementMode::Random {
            return 0;
        }
        // Compact placement is deterministic: failing on an empty floorplan
        // means never. Online admission tried everyone, FIFO only the head.
        let mut dropped: Vec<WorkloadId> = candidates.iter().map(|c| c.workload).collect();
        if self.comp.admission == AdmissionMode::Fifo {
            let head = candidates
                .iter()
                .min_by_key(|c| (c.arrival, c.workload))
                .expect("non-empty");
            dropped = vec![head.workload];
        }
        for w in &dropped {
            let i = self.index_of(*w);
            self.live[i].state = None;
            self.records[i].infeasible = true;
        }
        self.admission_dirty = true;
        dropped.len()
    }

    fn index_of(&self, w: WorkloadId) -> usize {
        self.live
            .iter()
            .position(|l| l.id == w)
            .expect("known workload")
    }

    fn arbitrate(&mut self, t: u64) {
        let waiting: Vec<usize> = (0..self.live.len())
            .filter(|&i| {
                let l = &self.live[i];
                l.active.is_none()
                    && matches!(
                        l.state,
                        Some(
                            WorkloadState::Ready
                                | WorkloadState::Running
                                | WorkloadState::WaitPrimary
                                | WorkloadState::WaitSecondary
                        )
                    )
            })
            .collect();
        if waiting.is_empty() {
            return;
        }
        let requests: Vec<BoundaryRequest> = waiting
            .iter()
            .map(|&i| {
                let l = &self.live[i];
                BoundaryRequest {
                    workload: l.id,
                    phase: l.phases[l.next_phase],
                    since: l.since,
                    parkable: l.state == Some(WorkloadState::Running),
                    footprint: l.footprint.clone(),
                }
            })
            .collect();
        let mut pools =
            AncillaPools::from_occupancy(self.g, &self.occ, &self.core_mask, self.resident_core_total);
        let decisions = match self.comp.arbitration {
            ArbitrationMode::Hierarchy => {
                pools = pools.with_footprints(
                    self.g,
                    self.live
                        .iter()
                        .filter(|l| l.resident() && l.state != Some(WorkloadState::Parked))
                        .map(|l| l.footprint.as_slice()),
                );
                let core_sizes: Vec<usize> = waiting.iter().map(|&i| self.live[i].core.ancilla.len()).collect();
                let starving: usize = waiting
                    .iter()
                    .zip(&requests)
                    .filter(|(&i, r)| {
                        self.live[i].state == Some(WorkloadState::WaitSecondary)
                            && t - r.since > self.cfg.park_patience
                    })
                    .map(|(_, r)| (r.phase.r_prim + r.phase.delta_sec) as usize)
                    .sum();
                let budget = self.core_budget.saturating_sub(starving);
                let mut d = ancilla_arbitrate(self.g, &requests, &core_sizes, &mut pools, budget, t);
                // Stop backfilling behind a starving request so the pool can
                // accumulate for it.
                let mut order: Vec<usize> = (0..requests.len()).collect();
                order.sort_by_key(|&k| {
                    (
                        std::cmp::Reverse(requests[k].phase.blocking),
                        std::cmp::Reverse(t - requests[k].since),
                        requests[k].workload,
                    )
                });
                let mut blocked = false;
                for k in order {
                    let starved = t - requests[k].since > self.cfg.park_patience;
                    match &d[k] {
                        Decision::WaitSecondary if starved => blocked = true,
                        Decision::Grant { secondary, .. } if blocked && !secondary.is_empty() => {
                            d[k] = Decision::WaitSecondary;
                        }
                        _ => {}
                    }
                }
                d
            }
            ArbitrationMode::Fifo => fifo_arbitrate(self.g, &requests, &mut pools),
        };
        for (k, decision) in decisions.into_iter().enumerate() {
            let i = waiting[k];
            let state = self.live[i].state.expect("resident");
            match decision {
                Decision::Grant { primary, secondary } => {
                    if matches!(state, WorkloadState::WaitPrimary | WorkloadState::WaitSecondary) {
                        self.transition(i, t, WorkloadState::Ready);
                    }
                    if self.live[i].state != Some(WorkloadState::Running) {
                        self.transition(i, t, WorkloadState::Running);
                    }
                    let w = self.live[i].id;
                    let tiles: Vec<TileId> = primary.into_iter().chain(secondary).collect();
                    for &a in &tiles {
                        self.claim(a, w, t);
                    }
                    let phase = requests[k].phase;
                    self.live[i].active = Some(Active {
                        phase,
                        tiles,
                        magic_left: phase.magic,
                        first: None,
                        last: t,
                        end: (phase.magic == 0).then_some(t + phase.duration as u64),
                    });
                    if phase.magic > 0 && self.field.is_some() {
                        self.magic_queue.push(i);
                    }
                    self.magic.requested += phase.magic as u64;
                }
                Decision::WaitPrimary | Decision::WaitSecondary => {
                    if state == WorkloadState::Running {
                        let to = if decision == Decision::WaitPrimary {
                            WorkloadState::WaitPrimary
                        } else {
                            WorkloadState::WaitSecondary
                        };
                        self.transition(i, t, to);
                    }
                }
                Decision::Park => {
                    self.transition(i, t, WorkloadState::Parked);
                    let core = std::mem::take(&mut self.live[i].core);
                    for &a in &core.ancilla {
                        self.release(a);
                        self.core_mask[a.index()] = false;
                    }
                    self.resident_core_total -= core.ancilla.len();
                    self.live[i].parked_at = Some(t);
                    self.records[i].parks += 1;
                    self.admission_dirty = true;
                }
            }
        }
    }

    fn serve_magic(&mut self, t: u64) {
        match self.cfg.mode {
            MagicMode::Ports => self.serve_ports(t),
            MagicMode::Cultivation => self.serve_cultivation(t),
        }
    }

    fn serve_ports(&mut self, t: u64) {
        let pending: Vec<usize> = (0..self.live.len())
            .filter(|&i| self.live[i].active.as_ref().is_some_and(|a| a.magic_left > 0))
            .collect();
        if pending.is_empty() {
            return;
        }
        let mut deliveries: Vec<(usize, crate::policies::PortAssignment)> = Vec::new();
        match self.comp.ports {
            PortPolicy::Arbitrated => {
                let mut reqs = Vec::new();
                let mut owners = Vec::new();
                for &i in &pending {
                    let l = &self.live[i];
                    let n = l.active.as_ref().expect("active").magic_left;
                    for _ in 0..n {
                        reqs.push(PortRequest {
                            request: MagicRequest {
                                workload: l.id,
                                issued_at: l.since,
                                count: 1,
                            },
                            latencies: &l.latencies,
                        });
                        owners.push(i);
                    }
                }
                let out = serve_port_requests(&mut self.ports, &reqs, t);
                deliveries.extend(owners.into_iter().zip(out));
            }
            PortPolicy::NearestFixed => {
                for &i in &pending {
                    let l = &self.live[i];
                    let act = l.active.as_ref().expect("active");
                    let col = &l.t_qubits[act.phase.index as usize];
                    debug_assert_eq!(col.len() as u32, act.magic_left);
                    for &j in col {
                        let k = l.qubit_ports[j as usize];
                        deliveries.push((i, commit_port(&mut self.ports, k, &l.latencies, t)));
                    }
                }
            }
            PortPolicy::Random => {
                for &i in &pending {
                    let l = &self.live[i];
                    for _ in 0..l.active.as_ref().expect("active").magic_left {
                        let k = random_idle_port(&self.ports, t, &mut self.port_rng);
                        deliveries.push((i, commit_port(&mut self.ports, k, &l.latencies, t)));
                    }
                }
            }
        }
        for (i, a) in deliveries {
            let ready = a.delivery - a.latency as u64;
            self.port_deliveries[a.port_index].push(ready);
            self.magic.delivered += 1;
            let act = self.live[i].active.as_mut().expect("active");
            act.magic_left -= 1;
            act.first = Some(act.first.map_or(a.delivery, |f| f.min(a.delivery)));
            act.last = act.last.max(a.delivery);
        }
        for &i in &pending {
            let act = self.live[i].active.as_mut().expect("active");
            let first = act.first.expect("delivered");
            act.end = Some((first + act.phase.duration as u64).max(act.last + 1));
            self.magic.consumed += act.phase.magic as u64;
        }
    }

    fn serve_cultivation(&mut self, t: u64) {
        let mut claimed: Vec<bool> = self
            .g
            .tiles()
            .map(|a| self.g.is_ancilla(a) && !self.occ.is_free(a))
            .collect();
        // Scratch held by a phase still waiting for magic is not routing yet;
        // it cultivates for its holder.
        for &i in &self.magic_queue {
            for &a in &self.live[i].active.as_ref().expect("active").tiles {
                claimed[a.index()] = false;
            }
        }
        let field = self.field.as_mut().expect("cultivation field");
        field.tick(&claimed, &mut self.tile_rng);
        if self.magic_queue.is_empty() {
            return;
        }
        let mut served = 0;
        for &i in &self.magic_queue {
            let l = &self.live[i];
            let act = l.active.as_ref().expect("active");
            let mut ready = field.ready_set();
            ready.tiles.retain(|&a| self.occ.owner(a).map_or(true, |o| o == l.id));
            let Some(tiles) = assign_magic(self.g, &ready, &l.footprint, act.magic_left) else {
                break;
            };
            field.consume(&tiles);
            self.magic.delivered += tiles.len() as u64;
            self.magic.consumed += tiles.len() as u64;
            let act = self.live[i].active.as_mut().expect("active");
            act.magic_left = 0;
            act.first = Some(t);
            act.last = t;
            act.end = Some(t + act.phase.duration.max(1) as u64);
            served += 1;
        }
        self.magic_queue.drain(..served);
    }

    fn count_dwell(&mut self) {
        for (l, r) in self.live.iter().zip(self.records.iter_mut()) {
            if let Some(s) = l.state {
                if s != WorkloadState::Complete {
                    r.dwell[s.index()] += 1;
                }
            }
        }
    }

    /// Retires phases ending this tick. Returns the number of completions.
    fn advance(&mut self, t: u64) -> usize {
        let mut completed = 0;
        for i in 0..self.live.len() {
            let ends = self.live[i]
                .active
                .as_ref()
                .is_some_and(|a| a.end == Some(t + 1));
            if !ends {
                continue;
            }
            let act = self.live[i].active.take().expect("active");
            for &a in &act.tiles {
                self.release(a);
            }
            let l = &mut self.live[i];
            l.next_phase += 1;
            l.since = t + 1;
            if l.next_phase == l.phases.len() {
                self.transition(i, t, WorkloadState::Complete);
                let l = &mut self.live[i];
                let core = std::mem::take(&mut l.core);
                let data = std::mem::take(&mut l.data);
                for &a in &core.ancilla {
                    self.core_mask[a.index()] = false;
                }
                self.resident_core_total -= core.ancilla.len();
                for &v in data.iter().chain(&core.ancilla) {
                    self.release(v);
                }
                self.records[i].completed = Some(t + 1);
                self.admission_dirty = true;
                completed += 1;
            }
        }
        completed
    }

    /// Rebuilds ownership from workload state and compares with the occupancy.
    fn audit(&mut self, t: u64) {
        // Ownership only moves together with the occupancy version.
        if self.occ_version == self.audited_version {
            return;
        }
        self.audited_version = self.occ_version;
        let mut owner: Vec<Option<WorkloadId>> = vec![None; self.g.len()];
        for l in &self.live {
            if !l.resident() {
                continue;
            }
            let grants = l.active.iter().flat_map(|a| a.tiles.iter());
            for &v in l.data.iter().chain(&l.core.ancilla).chain(grants) {
                if let Some(o) = owner[v.index()] {
                    self.violations
                        .push(format!("t={t} tile {v} held by {o} and {}", l.id));
                }
                owner[v.index()] = Some(l.id);
                if self.g.class_of(v) == TileClass::MagicPort {
                    self.violations.push(format!("t={t} port {v} allocated to {}", l.id));
                }
            }
        }
        if owner.as_slice() != self.occ.as_slice() {
            self.violations.push(format!("t={t} occupancy out of sync"));
        }
        if self.occ_version != self.digested_version {
            t.hash(&mut self.digest);
            self.occ.as_slice().hash(&mut self.digest);
            self.digested_version = self.occ_version;
        }
    }

    fn push_row(&mut self, t: u64, len: u64) {
        if self.summary_version != self.occ_version {
            self.free_summary = self.g.free_summary(&self.occ);
            self.summary_version = self.occ_version;
        }
        let (free_total, largest) = self.free_summary;
        let mut row = TickRow {
            free_total: free_total as u32,
            largest_free: largest as u32,
            n_running: 0,
            n_parked: 0,
            n_waitp: 0,
            n_waits: 0,
        };
        for l in &self.live {
            match l.state {
                Some(WorkloadState::Running) => row.n_running += 1,
                Some(WorkloadState::Parked) => row.n_parked += 1,
                Some(WorkloadState::WaitPrimary) => row.n_waitp += 1,
                Some(WorkloadState::WaitSecondary) => row.n_waits += 1,
                _ => {}
            }
        }
        match self.rows.last_mut() {
            Some(last) if last.row == row && last.start + last.len == t => last.len += len,
            _ => self.rows.push(RowRun { start: t, len, row }),
        }
    }

    fn finish(mut self, t: u64, horizon_reached: bool) -> SimTrace {
        let makespan = self
            .records
            .iter()
            .filter_map(|r| r.completed)
            .max()
            .unwrap_or(0);
        debug_assert!(horizon_reached || t == makespan || makespan == 0);
        let incomplete = self
            .records
            .iter()
            .filter(|r| !r.infeasible && r.completed.is_none())
            .map(|r| r.id)
            .collect();
        if let Some(f) = &self.field {
            self.magic.escapes = f.stats.escapes;
        }
        for (k, times) in self.port_deliveries.iter_mut().enumerate() {
            times.sort_unstable();
            let window = self.ports[k].t_prep.max(1) as u64;
            let mut lo = 0;
            for hi in 0..times.len() {
                while times[hi] - times[lo] >= window {
                    lo += 1;
                }
                self.magic.port_window_max = self.magic.port_window_max.max((hi - lo + 1) as u32);
            }
        }
        let free_tiles_total = (self.g.len() - self.g.count_of(TileClass::MagicPort)) as u32;
        SimTrace {
            makespan,
            rows: self.rows,
            workloads: self.records,
            transitions: self.transitions,
            horizon_reached,
            incomplete,
            magic: self.magic,
            occupancy_digest: self.digest.finish(),
            violations: self.violations,
            total_tiles: self.g.len() as u32,
            free_tiles_total,
        }
    }
}
