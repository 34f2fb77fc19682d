//! Runtime arbitration: workload state machine, magic-state port service,
//! hierarchy-aware ancilla grants and admission ordering.

use std::cmp::Reverse;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::floorplan::{FloorplanGraph, Occupancy, TileClass, TileId};
use crate::placement::{
    adjacent_free, build_core, build_core_random, compact_partition, random_cluster, ClusterDemand,
    Core,
};
use crate::workload::{PhaseDescriptor, WorkloadId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WorkloadState {
    Queue,
    Ready,
    Running,
    Parked,
    WaitPrimary,
    WaitSecondary,
    Complete,
}

impl WorkloadState {
    pub const ALL: [WorkloadState; 7] = [
        WorkloadState::Queue,
        WorkloadState::Ready,
        WorkloadState::Running,
        WorkloadState::Parked,
        WorkloadState::WaitPrimary,
        WorkloadState::WaitSecondary,
        WorkloadState::Complete,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            WorkloadState::Queue => "queue",
            WorkloadState::Ready => "ready",
            WorkloadState::Running => "running",
            WorkloadState::Parked => "parked",
            WorkloadState::WaitPrimary => "wait_primary",
            WorkloadState::WaitSecondary => "wait_secondary",
            WorkloadState::Complete => "complete",
        }
    }

    pub fn can_transition_to(self, next: WorkloadState) -> bool {
        use WorkloadState::*;
        matches!(
            (self, next),
            (Queue, Ready)
                | (Ready, Running)
                | (Running, WaitPrimary)
                | (Running, WaitSecondary)
                | (Running, Parked)
                | (Running, Complete)
                | (Running, Ready)
                | (Parked, Ready)
                | (WaitPrimary, Ready)
                | (WaitSecondary, Ready)
        )
    }

    /// Admitted and holding data tiles.
    pub fn is_resident(self) -> bool {
        use WorkloadState::*;
        matches!(self, Ready | Running | Parked | WaitPrimary | WaitSecondary)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagicRequest {
    pub workload: WorkloadId,
    pub issued_at: u64,
    pub count: u32,
}

impl MagicRequest {
    pub fn age(&self, t: u64) -> u64 {
        t.saturating_sub(self.issued_at)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortModel {
    pub port: TileId,
    pub t_init: u32,
    pub t_prep: u32,
    /// Earliest cycle at which the port can start its next production.
    pub busy_until: u64,
    pub produced: bool,
}

impl PortModel {
    pub fn new(port: TileId, t_init: u32, t_prep: u32) -> Self {
        Self {
            port,
            t_init,
            t_prep,
            busy_until: 0,
            produced: false,
        }
    }

    pub fn warmed(mut self) -> Self {
        self.produced = true;
        self
    }

    fn warmup_left(&self) -> u32 {
        if self.produced {
            0
        } else {
            self.t_init
        }
    }

    /// Arrival cycle of a state requested at `t` and routed `latency` hops.
    pub fn delivery_time(&self, latency: u32, t: u64) -> u64 {
        t.max(self.busy_until) + (self.warmup_left() + self.t_prep + latency) as u64
    }

    fn commit(&mut self, t: u64) {
        self.busy_until = t.max(self.busy_until) + (self.warmup_left() + self.t_prep) as u64;
        self.produced = true;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PortAssignment {
    pub port_index: usize,
    pub delivery: u64,
    pub latency: u32,
}

/// Hop distance from every port to a workload footprint.
pub fn port_latencies(g: &FloorplanGraph, ports: &[PortModel], footprint: &[TileId]) -> Vec<u32> {
    ports
        .iter()
        .map(|p| {
            g.dist_to_set(p.port, footprint.iter().copied())
                .unwrap_or(crate::floorplan::UNREACHABLE)
        })
        .collect()
}

/// Commits one state from the port minimizing the delivery time (ties: lower
/// latency, lower port index).
pub fn assign_port(ports: &mut [PortModel], latencies: &[u32], t: u64) -> PortAssignment {
    assert!(!ports.is_empty(), "no magic-state ports");
    let port_index = (0..ports.len())
        .min_by_key(|&k| (ports[k].delivery_time(latencies[k], t), latencies[k], k))
        .expect("non-empty");
    commit_port(ports, port_index, latencies, t)
}

/// Commits one state from a specific port.
pub fn commit_port(
    ports: &mut [PortModel],
    port_index: usize,
    latencies: &[u32],
    t: u64,
) -> PortAssignment {
    let latency = latencies[port_index];
    let delivery = ports[port_index].delivery_time(latency, t);
    ports[port_index].commit(t);
    PortAssignment {
        port_index,
        delivery,
        latency,
    }
}

/// Port of minimum latency (ties: lower index).
pub fn nearest_port(latencies: &[u32]) -> usize {
    (0..latencies.len())
        .min_by_key(|&k| (latencies[k], k))
        .expect("at least one port")
}

/// Uniform choice among idle ports, or among all ports when none is idle.
pub fn random_idle_port<R: Rng>(ports: &[PortModel], t: u64, rng: &mut R) -> usize {
    let idle: Vec<usize> = (0..ports.len()).filter(|&k| ports[k].busy_until <= t).collect();
    if idle.is_empty() {
        rng.gen_range(0..ports.len())
    } else {
        idle[rng.gen_range(0..idle.len())]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PortRequest<'a> {
    pub request: MagicRequest,
    pub latencies: &'a [u32],
}

/// Serves a batch of pending single-state requests. Contention is resolved by
/// the priority `(-age, best latency, workload id)`: older requests first.
/// Results are returned in input order.
pub fn serve_port_requests(
    ports: &mut [PortModel],
    requests: &[PortRequest<'_>],
    t: u64,
) -> Vec<PortAssignment> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| {
        let r = &requests[i];
        (
            Reverse(r.request.age(t)),
            r.latencies.iter().copied().min().unwrap_or(u32::MAX),
            r.request.workload,
            i,
        )
    });
    let mut out = vec![None; requests.len()];
    for i in order {
        out[i] = Some(assign_port(ports, requests[i].latencies, t));
    }
    out.into_iter().map(|a| a.expect("assigned")).collect()
}

/// One resident at a phase boundary asking for its next phase.
#[derive(Clone, Debug)]
pub struct BoundaryRequest {
    pub workload: WorkloadId,
    pub phase: PhaseDescriptor,
    /// Cycle the workload reached this boundary.
    pub since: u64,
    /// Only residents whose previous phase just finished may be parked.
    pub parkable: bool,
    /// Data tiles plus core ancilla.
    pub footprint: Vec<TileId>,
}

impl BoundaryRequest {
    fn priority(&self, t: u64) -> (Reverse<bool>, Reverse<u64>, WorkloadId) {
        (
            Reverse(self.phase.blocking),
            Reverse(t.saturating_sub(self.since)),
            self.workload,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Grant {
        primary: Vec<TileId>,
        secondary: Vec<TileId>,
    },
    WaitPrimary,
    WaitSecondary,
    Park,
}

/// Ancilla bookkeeping the arbiters read and update.
#[derive(Clone, Debug)]
pub struct AncillaPools {
    /// Ancilla that is neither core nor currently granted.
    pub available: Vec<bool>,
    /// Ancilla that is not part of any resident core.
    pub non_core: Vec<bool>,
    /// Core sizes of every resident that is not parked.
    pub resident_core_total: usize,
    /// Number of resident footprints each non-core ancilla tile borders,
    /// i.e. how many primary scratchpads it belongs to.
    pub scratch_owners: Vec<u8>,
}

impl AncillaPools {
    pub fn from_occupancy(
        g: &FloorplanGraph,
        occ: &Occupancy,
        core_mask: &[bool],
        resident_core_total: usize,
    ) -> Self {
        let available = g
            .tiles()
            .map(|t| g.class_of(t) == TileClass::Ancilla && occ.is_free(t))
            .collect();
        let non_core = g
            .tiles()
            .map(|t| g.class_of(t) == TileClass::Ancilla && !core_mask[t.index()])
            .collect();
        Self {
            scratch_owners: vec![0; g.len()],
            available,
            non_core,
            resident_core_total,
        }
    }

    /// Records the primary scratchpads of resident footprints.
    pub fn with_footprints<'f>(
        mut self,
        g: &FloorplanGraph,
        footprints: impl IntoIterator<Item = &'f [TileId]>,
    ) -> Self {
        for fp in footprints {
            for a in adjacent_free(g, fp, &self.non_core) {
                self.scratch_owners[a.index()] = self.scratch_owners[a.index()].saturating_add(1);
            }
        }
        self
    }

    fn non_core_count(&self) -> usize {
        self.non_core.iter().filter(|&&b| b).count()
    }
}

/// Primary region carved for a phase: up to `r_prim` currently available
/// tiles of the workload's own scratchpad, least shared first (ties: lower
/// id). `None` when other grants hold tiles the phase needs.
pub fn primary_region(
    g: &FloorplanGraph,
    footprint: &[TileId],
    pools: &AncillaPools,
    r_prim: u32,
) -> Option<Vec<TileId>> {
    let own = adjacent_free(g, footprint, &pools.non_core);
    let want = (r_prim as usize).min(own.len());
    let mut avail: Vec<TileId> = own.into_iter().filter(|t| pools.available[t.index()]).collect();
    if avail.len() < want {
        return None;
    }
    avail.sort_by_key(|t| (pools.scratch_owners[t.index()], *t));
    avail.truncate(want);
    avail.sort_unstable();
    Some(avail)
}

/// `count` tiles of `pool` nearest the footprint; tiles with a nonzero
/// `penalty` rank after all others.
fn nearest_tiles(
    g: &FloorplanGraph,
    footprint: &[TileId],
    pool: &[bool],
    penalty: Option<&[u8]>,
    count: usize,
) -> Option<Vec<TileId>> {
    if count == 0 {
        return Some(Vec::new());
    }
    let mut cand: Vec<((bool, u32), TileId)> = g
        .tiles()
        .filter(|t| pool[t.index()])
        .map(|t| {
            let shared = penalty.is_some_and(|p| p[t.index()] > 0);
            let d = g.dist_to_set(t, footprint.iter().copied()).unwrap_or(u32::MAX);
            ((shared, d), t)
        })
        .collect();
    if cand.len() < count {
        return None;
    }
    cand.select_nth_unstable(count - 1);
    let mut picked: Vec<TileId> = cand[..count].iter().map(|&(_, t)| t).collect();
    picked.sort_unstable();
    Some(picked)
}

/// Hierarchy-aware grant decisions at a scheduler boundary.
///
/// 1. Residency: while resident core ancilla exceeds `core_budget`, the
///    lowest-priority parkable request is parked and its core returned.
/// 2. Primary: each phase's region is carved from its own adjacent ancilla;
///    when earlier grants hold too much of it the workload is in WaitPrimary.
/// 3. Secondary: overflow plus `delta_sec` tiles come from the shared pool,
///    nearest first and away from other scratchpads; shortfall means
///    WaitSecondary.
///
/// Priority is blocking phases first, then longer wait, then lower id. Lower
/// priority requests may still be granted when a higher one waits.
/// `parked_cores` receives the core size of every parked request.
pub fn ancilla_arbitrate(
    g: &FloorplanGraph,
    requests: &[BoundaryRequest],
    core_sizes: &[usize],
    pools: &mut AncillaPools,
    core_budget: usize,
    t: u64,
) -> Vec<Decision> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| requests[i].priority(t));
    let mut decisions: Vec<Option<Decision>> = vec![None; requests.len()];

    for &i in order.iter().rev() {
        if pools.resident_core_total <= core_budget {
            break;
        }
        if requests[i].parkable && core_sizes[i] > 0 {
            decisions[i] = Some(Decision::Park);
            pools.resident_core_total -= core_sizes[i];
        }
    }

    let sec_capacity = pools.non_core_count();
    for &i in &order {
        if decisions[i].is_some() {
            continue;
        }
        let req = &requests[i];
        let Some(region) = primary_region(g, &req.footprint, pools, req.phase.r_prim) else {
            decisions[i] = Some(Decision::WaitPrimary);
            continue;
        };
        let spill = req.phase.r_prim as usize - region.len();
        let need = (req.phase.delta_sec as usize + spill).min(sec_capacity - region.len());
        for t in &region {
            pools.available[t.index()] = false;
        }
        // Other workloads' primary scratchpads are the last resort.
        match nearest_tiles(g, &req.footprint, &pools.available, Some(&pools.scratch_owners), need) {
            Some(secondary) => {
                for t in &secondary {
                    pools.available[t.index()] = false;
                }
                decisions[i] = Some(Decision::Grant {
                    primary: region,
                    secondary,
                });
            }
            None => {
                for t in &region {
                    pools.available[t.index()] = true;
                }
                decisions[i] = Some(Decision::WaitSecondary);
            }
        }
    }
    decisions.into_iter().map(|d| d.expect("decided")).collect()
}

/// First-come first-served grants without a scratchpad hierarchy: each phase
/// takes `r_prim + delta_sec` free ancilla wherever they are (scan order,
/// with no regard for locality); the first request that cannot be served
/// blocks everything behind it.
pub fn fifo_arbitrate(
    g: &FloorplanGraph,
    requests: &[BoundaryRequest],
    pools: &mut AncillaPools,
) -> Vec<Decision> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| (requests[i].since, requests[i].workload));
    let capacity = pools.non_core_count();
    let mut decisions = vec![Decision::WaitSecondary; requests.len()];
    for i in order {
        let req = &requests[i];
        let need = ((req.phase.r_prim + req.phase.delta_sec) as usize).min(capacity);
        let tiles: Vec<TileId> = g.tiles().filter(|t| pools.available[t.index()]).take(need).collect();
        match (tiles.len() == need).then_some(tiles) {
            Some(tiles) => {
                for t in &tiles {
                    pools.available[t.index()] = false;
                }
                decisions[i] = Decision::Grant {
                    primary: Vec::new(),
                    secondary: tiles,
                };
            }
            None => break,
        }
    }
    decisions
}

/// Connected free region (data + ancilla) with its free data tiles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeRegion {
    pub tiles: Vec<TileId>,
    pub data: Vec<TileId>,
}

pub fn free_regions(g: &FloorplanGraph, occ: &Occupancy) -> Vec<FreeRegion> {
    g.free_components(occ)
        .into_iter()
        .map(|tiles| {
            let data = tiles.iter().copied().filter(|&t| g.is_data(t)).collect();
            FreeRegion { tiles, data }
        })
        .collect()
}

/// Smallest region holding at least `q` free data tiles, with its slack.
pub fn host_region(regions: &[FreeRegion], q: u32) -> Option<(usize, u32)> {
    regions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.data.len() as u32 >= q)
        .min_by_key(|(i, r)| (r.data.len(), *i))
        .map(|(i, r)| (i, r.data.len() as u32 - q))
}

fn mask_of(n: usize, tiles: &[TileId]) -> Vec<bool> {
    let mut m = vec![false; n];
    for t in tiles {
        m[t.index()] = true;
    }
    m
}

/// Data-limited admission: among workloads whose compact cluster fits the free
/// data, repeatedly admit by `(-q, slack)` and shrink the free set.
pub fn data_limited_admission(
    g: &FloorplanGraph,
    occ: &Occupancy,
    waiting: &[ClusterDemand],
) -> Vec<(WorkloadId, Vec<TileId>)> {
    let mut occ = occ.clone();
    let mut pending: Vec<&ClusterDemand> = waiting.iter().collect();
    let mut admitted = Vec::new();
    loop {
        let regions = free_regions(g, &occ);
        let free_data = occ.free_mask(g, TileClass::Data);
        let total_free = free_data.iter().filter(|&&b| b).count() as u32;
        let best = pending
            .iter()
            .enumerate()
            .filter(|(_, d)| d.qubits <= total_free)
            .map(|(k, d)| {
                let slack = host_region(&regions, d.qubits)
                    .map(|(_, s)| s)
                    .unwrap_or(total_free - d.qubits);
                (Reverse(d.qubits), slack, d.workload, k)
            })
            .min();
        let Some((_, _, _, k)) = best else { break };
        let demand = pending.remove(k);
        let mask = match host_region(&regions, demand.qubits) {
            Some((r, _)) => mask_of(g.len(), &regions[r].data),
            None => free_data,
        };
        let Ok(p) = compact_partition(g, std::slice::from_ref(demand), &mask) else {
            continue;
        };
        let cluster = p.clusters.into_iter().next().expect("one demand");
        for &t in &cluster {
            occ.claim(t, demand.workload).expect("free data tile");
        }
        admitted.push((demand.workload, cluster));
    }
    admitted
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Greedy compact clusters and ancilla-minimizing cores.
    Compact,
    /// Random clusters and random shortest-hop cores.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionMode {
    /// Non-fragmenting first, then larger, then older parked.
    Online,
    /// Strict arrival order with head-of-line blocking.
    Fifo,
}

/// Admission candidate: a queued workload, or a parked one whose data tiles
/// are already pinned.
#[derive(Clone, Debug)]
pub struct AdmissionCandidate {
    pub workload: WorkloadId,
    pub qubits: u32,
    pub anchor: Vec<TileId>,
    pub arrival: u64,
    pub parked: Option<ParkedInfo>,
}

#[derive(Clone, Debug)]
pub struct ParkedInfo {
    pub data: Vec<TileId>,
    pub parked_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissionPlan {
    pub workload: WorkloadId,
    pub data: Vec<TileId>,
    pub core: Core,
    /// The cluster lies inside one existing free region.
    pub fits_region: bool,
    pub resumed: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct AdmissionLimits {
    pub core_budget: usize,
    pub resident_core_total: usize,
    /// Attempts at drawing a random placement before giving up this cycle.
    pub random_attempts: u32,
    pub random_reach: u32,
}

/// Tries to place one candidate on the current free tiles: data cluster, core
/// and the scratchpad availability check. Nothing is committed.
pub fn plan_placement<R: Rng>(
    g: &FloorplanGraph,
    occ: &Occupancy,
    regions: &[FreeRegion],
    cand: &AdmissionCandidate,
    mode: PlacementMode,
    limits: &AdmissionLimits,
    rng: &mut R,
) -> Option<AdmissionPlan> {
    let free_ancilla = occ.free_mask(g, TileClass::Ancilla);
    let budget_left = limits
        .core_budget
        .saturating_sub(limits.resident_core_total);
    let finish = |data: Vec<TileId>, core: Core, fits_region: bool, free_after: &[bool]| {
        if core.ancilla.len() > budget_left {
            return None;
        }
        let mut footprint = data.clone();
        footprint.extend(&core.ancilla);
        let scratch_ok = !adjacent_free(g, &footprint, free_after).is_empty()
            || free_after.iter().any(|&b| b);
        scratch_ok.then(|| AdmissionPlan {
            workload: cand.workload,
            data,
            core,
            fits_region,
            resumed: cand.parked.is_some(),
        })
    };

    if let Some(parked) = &cand.parked {
        let mut fa = free_ancilla.clone();
        let core = match mode {
            PlacementMode::Compact => build_core(g, &parked.data, parked.data[0], &mut fa).ok()?,
            PlacementMode::Random => {
                build_core_random(g, &parked.data, parked.data[0], &mut fa, budget_left, rng).ok()?
            }
        };
        return finish(parked.data.clone(), core, true, &fa);
    }

    let free_data = occ.free_mask(g, TileClass::Data);
    if (free_data.iter().filter(|&&b| b).count() as u32) < cand.qubits {
        return None;
    }
    match mode {
        PlacementMode::Compact => {
            let host = host_region(regions, cand.qubits);
            let mask = match host {
                Some((r, _)) => mask_of(g.len(), &regions[r].data),
                None => free_data,
            };
            let demand = ClusterDemand::new(cand.workload, cand.qubits, cand.anchor.clone());
            let p = compact_partition(g, std::slice::from_ref(&demand), &mask).ok()?;
            let data = p.clusters.into_iter().next()?;
            let mut fa = free_ancilla;
            let core = build_core(g, &data, data[0], &mut fa).ok()?;
            finish(data, core, host.is_some(), &fa)
        }
        PlacementMode::Random => {
            for _ in 0..limits.random_attempts.max(1) {
                let Some(data) = random_cluster(g, cand.qubits, &free_data, limits.random_reach, rng)
                else {
                    return None;
                };
                let mut fa = free_ancilla.clone();
                if let Ok(core) = build_core_random(g, &data, data[0], &mut fa, budget_left, rng) {
                    let fits = regions
                        .iter()
                        .any(|r| data.iter().all(|t| r.data.binary_search(t).is_ok()));
                    return finish(data, core, fits, &fa);
                }
            }
            None
        }
    }
}

fn commit_plan(occ: &mut Occupancy, plan: &AdmissionPlan) {
    for &t in plan.data.iter().chain(&plan.core.ancilla) {
        occ.claim(t, plan.workload).expect("planned on free tiles");
    }
}

/// Online admission. Candidates are ranked by `(fits one free region, larger
/// q, parked, older park, earlier arrival, id)`; the best feasible one is
/// admitted, the free space is updated, and ranking repeats.
pub fn online_admit<R: Rng>(
    g: &FloorplanGraph,
    occ: &Occupancy,
    candidates: &[AdmissionCandidate],
    mode: PlacementMode,
    limits: AdmissionLimits,
    rng: &mut R,
) -> Vec<AdmissionPlan> {
    let mut occ = occ.clone();
    let mut limits = limits;
    let mut pending: Vec<&AdmissionCandidate> = candidates.iter().collect();
    let mut admitted = Vec::new();
    loop {
        let regions = free_regions(g, &occ);
        let mut best: Option<(_, usize, AdmissionPlan)> = None;
        for (k, cand) in pending.iter().enumerate() {
            let Some(plan) = plan_placement(g, &occ, &regions, cand, mode, &limits, rng) else {
                continue;
            };
            let key = (
                Reverse(plan.fits_region),
                Reverse(cand.qubits),
                Reverse(cand.parked.is_some()),
                cand.parked.as_ref().map_or(0, |p| p.parked_at),
                cand.arrival,
                cand.workload,
            );
            if best.as_ref().map_or(true, |(bk, _, _)| key < *bk) {
                best = Some((key, k, plan));
            }
        }
        let Some((_, k, plan)) = best else { break };
        pending.remove(k);
        commit_plan(&mut occ, &plan);
        limits.resident_core_total += plan.core.ancilla.len();
        admitted.push(plan);
    }
    admitted
}

/// FIFO admission: parked workloads first (by park time), then the queue in
/// arrival order; stops at the first candidate that does not fit.
pub fn fifo_admit<R: Rng>(
    g: &FloorplanGraph,
    occ: &Occupancy,
    candidates: &[AdmissionCandidate],
    mode: PlacementMode,
    limits: AdmissionLimits,
    rng: &mut R,
) -> Vec<AdmissionPlan> {
    let mut occ = occ.clone();
    let mut limits = limits;
    let mut order: Vec<&AdmissionCandidate> = candidates.iter().collect();
    order.sort_by_key(|c| {
        (
            c.parked.is_none(),
            c.parked.as_ref().map_or(0, |p| p.parked_at),
            c.arrival,
            c.workload,
        )
    });
    let mut admitted = Vec::new();
    for cand in order {
        let regions = free_regions(g, &occ);
        match plan_placement(g, &occ, &regions, cand, mode, &limits, rng) {
            Some(plan) => {
                commit_plan(&mut occ, &plan);
                limits.resident_core_total += plan.core.ancilla.len();
                admitted.push(plan);
            }
            None => break,
        }
    }
    admitted
}
