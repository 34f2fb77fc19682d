//! Static allocation: greedy compact data clusters, rooted core construction
//! through free ancilla, and scratchpad derivation.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floorplan::{FloorplanGraph, TileClass, TileId, UNREACHABLE};
use crate::workload::WorkloadId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlacementError {
    #[error("free data tiles exhausted: {needed} more required")]
    InsufficientData { needed: u32 },
    #[error("data tile {tile} cannot be reached through free ancilla")]
    Unreachable { tile: TileId },
    #[error("core needs more than {limit} ancilla tiles")]
    CoreTooLarge { limit: usize },
}

/// One cluster request. The seed is the free data tile closest to any anchor
/// tile (lowest id on ties, or simply the lowest free id when `anchor` is
/// empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterDemand {
    pub workload: WorkloadId,
    pub qubits: u32,
    pub anchor: Vec<TileId>,
}

impl ClusterDemand {
    pub fn new(workload: WorkloadId, qubits: u32, anchor: Vec<TileId>) -> Self {
        Self {
            workload,
            qubits,
            anchor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Clusters in demand order, each listed in growth order (seed first).
    pub clusters: Vec<Vec<TileId>>,
    /// Global pick log `(demand index, tile)` in the order tiles were taken.
    pub picks: Vec<(usize, TileId)>,
    /// Number of argmin scans over the free data pool.
    pub argmin_scans: u64,
}

/// Greedy compact partitioning restricted to the tiles flagged in `free_data`.
///
/// Each cluster is seeded at the free data tile nearest its anchor, then all
/// unfinished clusters grow round-robin, each step taking the free data tile
/// closest to the partial cluster. Ties go to the lowest tile id.
pub fn compact_partition(
    g: &FloorplanGraph,
    demands: &[ClusterDemand],
    free_data: &[bool],
) -> Result<Partition, PlacementError> {
    let pool: Vec<TileId> = g
        .tiles()
        .filter(|&t| free_data[t.index()] && g.is_data(t))
        .collect();
    let mut taken = vec![false; pool.len()];
    let mut remaining = pool.len();
    let mut clusters: Vec<Vec<TileId>> = vec![Vec::new(); demands.len()];
    let mut nearest: Vec<Vec<u32>> = vec![Vec::new(); demands.len()];
    let mut picks = Vec::new();
    let mut scans = 0u64;
    let outstanding = |clusters: &[Vec<TileId>]| -> u32 {
        demands
            .iter()
            .zip(clusters)
            .map(|(d, c)| d.qubits.saturating_sub(c.len() as u32))
            .sum()
    };

    let mut take = |i: usize,
                    slot: usize,
                    clusters: &mut Vec<Vec<TileId>>,
                    nearest: &mut Vec<Vec<u32>>,
                    taken: &mut Vec<bool>,
                    remaining: &mut usize| {
        let v = pool[slot];
        taken[slot] = true;
        *remaining -= 1;
        clusters[i].push(v);
        picks.push((i, v));
        let row = &mut nearest[i];
        if row.is_empty() {
            *row = pool.iter().map(|&u| g.dist(u, v)).collect();
        } else {
            for (k, &u) in pool.iter().enumerate() {
                row[k] = row[k].min(g.dist(u, v));
            }
        }
    };

    for (i, demand) in demands.iter().enumerate() {
        if demand.qubits == 0 {
            continue;
        }
        if remaining == 0 {
            return Err(PlacementError::InsufficientData {
                needed: outstanding(&clusters),
            });
        }
        scans += 1;
        let mut best: Option<(u32, usize)> = None;
        for (k, &v) in pool.iter().enumerate() {
            if taken[k] {
                continue;
            }
            let d = g.dist_to_set(v, demand.anchor.iter().copied()).unwrap_or(0);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        let (_, slot) = best.expect("pool non-empty");
        take(i, slot, &mut clusters, &mut nearest, &mut taken, &mut remaining);
    }

    while demands
        .iter()
        .zip(&clusters)
        .any(|(d, c)| (c.len() as u32) < d.qubits)
    {
        for (i, demand) in demands.iter().enumerate() {
            if clusters[i].len() as u32 >= demand.qubits {
                continue;
            }
            if remaining == 0 {
                return Err(PlacementError::InsufficientData {
                    needed: outstanding(&clusters),
                });
            }
            scans += 1;
            let row = &nearest[i];
            let mut best: Option<(u32, usize)> = None;
            for k in 0..pool.len() {
                if !taken[k] && best.map_or(true, |(bd, _)| row[k] < bd) {
                    best = Some((row[k], k));
                }
            }
            let (_, slot) = best.expect("pool non-empty");
            take(i, slot, &mut clusters, &mut nearest, &mut taken, &mut remaining);
        }
    }

    Ok(Partition {
        clusters,
        picks,
        argmin_scans: scans,
    })
}

/// Core ancilla and connecting edges for one workload.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Core {
    pub ancilla: Vec<TileId>,
    pub edges: Vec<(TileId, TileId)>,
}

/// Incremental rooted core construction.
///
/// Starting from `{root}`, repeatedly attaches the unconnected data tile whose
/// cheapest path to the current core consumes the fewest free ancilla. Paths
/// run through the core, the workload's own data tiles (free of charge) and
/// free ancilla (one unit each). Ties prefer fewer hops, then the lower
/// terminal id, then the lexicographically smallest path. Consumed ancilla are
/// cleared from `free_ancilla`.
pub fn build_core(
    g: &FloorplanGraph,
    data: &[TileId],
    root: TileId,
    free_ancilla: &mut [bool],
) -> Result<Core, PlacementError> {
    let n = g.len();
    let mut in_core = vec![false; n];
    let mut in_data = vec![false; n];
    for &d in data {
        in_data[d.index()] = true;
    }
    in_core[root.index()] = true;
    let mut outstanding: Vec<TileId> = data.iter().copied().filter(|&d| d != root).collect();
    let mut core = Core::default();

    let mut cost = vec![UNREACHABLE; n];
    let mut hops = vec![UNREACHABLE; n];
    let mut deque = VecDeque::new();
    while !outstanding.is_empty() {
        // 0-1 BFS on ancilla consumed.
        cost.iter_mut().for_each(|c| *c = UNREACHABLE);
        for t in g.tiles().filter(|t| in_core[t.index()]) {
            cost[t.index()] = 0;
            deque.push_back(t);
        }
        let step_cost = |v: TileId| -> Option<u32> {
            if in_core[v.index()] || in_data[v.index()] {
                Some(0)
            } else if free_ancilla[v.index()] {
                Some(1)
            } else {
                None
            }
        };
        while let Some(u) = deque.pop_front() {
            let cu = cost[u.index()];
            for &v in g.neighbors(u) {
                let Some(w) = step_cost(v) else { continue };
                if cu + w < cost[v.index()] {
                    cost[v.index()] = cu + w;
                    if w == 0 {
                        deque.push_front(v);
                    } else {
                        deque.push_back(v);
                    }
                }
            }
        }
        // Hop counts along cost-tight edges, so the walk back cannot cycle.
        hops.iter_mut().for_each(|h| *h = UNREACHABLE);
        for t in g.tiles().filter(|t| in_core[t.index()]) {
            hops[t.index()] = 0;
            deque.push_back(t);
        }
        while let Some(u) = deque.pop_front() {
            for &v in g.neighbors(u) {
                let Some(w) = step_cost(v) else { continue };
                if hops[v.index()] == UNREACHABLE
                    && cost[u.index()] != UNREACHABLE
                    && cost[u.index()] + w == cost[v.index()]
                {
                    hops[v.index()] = hops[u.index()] + 1;
                    deque.push_back(v);
                }
            }
        }
        let target = outstanding
            .iter()
            .copied()
            .filter(|d| cost[d.index()] != UNREACHABLE)
            .min_by_key(|d| (cost[d.index()], hops[d.index()], *d));
        let Some(target) = target else {
            return Err(PlacementError::Unreachable {
                tile: *outstanding.iter().min().expect("non-empty"),
            });
        };

        let mut v = target;
        let mut path = vec![v];
        while !in_core[v.index()] {
            let w = step_cost(v).expect("on path");
            let prev = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|u| {
                    cost[u.index()] != UNREACHABLE
                        && step_cost(*u).is_some()
                        && cost[u.index()] + w == cost[v.index()]
                        && hops[u.index()] != UNREACHABLE
                        && hops[u.index()] + 1 == hops[v.index()]
                })
                .min()
                .expect("tight predecessor exists");
            core.edges.push((prev.min(v), prev.max(v)));
            v = prev;
            path.push(v);
        }
        for &t in &path {
            if !in_core[t.index()] && free_ancilla[t.index()] && !in_data[t.index()] {
                free_ancilla[t.index()] = false;
                core.ancilla.push(t);
            }
            in_core[t.index()] = true;
        }
        outstanding.retain(|d| !in_core[d.index()]);
    }
    core.ancilla.sort_unstable();
    core.edges.sort_unstable();
    core.edges.dedup();
    Ok(core)
}

/// Core construction for the random baseline: terminals are attached in a
/// random order, each along a random shortest-hop path, without trying to
/// save ancilla.
pub fn build_core_random<R: Rng>(
    g: &FloorplanGraph,
    data: &[TileId],
    root: TileId,
    free_ancilla: &mut [bool],
    max_ancilla: usize,
    rng: &mut R,
) -> Result<Core, PlacementError> {
    let n = g.len();
    let mut in_core = vec![false; n];
    let mut in_data = vec![false; n];
    for &d in data {
        in_data[d.index()] = true;
    }
    in_core[root.index()] = true;
    let mut order: Vec<TileId> = data.iter().copied().filter(|&d| d != root).collect();
    order.shuffle(rng);
    let mut core = Core::default();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    for target in order {
        if in_core[target.index()] {
            continue;
        }
        parent.iter_mut().for_each(|p| *p = None);
        seen.iter_mut().for_each(|s| *s = false);
        let mut frontier: Vec<TileId> = g.tiles().filter(|t| in_core[t.index()]).collect();
        for t in &frontier {
            seen[t.index()] = true;
        }
        let mut found = false;
        while !frontier.is_empty() && !found {
            frontier.shuffle(rng);
            let mut next = Vec::new();
            for &u in &frontier {
                let mut ns = g.neighbors(u).to_vec();
                ns.shuffle(rng);
                for v in ns {
                    let ok = in_data[v.index()] || free_ancilla[v.index()];
                    if ok && !seen[v.index()] {
                        seen[v.index()] = true;
                        parent[v.index()] = Some(u);
                        next.push(v);
                        if v == target {
                            found = true;
                        }
                    }
                }
            }
            frontier = next;
        }
        if !found {
            return Err(PlacementError::Unreachable { tile: target });
        }
        let mut v = target;
        while !in_core[v.index()] {
            let u = parent[v.index()].expect("bfs parent");
            core.edges.push((u.min(v), u.max(v)));
            if free_ancilla[v.index()] && !in_data[v.index()] {
                free_ancilla[v.index()] = false;
                core.ancilla.push(v);
            }
            in_core[v.index()] = true;
            v = u;
        }
        if core.ancilla.len() > max_ancilla {
            return Err(PlacementError::CoreTooLarge { limit: max_ancilla });
        }
    }
    core.ancilla.sort_unstable();
    core.edges.sort_unstable();
    core.edges.dedup();
    Ok(core)
}

/// Random data cluster for the random baseline: a uniform seed, then uniform
/// picks among free data within `reach` hops of the partial cluster (any free
/// data tile when none is that close). `reach == 0` is a uniform q-subset.
pub fn random_cluster<R: Rng>(
    g: &FloorplanGraph,
    qubits: u32,
    free_data: &[bool],
    reach: u32,
    rng: &mut R,
) -> Option<Vec<TileId>> {
    let mut pool: Vec<TileId> = g
        .tiles()
        .filter(|&t| free_data[t.index()] && g.is_data(t))
        .collect();
    if (pool.len() as u32) < qubits {
        return None;
    }
    if reach == 0 {
        let (picked, _) = pool.partial_shuffle(rng, qubits as usize);
        return Some(picked.to_vec());
    }
    let mut cluster = Vec::with_capacity(qubits as usize);
    let mut near = vec![UNREACHABLE; pool.len()];
    while (cluster.len() as u32) < qubits {
        let slot = if cluster.is_empty() {
            rng.gen_range(0..pool.len())
        } else {
            let close: Vec<usize> = (0..pool.len()).filter(|&k| near[k] <= reach).collect();
            if close.is_empty() {
                rng.gen_range(0..pool.len())
            } else {
                close[rng.gen_range(0..close.len())]
            }
        };
        let v = pool.swap_remove(slot);
        near.swap_remove(slot);
        for (k, &u) in pool.iter().enumerate() {
            near[k] = near[k].min(g.dist(u, v));
        }
        cluster.push(v);
    }
    Some(cluster)
}

/// Free ancilla adjacent to a footprint.
pub fn adjacent_free(g: &FloorplanGraph, footprint: &[TileId], free_ancilla: &[bool]) -> Vec<TileId> {
    let mut mark = vec![false; g.len()];
    for &v in footprint {
        for &a in g.neighbors(v) {
            if free_ancilla[a.index()] {
                mark[a.index()] = true;
            }
        }
    }
    for &v in footprint {
        mark[v.index()] = false;
    }
    g.tiles().filter(|t| mark[t.index()]).collect()
}

/// Resident allocation of one workload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidentAllocation {
    pub workload: WorkloadId,
    /// Data tiles in growth order.
    pub data: Vec<TileId>,
    /// Core ancilla, sorted.
    pub ancilla: Vec<TileId>,
    pub port: Option<TileId>,
    pub edges: Vec<(TileId, TileId)>,
    /// Primary scratchpad.
    pub primary: Vec<TileId>,
}

impl ResidentAllocation {
    /// `D ∪ A ∪ {port}`.
    pub fn vertices(&self) -> Vec<TileId> {
        let mut v: Vec<TileId> = self
            .data
            .iter()
            .chain(&self.ancilla)
            .chain(self.port.iter())
            .copied()
            .collect();
        v.sort_unstable();
        v
    }
}

/// Primary scratchpads (free ancilla at distance one from each footprint) and
/// the shared secondary pool. Primary sets may overlap.
pub fn derive_scratchpads(
    g: &FloorplanGraph,
    footprints: &[Vec<TileId>],
    free_ancilla: &[bool],
) -> (Vec<Vec<TileId>>, Vec<TileId>) {
    let primary = footprints
        .iter()
        .map(|fp| adjacent_free(g, fp, free_ancilla))
        .collect();
    let shared = g.tiles().filter(|t| free_ancilla[t.index()]).collect();
    (primary, shared)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StaticDemand {
    pub workload: WorkloadId,
    pub qubits: u32,
    pub port: TileId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticAllocation {
    pub allocations: Vec<ResidentAllocation>,
    pub secondary: Vec<TileId>,
}

/// Resource-sufficient static allocation: compact partition over all data
/// tiles, then one rooted core per workload in input order, then scratchpads.
pub fn static_allocate(
    g: &FloorplanGraph,
    demands: &[StaticDemand],
) -> Result<StaticAllocation, PlacementError> {
    let free_data: Vec<bool> = g.tiles().map(|t| g.is_data(t)).collect();
    let cluster_demands: Vec<ClusterDemand> = demands
        .iter()
        .map(|d| ClusterDemand::new(d.workload, d.qubits, vec![d.port]))
        .collect();
    let partition = compact_partition(g, &cluster_demands, &free_data)?;
    let mut free_ancilla: Vec<bool> = g.tiles().map(|t| g.class_of(t) == TileClass::Ancilla).collect();
    let mut allocations = Vec::with_capacity(demands.len());
    for (d, data) in demands.iter().zip(partition.clusters) {
        let core = build_core(g, &data, d.port, &mut free_ancilla)?;
        allocations.push(ResidentAllocation {
            workload: d.workload,
            data,
            ancilla: core.ancilla,
            port: Some(d.port),
            edges: core.edges,
            primary: Vec::new(),
        });
    }
    let footprints: Vec<Vec<TileId>> = allocations.iter().map(|a| a.vertices()).collect();
    let (primary, secondary) = derive_scratchpads(g, &footprints, &free_ancilla);
    for (a, p) in allocations.iter_mut().zip(primary) {
        a.primary = p;
    }
    Ok(StaticAllocation {
        allocations,
        secondary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use TileClass::*;

    fn path_graph() -> FloorplanGraph {
        // v0 port, v1 ancilla, v2 data, v3 ancilla, v4 data
        FloorplanGraph::grid(1, 5, vec![MagicPort, Ancilla, Data, Ancilla, Data]).unwrap()
    }

    fn data_mask(g: &FloorplanGraph) -> Vec<bool> {
        g.tiles().map(|t| g.is_data(t)).collect()
    }

    fn ancilla_mask(g: &FloorplanGraph) -> Vec<bool> {
        g.tiles().map(|t| g.is_ancilla(t)).collect()
    }

    #[test]
    fn path_cluster_seeds_nearest_port() {
        let g = path_graph();
        let p = compact_partition(
            &g,
            &[ClusterDemand::new(WorkloadId(0), 2, vec![TileId(0)])],
            &data_mask(&g),
        )
        .unwrap();
        assert_eq!(p.clusters, vec![vec![TileId(2), TileId(4)]]);
    }

    #[test]
    fn zero_demand_is_empty_cluster() {
        let g = path_graph();
        let p = compact_partition(
            &g,
            &[ClusterDemand::new(WorkloadId(0), 0, vec![TileId(0)])],
            &data_mask(&g),
        )
        .unwrap();
        assert_eq!(p.clusters, vec![Vec::<TileId>::new()]);
        assert_eq!(p.argmin_scans, 0);
    }

    #[test]
    fn pigeonhole_failure() {
        let g = FloorplanGraph::grid(1, 5, vec![Data; 5]).unwrap();
        let demands = [
            ClusterDemand::new(WorkloadId(0), 3, vec![]),
            ClusterDemand::new(WorkloadId(1), 3, vec![]),
        ];
        assert!(matches!(
            compact_partition(&g, &demands, &data_mask(&g)),
            Err(PlacementError::InsufficientData { needed: 1 })
        ));
    }

    #[test]
    fn path_core_consumes_both_ancilla() {
        let g = path_graph();
        let mut free = ancilla_mask(&g);
        let core = build_core(&g, &[TileId(2), TileId(4)], TileId(0), &mut free).unwrap();
        assert_eq!(core.ancilla, vec![TileId(1), TileId(3)]);
        assert_eq!(core.edges.len(), 4);
        assert!(!free[1] && !free[3]);
    }

    #[test]
    fn adjacent_terminals_need_no_ancilla() {
        // 3x3 grid, root in the middle, data on its four neighbours.
        let mut classes = vec![Ancilla; 9];
        for i in [1, 3, 5, 7] {
            classes[i] = Data;
        }
        classes[4] = MagicPort;
        let g = FloorplanGraph::grid(3, 3, classes).unwrap();
        let mut free = ancilla_mask(&g);
        let core = build_core(
            &g,
            &[TileId(1), TileId(3), TileId(5), TileId(7)],
            TileId(4),
            &mut free,
        )
        .unwrap();
        assert!(core.ancilla.is_empty());
        assert_eq!(core.edges.len(), 4);
    }

    #[test]
    fn unreachable_terminal_fails() {
        let g = path_graph();
        let mut free = vec![false; 5];
        assert_eq!(
            build_core(&g, &[TileId(2)], TileId(0), &mut free),
            Err(PlacementError::Unreachable { tile: TileId(2) })
        );
    }

    #[test]
    fn port_free_root_inside_cluster() {
        let g = FloorplanGraph::grid(1, 5, vec![Data, Ancilla, Data, Data, Ancilla]).unwrap();
        let mut free = ancilla_mask(&g);
        let core = build_core(&g, &[TileId(0), TileId(2), TileId(3)], TileId(0), &mut free).unwrap();
        assert_eq!(core.ancilla, vec![TileId(1)]);
        assert!(free[4]);
    }

    #[test]
    fn scratchpads_corner_ring() {
        let g = FloorplanGraph::grid(3, 3, {
            let mut c = vec![Ancilla; 9];
            c[0] = Data;
            c
        })
        .unwrap();
        let free = ancilla_mask(&g);
        let (p, s) = derive_scratchpads(&g, &[vec![TileId(0)]], &free);
        assert_eq!(p[0], vec![TileId(1), TileId(3)]);
        assert_eq!(s.len(), 8);

        let none = vec![false; 9];
        let (p, s) = derive_scratchpads(&g, &[vec![TileId(0)]], &none);
        assert!(p[0].is_empty() && s.is_empty());
    }

    #[test]
    fn shared_column_in_both_scratchpads() {
        // columns: data | ancilla | data
        let g = FloorplanGraph::grid(2, 3, vec![Data, Ancilla, Data, Data, Ancilla, Data]).unwrap();
        let free = ancilla_mask(&g);
        let (p, _) = derive_scratchpads(
            &g,
            &[vec![TileId(0), TileId(3)], vec![TileId(2), TileId(5)]],
            &free,
        );
        assert_eq!(p[0], vec![TileId(1), TileId(4)]);
        assert_eq!(p[1], vec![TileId(1), TileId(4)]);
    }

    #[test]
    fn static_two_workloads_disjoint() {
        // Four data tiles in the centre of a 4x4 grid, ports in the corners.
        let mut classes = vec![Ancilla; 16];
        for i in [5, 6, 9, 10] {
            classes[i] = Data;
        }
        for i in [0, 3, 12, 15] {
            classes[i] = MagicPort;
        }
        let g = FloorplanGraph::grid(4, 4, classes).unwrap();
        let alloc = static_allocate(
            &g,
            &[
                StaticDemand {
                    workload: WorkloadId(0),
                    qubits: 2,
                    port: TileId(0),
                },
                StaticDemand {
                    workload: WorkloadId(1),
                    qubits: 2,
                    port: TileId(15),
                },
            ],
        )
        .unwrap();
        let a = alloc.allocations[0].vertices();
        let b = alloc.allocations[1].vertices();
        assert!(a.iter().all(|t| !b.contains(t)));
        assert_eq!(alloc.allocations[0].data.len(), 2);
        assert_eq!(alloc.allocations[1].data.len(), 2);
    }

    #[test]
    fn static_empty_and_exhaustive() {
        let g = path_graph();
        assert!(static_allocate(&g, &[]).unwrap().allocations.is_empty());
        let alloc = static_allocate(
            &g,
            &[StaticDemand {
                workload: WorkloadId(0),
                qubits: 2,
                port: TileId(0),
            }],
        )
        .unwrap();
        let mut d = alloc.allocations[0].data.clone();
        d.sort();
        assert_eq!(d, vec![TileId(2), TileId(4)]);
        assert!(alloc.secondary.is_empty());
    }

    #[test]
    fn random_variants_are_seeded() {
        let g = FloorplanGraph::build(&crate::floorplan::LayoutSpec::default()).unwrap();
        let fd = data_mask(&g);
        let a = random_cluster(&g, 12, &fd, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_cluster(&g, 12, &fd, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let mut fa = ancilla_mask(&g);
        let core = build_core_random(&g, &a, a[0], &mut fa, usize::MAX, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(core.is_ok());
        assert!(random_cluster(&g, 500, &fd, 2, &mut ChaCha8Rng::seed_from_u64(3)).is_none());
    }
}
