#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilemux::engine::SimTrace;
use tilemux::floorplan::{FloorplanGraph, LayoutPattern, LayoutSpec, Occupancy, TileClass, TileId};
use tilemux::placement::{build_core, compact_partition, ClusterDemand, Partition, PlacementError};
use tilemux::workload::WorkloadId;
use tilemux::policies::WorkloadState;

pub const INF: u32 = u32::MAX / 4;

/// All-pairs hop distances by Floyd–Warshall.
pub fn floyd_warshall(g: &FloorplanGraph) -> Vec<Vec<u32>> {
    let n = g.len();
    let mut d = vec![vec![INF; n]; n];
    for u in g.tiles() {
        d[u.index()][u.index()] = 0;
        for &v in g.neighbors(u) {
            d[u.index()][v.index()] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if dik == INF {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Largest free component over free non-port tiles via union-find (1.0 if
/// none are free).
pub fn cmax_union_find(g: &FloorplanGraph, occ: &Occupancy) -> f64 {
    let n = g.len();
    let free = |t: TileId| occ.is_free(t) && g.class_of(t) != TileClass::MagicPort;
    let mut parent: Vec<usize> = (0..n).collect();
    for u in g.tiles().filter(|&u| free(u)) {
        for &v in g.neighbors(u) {
            if free(v) {
                let (a, b) = (find(&mut parent, u.index()), find(&mut parent, v.index()));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    let mut total = 0;
    for u in g.tiles().filter(|&u| free(u)) {
        *sizes.entry(find(&mut parent, u.index())).or_default() += 1;
        total += 1;
    }
    match sizes.values().max() {
        Some(&m) => m as f64 / total as f64,
        None => 1.0,
    }
}

fn connected(g: &FloorplanGraph, mask: &[bool], start: TileId) -> usize {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![start];
    seen[start.index()] = true;
    let mut count = 0;
    while let Some(u) = stack.pop() {
        count += 1;
        for &v in g.neighbors(u) {
            if mask[v.index()] && !seen[v.index()] {
                seen[v.index()] = true;
                stack.push(v);
            }
        }
    }
    count
}

/// Minimum number of ancilla tiles connecting `terminals`, by enumerating
/// ancilla subsets in order of size. `None` if no subset connects them.
pub fn steiner_optimum(g: &FloorplanGraph, terminals: &[TileId]) -> Option<usize> {
    let ancilla: Vec<TileId> = g.tiles_of(TileClass::Ancilla);
    let mut mask = vec![false; g.len()];
    for &t in terminals {
        mask[t.index()] = true;
    }
    let mut chosen = Vec::new();
    for k in 0..=ancilla.len() {
        if subsets_of_size(g, &ancilla, k, 0, &mut chosen, &mut mask, terminals) {
            return Some(k);
        }
    }
    None
}

fn subsets_of_size(
    g: &FloorplanGraph,
    pool: &[TileId],
    k: usize,
    from: usize,
    chosen: &mut Vec<TileId>,
    mask: &mut [bool],
    terminals: &[TileId],
) -> bool {
    if chosen.len() == k {
        return connected(g, mask, terminals[0]) == terminals.len() + k;
    }
    for i in from..pool.len() {
        if pool.len() - i < k - chosen.len() {
            break;
        }
        chosen.push(pool[i]);
        mask[pool[i].index()] = true;
        let hit = subsets_of_size(g, pool, k, i + 1, chosen, mask, terminals);
        mask[pool[i].index()] = false;
        chosen.pop();
        if hit {
            return true;
        }
    }
    false
}

/// Replays the pick log and checks that every pick is an argmin over the
/// data tiles still free at that moment: seeds against the anchor, later
/// picks against the partial cluster.
pub fn check_growth_order(
    g: &FloorplanGraph,
    dist: &[Vec<u32>],
    demands: &[ClusterDemand],
    free_data: &[bool],
    part: &Partition,
) -> Result<(), String> {
    let mut free: Vec<bool> = g.tiles().map(|t| free_data[t.index()] && g.is_data(t)).collect();
    let mut partial: Vec<Vec<TileId>> = vec![Vec::new(); demands.len()];
    for &(i, v) in &part.picks {
        if !free[v.index()] {
            return Err(format!("{v} picked twice or not free"));
        }
        let key = |u: TileId| -> u32 {
            if partial[i].is_empty() {
                demands[i]
                    .anchor
                    .iter()
                    .map(|a| dist[u.index()][a.index()])
                    .min()
                    .unwrap_or(0)
            } else {
                partial[i].iter().map(|c| dist[u.index()][c.index()]).min().unwrap()
            }
        };
        let best = g.tiles().filter(|u| free[u.index()]).map(key).min().unwrap();
        if key(v) != best {
            return Err(format!("demand {i} took {v} at distance {} but {best} was free", key(v)));
        }
        free[v.index()] = false;
        partial[i].push(v);
    }
    if partial != part.clusters {
        return Err("pick log disagrees with the returned clusters".into());
    }
    for (d, c) in demands.iter().zip(&part.clusters) {
        if c.len() != d.qubits as usize {
            return Err(format!("cluster size {} for demand {}", c.len(), d.qubits));
        }
    }
    Ok(())
}

/// Full-trace invariant audit. `solo` is indexed like `trace.workloads`.
pub fn audit_trace(trace: &SimTrace, solo: &[Option<u64>]) -> Vec<String> {
    let mut bad = trace.violations.clone();
    for (t, row) in trace.tick_rows() {
        let c = row.cmax_frac();
        if !(0.0..=1.0).contains(&c) {
            bad.push(format!("t={t} cmax {c}"));
        }
        if row.largest_free > row.free_total || row.free_total > trace.total_tiles {
            bad.push(format!("t={t} free counts {row:?}"));
        }
    }
    let mut last: Vec<WorkloadState> = vec![WorkloadState::Queue; trace.workloads.len()];
    let index: HashMap<_, _> = trace.workloads.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    for tr in &trace.transitions {
        let i = index[&tr.workload];
        if tr.from != last[i] {
            bad.push(format!("{} left {:?} while in {:?}", tr.workload, tr.from, last[i]));
        }
        if !tr.from.can_transition_to(tr.to) {
            bad.push(format!("{} illegal {:?} -> {:?}", tr.workload, tr.from, tr.to));
        }
        last[i] = tr.to;
    }
    for (i, r) in trace.workloads.iter().enumerate() {
        if r.infeasible {
            continue;
        }
        match r.lifetime() {
            Some(life) => {
                if last[i] != WorkloadState::Complete {
                    bad.push(format!("{} completed in state {:?}", r.id, last[i]));
                }
                let dwelt: u64 = r.dwell.iter().sum();
                if dwelt != life {
                    bad.push(format!("{} dwell {dwelt} != lifetime {life}", r.id));
                }
                if let Some(s) = solo[i] {
                    if life < s {
                        bad.push(format!("{} ran in {life} < solo {s}", r.id));
                    }
                }
            }
            None => {
                if !trace.incomplete.contains(&r.id) {
                    bad.push(format!("{} unfinished but not listed", r.id));
                }
            }
        }
    }
    let m = &trace.magic;
    if m.consumed > m.delivered || m.delivered > m.requested {
        bad.push(format!("magic not conserved: {m:?}"));
    }
    bad
}

fn subsets(pool: &[TileId], k: usize, from: usize, cur: &mut Vec<TileId>, out: &mut Vec<Vec<TileId>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in from..pool.len() {
        cur.push(pool[i]);
        subsets(pool, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Outcome of the exhaustive small-grid Steiner comparison.
#[derive(Default)]
pub struct SteinerSweep {
    pub checked: usize,
    /// Instances where the core's ancilla count exceeds (2 - 2/|R|) x the
    /// optimal ancilla count.
    pub over_ancilla_bound: Vec<String>,
    /// Same bound on tree edges (ancilla + |R| - 1), the classic form.
    pub over_edge_bound: Vec<String>,
    pub mismatched: Vec<String>,
}

/// Every grid up to 4x4, every root, every terminal set of one to three data
/// tiles; all remaining tiles are ancilla.
pub fn steiner_sweep() -> SteinerSweep {
    let mut out = SteinerSweep::default();
    for rows in 1..=4u32 {
        for cols in 1..=4u32 {
            let n = (rows * cols) as usize;
            for root in 0..n {
                let others: Vec<TileId> = (0..n).filter(|&i| i != root).map(|i| TileId(i as u32)).collect();
                for k in 1..=3 {
                    let mut sets = Vec::new();
                    subsets(&others, k, 0, &mut Vec::new(), &mut sets);
                    for data in sets {
                        let mut classes = vec![TileClass::Ancilla; n];
                        classes[root] = TileClass::MagicPort;
                        for d in &data {
                            classes[d.index()] = TileClass::Data;
                        }
                        let g = FloorplanGraph::grid(rows, cols, classes).unwrap();
                        let mut terminals = data.clone();
                        terminals.push(TileId(root as u32));
                        let opt = steiner_optimum(&g, &terminals);
                        let mut free: Vec<bool> = g.tiles().map(|t| g.is_ancilla(t)).collect();
                        let got = build_core(&g, &data, TileId(root as u32), &mut free);
                        out.checked += 1;
                        let tag = format!("{rows}x{cols} root {root} data {data:?}");
                        match (opt, got) {
                            (None, Err(_)) => {}
                            (Some(opt), Ok(core)) => {
                                let r = terminals.len() as f64;
                                let factor = 2.0 - 2.0 / r;
                                let a = core.ancilla.len() as f64;
                                if a > factor * opt as f64 + 1e-9 {
                                    out.over_ancilla_bound.push(format!("{tag}: {a} vs opt {opt}"));
                                }
                                if a + r - 1.0 > factor * (opt as f64 + r - 1.0) + 1e-9 {
                                    out.over_edge_bound.push(format!("{tag}: {a} vs opt {opt}"));
                                }
                            }
                            (opt, got) => out.mismatched.push(format!("{tag}: {opt:?} vs {got:?}")),
                        }
                    }
                }
            }
        }
    }
    out
}

/// One random partition instance; returns a description of any breach.
pub fn definition_one_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pattern = match rng.gen_range(0..3) {
        0 => LayoutPattern::Banded,
        1 => LayoutPattern::Checkerboard,
        _ => LayoutPattern::Random,
    };
    let spec = LayoutSpec {
        seed,
        ..LayoutSpec::new(rng.gen_range(2..=10), rng.gen_range(2..=10), rng.gen_range(0.2..0.6), rng.gen_range(0..3))
            .with_pattern(pattern)
    };
    let Ok(g) = FloorplanGraph::build(&spec) else {
        return Ok(());
    };
    let free_data: Vec<bool> = g.tiles().map(|t| g.is_data(t) && rng.gen_bool(0.8)).collect();
    let n_free = free_data.iter().filter(|&&f| f).count() as u32;
    let demands: Vec<ClusterDemand> = (0..rng.gen_range(1..=4))
        .map(|i| {
            let anchor = (0..rng.gen_range(0..=2))
                .map(|_| TileId(rng.gen_range(0..g.len() as u32)))
                .collect();
            ClusterDemand::new(WorkloadId(i), rng.gen_range(0..=n_free / 2 + 2), anchor)
        })
        .collect();
    let want: u32 = demands.iter().map(|d| d.qubits).sum();
    match compact_partition(&g, &demands, &free_data) {
        Ok(part) => {
            if want > n_free {
                return Err(format!("seed {seed}: {want} qubits from {n_free} free tiles"));
            }
            let dist = floyd_warshall(&g);
            check_growth_order(&g, &dist, &demands, &free_data, &part).map_err(|e| format!("seed {seed}: {e}"))
        }
        Err(PlacementError::InsufficientData { .. }) if want > n_free => Ok(()),
        Err(e) => Err(format!("seed {seed}: {e} with {want} of {n_free}")),
    }
}
