//! Tile floorplan: a 4-neighbour grid graph whose vertices are typed as data
//! tiles, ancilla tiles or magic-state ports.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::WorkloadId;

/// Above this many tiles the all-pairs matrix is not stored; distances are
/// answered by a fresh breadth-first search instead.
pub const DENSE_DISTANCE_LIMIT: usize = 4096;

/// Distance value for vertex pairs with no connecting path.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TileId(pub u32);

impl TileId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TileClass {
    Data,
    Ancilla,
    MagicPort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutPattern {
    /// Two-row data bands separated by one ancilla lane (rows with `r % 3 == 2`).
    Banded,
    /// Data on `(r + c)` even cells.
    Checkerboard,
    /// Seeded uniform scatter; may strand data tiles without ancilla access.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortRule {
    /// Evenly spaced along a clockwise walk of the grid boundary.
    Perimeter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub rows: u32,
    pub cols: u32,
    pub data_density: f64,
    #[serde(default = "default_pattern")]
    pub layout_pattern: LayoutPattern,
    #[serde(default)]
    pub num_ports: u32,
    #[serde(default = "default_port_rule")]
    pub port_rule: PortRule,
    /// Only consulted by [`LayoutPattern::Random`].
    #[serde(default)]
    pub seed: u64,
}

fn default_pattern() -> LayoutPattern {
    LayoutPattern::Banded
}

fn default_port_rule() -> PortRule {
    PortRule::Perimeter
}

impl LayoutSpec {
    pub fn new(rows: u32, cols: u32, data_density: f64, num_ports: u32) -> Self {
        Self {
            rows,
            cols,
            data_density,
            layout_pattern: LayoutPattern::Banded,
            num_ports,
            port_rule: PortRule::Perimeter,
            seed: 0,
        }
    }

    pub fn with_pattern(mut self, pattern: LayoutPattern) -> Self {
        self.layout_pattern = pattern;
        self
    }
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self::new(20, 12, 0.5, 50)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FloorplanError {
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    EmptyGrid { rows: u32, cols: u32 },
    #[error("data density {0} is outside (0, 1]")]
    Density(f64),
    #[error("{ports} ports requested but the boundary has only {boundary} tiles")]
    TooManyPorts { ports: u32, boundary: u32 },
    #[error("{data} data tiles do not fit next to {ports} ports on {total} tiles")]
    Overfull { data: usize, ports: usize, total: usize },
    #[error("class vector has {got} entries, expected {expected}")]
    ClassCount { got: usize, expected: usize },
    #[error("edge ({0}, {1}) is out of range or a self-loop")]
    BadEdge(u32, u32),
}

#[derive(Clone, Debug)]
enum Distances {
    Dense(Vec<u16>),
    OnDemand,
}

/// Undirected, unweighted tile graph with precomputed hop distances.
#[derive(Clone, Debug)]
pub struct FloorplanGraph {
    rows: u32,
    cols: u32,
    classes: Vec<TileClass>,
    adjacency: Vec<Vec<TileId>>,
    distances: Distances,
}

impl FloorplanGraph {
    /// Builds the floorplan described by `spec`.
    pub fn build(spec: &LayoutSpec) -> Result<Self, FloorplanError> {
        let classes = layout_classes(spec)?;
        Self::grid(spec.rows, spec.cols, classes)
    }

    /// Full 4-neighbour grid with caller-supplied tile classes (row-major).
    pub fn grid(rows: u32, cols: u32, classes: Vec<TileClass>) -> Result<Self, FloorplanError> {
        if rows == 0 || cols == 0 {
            return Err(FloorplanError::EmptyGrid { rows, cols });
        }
        let n = (rows * cols) as usize;
        if classes.len() != n {
            return Err(FloorplanError::ClassCount {
                got: classes.len(),
                expected: n,
            });
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let u = r * cols + c;
                if c + 1 < cols {
                    edges.push((u, u + 1));
                }
                if r + 1 < rows {
                    edges.push((u, u + cols));
                }
            }
        }
        Self::from_edges(rows, cols, classes, &edges)
    }

    /// Arbitrary graph over `rows * cols` vertices. Grid coordinates are still
    /// reported row-major but carry no adjacency meaning.
    pub fn from_edges(
        rows: u32,
        cols: u32,
        classes: Vec<TileClass>,
        edges: &[(u32, u32)],
    ) -> Result<Self, FloorplanError> {
        let n = (rows as usize) * (cols as usize);
        if n == 0 {
            return Err(FloorplanError::EmptyGrid { rows, cols });
        }
        if classes.len() != n {
            return Err(FloorplanError::ClassCount {
                got: classes.len(),
                expected: n,
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a as usize >= n || b as usize >= n {
                return Err(FloorplanError::BadEdge(a, b));
            }
            if !adjacency[a as usize].contains(&TileId(b)) {
                adjacency[a as usize].push(TileId(b));
                adjacency[b as usize].push(TileId(a));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let mut graph = Self {
            rows,
            cols,
            classes,
            adjacency,
            distances: Distances::OnDemand,
        };
        if n <= DENSE_DISTANCE_LIMIT {
            let mut matrix = vec![u16::MAX; n * n];
            for s in 0..n {
                let row = graph.bfs(TileId(s as u32));
                for (v, d) in row.into_iter().enumerate() {
                    if d != UNREACHABLE {
                        matrix[s * n + v] = d as u16;
                    }
                }
            }
            graph.distances = Distances::Dense(matrix);
        }
        Ok(graph)
    }

    /// Same geometry with every magic-state port turned into an ancilla tile.
    pub fn without_ports(&self) -> Self {
        let mut g = self.clone();
        for class in &mut g.classes {
            if *class == TileClass::MagicPort {
                *class = TileClass::Ancilla;
            }
        }
        g
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn tiles(&self) -> impl Iterator<Item = TileId> + '_ {
        (0..self.classes.len() as u32).map(TileId)
    }

    pub fn class_of(&self, t: TileId) -> TileClass {
        self.classes[t.index()]
    }

    pub fn is_data(&self, t: TileId) -> bool {
        self.class_of(t) == TileClass::Data
    }

    pub fn is_ancilla(&self, t: TileId) -> bool {
        self.class_of(t) == TileClass::Ancilla
    }

    pub fn tiles_of(&self, class: TileClass) -> Vec<TileId> {
        self.tiles().filter(|&t| self.class_of(t) == class).collect()
    }

    pub fn count_of(&self, class: TileClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn coords(&self, t: TileId) -> (u32, u32) {
        (t.0 / self.cols, t.0 % self.cols)
    }

    pub fn tile_at(&self, row: u32, col: u32) -> TileId {
        TileId(row * self.cols + col)
    }

    pub fn neighbors(&self, t: TileId) -> &[TileId] {
        &self.adjacency[t.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop distance, or [`UNREACHABLE`].
    pub fn dist(&self, u: TileId, v: TileId) -> u32 {
        match &self.distances {
            Distances::Dense(m) => {
                let d = m[u.index() * self.len() + v.index()];
                if d == u16::MAX {
                    UNREACHABLE
                } else {
                    d as u32
                }
            }
            Distances::OnDemand => self.bfs(u)[v.index()],
        }
    }

    /// `min_{v in set} dist(u, v)`; `None` when the set is empty.
    pub fn dist_to_set<I>(&self, u: TileId, set: I) -> Option<u32>
    where
        I: IntoIterator<Item = TileId>,
    {
        set.into_iter().map(|v| self.dist(u, v)).min()
    }

    /// Single-source hop distances.
    pub fn bfs(&self, source: TileId) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.len()];
        let mut queue = VecDeque::new();
        dist[source.index()] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            for &v in self.neighbors(u) {
                if dist[v.index()] == UNREACHABLE {
                    dist[v.index()] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Connected components of the free data + ancilla tiles. Ports never
    /// count as free. Components are returned sorted, largest first, ties
    /// broken by smallest member.
    pub fn free_components(&self, occ: &Occupancy) -> Vec<Vec<TileId>> {
        let free: Vec<bool> = self
            .tiles()
            .map(|t| self.class_of(t) != TileClass::MagicPort && occ.owner(t).is_none())
            .collect();
        self.components_of(&free)
    }

    /// `(free tiles, largest free component)` without materializing the
    /// components.
    pub fn free_summary(&self, occ: &Occupancy) -> (usize, usize) {
        let free = |t: TileId| self.class_of(t) != TileClass::MagicPort && occ.owner(t).is_none();
        let mut seen = vec![false; self.len()];
        let mut stack = Vec::new();
        let (mut total, mut largest) = (0, 0);
        for start in self.tiles() {
            if seen[start.index()] || !free(start) {
                continue;
            }
            seen[start.index()] = true;
            stack.push(start);
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in self.neighbors(u) {
                    if !seen[v.index()] && free(v) {
                        seen[v.index()] = true;
                        stack.push(v);
                    }
                }
            }
            total += size;
            largest = largest.max(size);
        }
        (total, largest)
    }

    /// Connected components of the subgraph induced by `mask`.
    pub fn components_of(&self, mask: &[bool]) -> Vec<Vec<TileId>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in self.tiles() {
            if !mask[start.index()] || seen[start.index()] {
                continue;
            }
            let mut comp = Vec::new();
            seen[start.index()] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in self.neighbors(u) {
                    if mask[v.index()] && !seen[v.index()] {
                        seen[v.index()] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        out
    }
}

/// Tile ownership. Each tile has at most one owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    owners: Vec<Option<WorkloadId>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("tile {tile} is already owned by {owner:?}")]
pub struct DoubleOwnership {
    pub tile: TileId,
    pub owner: WorkloadId,
}

impl Occupancy {
    pub fn new(n: usize) -> Self {
        Self {
            owners: vec![None; n],
        }
    }

    pub fn for_graph(g: &FloorplanGraph) -> Self {
        Self::new(g.len())
    }

    pub fn owner(&self, t: TileId) -> Option<WorkloadId> {
        self.owners[t.index()]
    }

    pub fn is_free(&self, t: TileId) -> bool {
        self.owners[t.index()].is_none()
    }

    pub fn claim(&mut self, t: TileId, w: WorkloadId) -> Result<(), DoubleOwnership> {
        match self.owners[t.index()] {
            Some(owner) if owner != w => Err(DoubleOwnership { tile: t, owner }),
            _ => {
                self.owners[t.index()] = Some(w);
                Ok(())
            }
        }
    }

    pub fn release(&mut self, t: TileId) {
        self.owners[t.index()] = None;
    }

    pub fn release_all(&mut self, w: WorkloadId) {
        for o in &mut self.owners {
            if *o == Some(w) {
                *o = None;
            }
        }
    }

    pub fn owned_by(&self, w: WorkloadId) -> Vec<TileId> {
        self.owners
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(w))
            .map(|(i, _)| TileId(i as u32))
            .collect()
    }

    pub fn occupied(&self, g: &FloorplanGraph, class: TileClass) -> Vec<TileId> {
        g.tiles()
            .filter(|&t| g.class_of(t) == class && self.owner(t).is_some())
            .collect()
    }

    pub fn free_of(&self, g: &FloorplanGraph, class: TileClass) -> Vec<TileId> {
        g.tiles()
            .filter(|&t| g.class_of(t) == class && self.owner(t).is_none())
            .collect()
    }

    pub fn free_mask(&self, g: &FloorplanGraph, class: TileClass) -> Vec<bool> {
        g.tiles()
            .map(|t| g.class_of(t) == class && self.owner(t).is_none())
            .collect()
    }

    pub fn as_slice(&self) -> &[Option<WorkloadId>] {
        &self.owners
    }
}

/// Clockwise walk of the grid boundary starting at the top-left corner.
fn perimeter(rows: u32, cols: u32) -> Vec<u32> {
    if rows == 1 || cols == 1 {
        return (0..rows * cols).collect();
    }
    let mut walk = Vec::with_capacity((2 * (rows + cols) - 4) as usize);
    walk.extend(0..cols);
    walk.extend((1..rows).map(|r| r * cols + cols - 1));
    walk.extend((0..cols - 1).rev().map(|c| (rows - 1) * cols + c));
    walk.extend((1..rows - 1).rev().map(|r| r * cols));
    walk
}

fn layout_classes(spec: &LayoutSpec) -> Result<Vec<TileClass>, FloorplanError> {
    let (rows, cols) = (spec.rows, spec.cols);
    if rows == 0 || cols == 0 {
        return Err(FloorplanError::EmptyGrid { rows, cols });
    }
    if !(spec.data_density > 0.0 && spec.data_density <= 1.0) {
        return Err(FloorplanError::Density(spec.data_density));
    }
    let n = (rows * cols) as usize;
    let boundary = perimeter(rows, cols);
    if spec.num_ports as usize > boundary.len() {
        return Err(FloorplanError::TooManyPorts {
            ports: spec.num_ports,
            boundary: boundary.len() as u32,
        });
    }
    let mut classes = vec![TileClass::Ancilla; n];
    let ports = spec.num_ports as usize;
    match spec.port_rule {
        PortRule::Perimeter => {
            for i in 0..ports {
                classes[boundary[i * boundary.len() / ports] as usize] = TileClass::MagicPort;
            }
        }
    }
    let n_data = (spec.data_density * n as f64).round() as usize;
    if n_data + ports > n {
        return Err(FloorplanError::Overfull {
            data: n_data,
            ports,
            total: n,
        });
    }

    let on_boundary = |i: u32| {
        let (r, c) = (i / cols, i % cols);
        r == 0 || c == 0 || r + 1 == rows || c + 1 == cols
    };
    let candidates: Vec<u32> = (0..n as u32)
        .filter(|&i| classes[i as usize] != TileClass::MagicPort)
        .collect();

    let chosen: Vec<u32> = match spec.layout_pattern {
        LayoutPattern::Banded => {
            let is_lane = |i: u32| (i / cols) % 3 == 2;
            let lane_neighbor = |i: u32| {
                let (r, c) = (i / cols, i % cols);
                let mut ns = Vec::with_capacity(4);
                if r > 0 {
                    ns.push(i - cols);
                }
                if r + 1 < rows {
                    ns.push(i + cols);
                }
                if c > 0 {
                    ns.push(i - 1);
                }
                if c + 1 < cols {
                    ns.push(i + 1);
                }
                ns.into_iter()
                    .any(|j| is_lane(j) && classes[j as usize] != TileClass::MagicPort)
            };
            let mut ranked = candidates.clone();
            ranked.sort_by_key(|&i| (is_lane(i), !lane_neighbor(i), on_boundary(i), i));
            ranked.truncate(n_data);
            ranked
        }
        LayoutPattern::Checkerboard => {
            let mut ranked = candidates.clone();
            ranked.sort_by_key(|&i| (((i / cols) + (i % cols)) % 2, i));
            ranked.truncate(n_data);
            ranked
        }
        LayoutPattern::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut shuffled = candidates.clone();
            shuffled.shuffle(&mut rng);
            shuffled.truncate(n_data);
            shuffled
        }
    };
    for i in chosen {
        classes[i as usize] = TileClass::Data;
    }
    Ok(classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path5(classes: [TileClass; 5]) -> FloorplanGraph {
        FloorplanGraph::grid(1, 5, classes.to_vec()).unwrap()
    }

    #[test]
    fn table_one_floorplan_counts() {
        let g = FloorplanGraph::build(&LayoutSpec::new(20, 12, 0.5, 50)).unwrap();
        assert_eq!(g.count_of(TileClass::Data), 120);
        assert_eq!(g.count_of(TileClass::MagicPort), 50);
        assert_eq!(g.count_of(TileClass::Ancilla), 70);
        for t in g.tiles_of(TileClass::MagicPort) {
            let (r, c) = g.coords(t);
            assert!(r == 0 || c == 0 || r == 19 || c == 11);
        }
        for t in g.tiles_of(TileClass::Data) {
            assert!(g.neighbors(t).iter().any(|&n| g.is_ancilla(n)), "{t} stranded");
        }
    }

    #[test]
    fn single_tile_grid() {
        let g = FloorplanGraph::build(&LayoutSpec::new(1, 1, 1.0, 0)).unwrap();
        assert_eq!(g.class_of(TileId(0)), TileClass::Data);
        assert_eq!(g.dist(TileId(0), TileId(0)), 0);
    }

    #[test]
    fn two_by_two_checkerboard() {
        let spec = LayoutSpec::new(2, 2, 0.5, 0).with_pattern(LayoutPattern::Checkerboard);
        let g = FloorplanGraph::build(&spec).unwrap();
        assert_eq!(g.count_of(TileClass::Data), 2);
        assert_eq!(g.count_of(TileClass::Ancilla), 2);
        for t in g.tiles_of(TileClass::Data) {
            assert!(g.neighbors(t).iter().any(|&n| g.is_ancilla(n)));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(
            FloorplanGraph::build(&LayoutSpec::new(4, 4, 0.0, 0)).unwrap_err(),
            FloorplanError::Density(0.0)
        );
        assert!(FloorplanGraph::build(&LayoutSpec::new(4, 4, 1.5, 0)).is_err());
        assert_eq!(
            FloorplanGraph::build(&LayoutSpec::new(3, 3, 0.5, 9)).unwrap_err(),
            FloorplanError::TooManyPorts {
                ports: 9,
                boundary: 8
            }
        );
    }

    #[test]
    fn scaled_floorplans_keep_ancilla_access() {
        for (r, c) in [(30, 18), (40, 24), (60, 36)] {
            let g = FloorplanGraph::build(&LayoutSpec::new(r, c, 0.5, 50)).unwrap();
            assert_eq!(g.count_of(TileClass::Data), (r * c / 2) as usize);
            for t in g.tiles_of(TileClass::Data) {
                assert!(g.neighbors(t).iter().any(|&n| g.is_ancilla(n)));
            }
        }
    }

    #[test]
    fn distance_to_set() {
        use TileClass::*;
        let g = path5([Data, Data, Data, Data, Data]);
        assert_eq!(g.dist_to_set(TileId(0), [TileId(2), TileId(4)]), Some(2));
        assert_eq!(g.dist_to_set(TileId(3), [TileId(3), TileId(0)]), Some(0));
        assert_eq!(g.dist_to_set(TileId(3), []), None);

        let big = FloorplanGraph::build(&LayoutSpec::new(20, 12, 0.5, 50)).unwrap();
        let far = big.tile_at(19, 11);
        assert_eq!(big.dist_to_set(big.tile_at(0, 0), [far]), Some(30));
    }

    #[test]
    fn free_components_examples() {
        use TileClass::*;
        let g = path5([Data, Ancilla, Data, Ancilla, Data]);
        let mut occ = Occupancy::for_graph(&g);
        assert_eq!(g.free_components(&occ), vec![g.tiles().collect::<Vec<_>>()]);

        occ.claim(TileId(2), WorkloadId(1)).unwrap();
        assert_eq!(
            g.free_components(&occ),
            vec![vec![TileId(0), TileId(1)], vec![TileId(3), TileId(4)]]
        );

        for t in g.tiles() {
            occ.claim(t, WorkloadId(1)).unwrap();
        }
        assert!(g.free_components(&occ).is_empty());
        assert_eq!(g.free_summary(&occ), (0, 0));
    }

    #[test]
    fn ports_are_never_free() {
        use TileClass::*;
        let g = path5([MagicPort, Ancilla, Data, Ancilla, Data]);
        let comps = g.free_components(&Occupancy::for_graph(&g));
        assert_eq!(comps, vec![vec![TileId(1), TileId(2), TileId(3), TileId(4)]]);
    }

    #[test]
    fn occupancy_rejects_second_owner() {
        let mut occ = Occupancy::new(3);
        occ.claim(TileId(1), WorkloadId(0)).unwrap();
        occ.claim(TileId(1), WorkloadId(0)).unwrap();
        assert_eq!(
            occ.claim(TileId(1), WorkloadId(2)),
            Err(DoubleOwnership {
                tile: TileId(1),
                owner: WorkloadId(0)
            })
        );
    }

    #[test]
    fn without_ports_converts_to_ancilla() {
        let g = FloorplanGraph::build(&LayoutSpec::new(20, 12, 0.5, 50)).unwrap();
        let h = g.without_ports();
        assert_eq!(h.count_of(TileClass::MagicPort), 0);
        assert_eq!(h.count_of(TileClass::Ancilla), 120);
        assert_eq!(h.count_of(TileClass::Data), 120);
    }
}
