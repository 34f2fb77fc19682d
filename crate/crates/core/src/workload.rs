//! Synthetic Clifford+T workloads and the column-per-phase execution model.
//!
//! All randomness goes through `ChaCha8Rng` seeded from a `u64`, so a given
//! seed produces the same workload on every platform.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct WorkloadId(pub u32);

impl fmt::Display for WorkloadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Big,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Medium, SizeClass::Big];

    /// Inclusive logical-qubit range.
    pub fn qubit_range(self) -> (u32, u32) {
        match self {
            SizeClass::Small => (10, 20),
            SizeClass::Medium => (40, 60),
            SizeClass::Big => (60, 100),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixCategory {
    Small,
    Medium,
    Big,
    Balanced,
}

impl MixCategory {
    pub const ALL: [MixCategory; 4] = [
        MixCategory::Small,
        MixCategory::Medium,
        MixCategory::Big,
        MixCategory::Balanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MixCategory::Small => "small",
            MixCategory::Medium => "medium",
            MixCategory::Big => "big",
            MixCategory::Balanced => "balanced",
        }
    }

    fn named_class(self) -> Option<SizeClass> {
        match self {
            MixCategory::Small => Some(SizeClass::Small),
            MixCategory::Medium => Some(SizeClass::Medium),
            MixCategory::Big => Some(SizeClass::Big),
            MixCategory::Balanced => None,
        }
    }
}

impl std::str::FromStr for MixCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(MixCategory::Small),
            "medium" => Ok(MixCategory::Medium),
            "big" => Ok(MixCategory::Big),
            "balanced" => Ok(MixCategory::Balanced),
            other => Err(format!("unknown mix '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TGate {
    pub qubit: u32,
    pub axis: Axis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Workload {
    pub id: WorkloadId,
    pub qubits: u32,
    pub columns: u32,
    /// One list per column, sorted by qubit.
    pub t_gates: Vec<Vec<TGate>>,
    pub column_phase_bits: Vec<bool>,
    pub arrival_time: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<SizeClass>,
}

impl Workload {
    pub fn t_count(&self) -> usize {
        self.t_gates.iter().map(Vec::len).sum()
    }

    /// Number of columns holding at least one T gate.
    pub fn t_depth(&self) -> usize {
        self.t_gates.iter().filter(|c| !c.is_empty()).count()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("T budget {budget} exceeds the {cells}-cell qubit-column grid")]
    BudgetTooLarge { budget: u64, cells: u64 },
    #[error("workload must have at least one qubit and one column")]
    Empty,
}

/// Places `t_budget` T gates on distinct cells of the `q x c` grid, uniformly
/// without replacement, with uniform axes and one Bernoulli(0.5) phase bit per
/// column.
pub fn generate_workload(
    q: u32,
    c: u32,
    t_budget: u64,
    seed: u64,
) -> Result<Workload, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with(&mut rng, WorkloadId(0), q, c, t_budget)
}

fn generate_with(
    rng: &mut ChaCha8Rng,
    id: WorkloadId,
    q: u32,
    c: u32,
    t_budget: u64,
) -> Result<Workload, WorkloadError> {
    if q == 0 || c == 0 {
        return Err(WorkloadError::Empty);
    }
    let cells = q as u64 * c as u64;
    if t_budget > cells {
        return Err(WorkloadError::BudgetTooLarge {
            budget: t_budget,
            cells,
        });
    }
    let mut t_gates = vec![Vec::new(); c as usize];
    let mut picked = index::sample(rng, cells as usize, t_budget as usize).into_vec();
    picked.sort_unstable();
    const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
    for cell in picked {
        let column = cell / q as usize;
        let qubit = (cell % q as usize) as u32;
        let axis = AXES[rng.gen_range(0..3)];
        t_gates[column].push(TGate { qubit, axis });
    }
    let column_phase_bits = (0..c).map(|_| rng.gen_bool(0.5)).collect();
    Ok(Workload {
        id,
        qubits: q,
        columns: c,
        t_gates,
        column_phase_bits,
        arrival_time: 0,
        class: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Inclusive range the T-depth target is drawn from.
    pub t_depth_range: (u32, u32),
    /// Extra Clifford-only columns as a fraction of the T-depth target.
    pub clifford_column_frac: f64,
    /// Inclusive range of T gates per T-bearing column, as a fraction of q.
    pub t_per_column_frac: (f64, f64),
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            t_depth_range: (10, 1000),
            clifford_column_frac: 0.25,
            t_per_column_frac: (0.02, 0.12),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadMix {
    pub category: MixCategory,
    pub count: u32,
    pub seed: u64,
    #[serde(default)]
    pub params: GeneratorParams,
}

impl WorkloadMix {
    pub fn new(category: MixCategory, count: u32, seed: u64) -> Self {
        Self {
            category,
            count,
            seed,
            params: GeneratorParams::default(),
        }
    }
}

/// Size classes for a mix, before shuffling: the named class takes
/// `round(0.8 * count)` slots and the rest cycle through all classes.
pub fn mix_classes(category: MixCategory, count: u32) -> Vec<SizeClass> {
    let (named, rest) = match category.named_class() {
        Some(class) => {
            let n = ((count as f64) * 0.8).round() as u32;
            (vec![class; n as usize], count - n)
        }
        None => (Vec::new(), count),
    };
    let mut out = named;
    out.extend((0..rest).map(|i| SizeClass::ALL[(i % 3) as usize]));
    out
}

/// Draws a workload mix. Arrival times are left at zero; the engine's arrival
/// model fills them in.
pub fn sample_mix(mix: &WorkloadMix) -> Vec<Workload> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix.seed);
    let mut classes = mix_classes(mix.category, mix.count);
    classes.shuffle(&mut rng);
    classes
        .into_iter()
        .enumerate()
        .map(|(i, class)| {
            let mut wl_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            sample_one(&mut wl_rng, WorkloadId(i as u32), class, &mix.params)
        })
        .collect()
}

fn sample_one(
    rng: &mut ChaCha8Rng,
    id: WorkloadId,
    class: SizeClass,
    params: &GeneratorParams,
) -> Workload {
    let (lo, hi) = class.qubit_range();
    let q = rng.gen_range(lo..=hi);
    let (dmin, dmax) = params.t_depth_range;
    let (flo, fhi) = params.t_per_column_frac;
    let mut last = None;
    // The T-depth of a uniform cell sample is random; redraw until it lands
    // inside the configured range.
    for _ in 0..64 {
        let depth = rng.gen_range(dmin..=dmax);
        let extra = (depth as f64 * params.clifford_column_frac).round() as u32;
        let c = depth + extra;
        let per_col = rng.gen_range(flo..=fhi) * q as f64;
        let budget = ((per_col * depth as f64).round() as u64).clamp(depth as u64, q as u64 * c as u64);
        let mut w = generate_with(rng, id, q, c, budget).expect("budget within grid");
        w.class = Some(class);
        let realized = w.t_depth() as u32;
        if (dmin..=dmax).contains(&realized) {
            return w;
        }
        last = Some(w);
    }
    last.expect("at least one attempt")
}

/// Scheduler-visible descriptor of one execution phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDescriptor {
    pub index: u32,
    /// Primary-scratchpad tiles requested.
    pub r_prim: u32,
    /// Secondary-scratchpad tiles requested.
    pub delta_sec: u32,
    /// Magic states consumed.
    pub magic: u32,
    /// Duration in cycles once magic states are available.
    pub duration: u32,
    pub blocking: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub clifford_duration: u32,
    pub t_layer_duration: u32,
    pub routing_slack: u32,
    /// Secondary tiles needed to route each magic state into the workload.
    pub magic_lane_tiles: u32,
}

impl Default for PhaseModel {
    fn default() -> Self {
        Self {
            clifford_duration: 1,
            t_layer_duration: 3,
            routing_slack: 1,
            magic_lane_tiles: 6,
        }
    }
}

impl PhaseModel {
    /// Lane overflow only, with no magic-state routing charge.
    pub fn overflow_only() -> Self {
        Self {
            magic_lane_tiles: 0,
            ..Self::default()
        }
    }

    pub fn describe(&self, index: u32, qubits: u32, t_in_column: u32) -> PhaseDescriptor {
        let mu = t_in_column;
        let r_prim = (mu + self.routing_slack).min(qubits);
        PhaseDescriptor {
            index,
            r_prim,
            delta_sec: mu.saturating_sub(r_prim) + self.magic_lane_tiles * mu,
            magic: mu,
            duration: if mu > 0 {
                self.t_layer_duration
            } else {
                self.clifford_duration
            }
            .max(1),
            blocking: mu > 0,
        }
    }
}

/// One descriptor per circuit column, in column order.
pub fn phase_sequence(w: &Workload, model: &PhaseModel) -> Vec<PhaseDescriptor> {
    w.t_gates
        .iter()
        .enumerate()
        .map(|(k, col)| model.describe(k as u32, w.qubits, col.len() as u32))
        .collect()
}
