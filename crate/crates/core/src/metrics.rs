//! Evaluation quantities computed from simulation traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTrace;
use crate::floorplan::{FloorplanGraph, Occupancy};
use crate::policies::WorkloadState;
use crate::workload::WorkloadId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{} workloads did not complete", .0.len())]
    Incomplete(Vec<WorkloadId>),
    #[error("solo times for {solo} workloads, trace has {trace}")]
    Mismatch { solo: usize, trace: usize },
}

fn check(trace: &SimTrace, solo: &[Option<u64>]) -> Result<(), MetricsError> {
    if solo.len() != trace.workloads.len() {
        return Err(MetricsError::Mismatch {
            solo: solo.len(),
            trace: trace.workloads.len(),
        });
    }
    Ok(())
}

/// Counted workloads: feasible, with a solo time, in trace order.
fn counted<'a>(
    trace: &'a SimTrace,
    solo: &'a [Option<u64>],
) -> impl Iterator<Item = (usize, u64)> + 'a {
    trace
        .workloads
        .iter()
        .zip(solo)
        .enumerate()
        .filter(|(_, (r, s))| !r.infeasible && s.is_some())
        .map(|(i, (_, s))| (i, s.expect("filtered")))
}

/// Sum of solo times over the makespan. Every counted workload must finish.
pub fn normalized_throughput(trace: &SimTrace, solo: &[Option<u64>]) -> Result<f64, MetricsError> {
    check(trace, solo)?;
    let missing: Vec<WorkloadId> = counted(trace, solo)
        .filter(|&(i, _)| trace.workloads[i].completed.is_none())
        .map(|(i, _)| trace.workloads[i].id)
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::Incomplete(missing));
    }
    Ok(partial_throughput(trace, solo).0)
}

/// Throughput over completed workloads only, with an "is partial" flag.
pub fn partial_throughput(trace: &SimTrace, solo: &[Option<u64>]) -> (f64, bool) {
    let mut sum = 0u64;
    let mut partial = false;
    let mut makespan = 0u64;
    for (i, s) in counted(trace, solo) {
        match trace.workloads[i].completed {
            Some(c) => {
                sum += s;
                makespan = makespan.max(c);
            }
            None => partial = true,
        }
    }
    let eta = if makespan == 0 {
        0.0
    } else {
        sum as f64 / makespan as f64
    };
    (eta, partial)
}

/// `(arrival to completion) / solo` per completed workload.
pub fn slowdowns(trace: &SimTrace, solo: &[Option<u64>]) -> Vec<(WorkloadId, f64)> {
    counted(trace, solo)
        .filter_map(|(i, s)| {
            let r = &trace.workloads[i];
            r.lifetime().map(|life| (r.id, slowdown(life, s)))
        })
        .collect()
}

pub fn slowdown(shared: u64, solo: u64) -> f64 {
    shared as f64 / solo.max(1) as f64
}

/// Largest free component over all free tiles; 1.0 when nothing is free.
pub fn cmax(g: &FloorplanGraph, occ: &Occupancy) -> f64 {
    let comps = g.free_components(occ);
    let total: usize = comps.iter().map(Vec::len).sum();
    if total == 0 {
        1.0
    } else {
        comps[0].len() as f64 / total as f64
    }
}

/// Mean share of lifetime, in percent, spent in each waiting state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitBreakdown {
    pub queue: f64,
    pub parked: f64,
    pub wait_primary: f64,
    pub wait_secondary: f64,
}

impl WaitBreakdown {
    pub fn get(&self, s: WorkloadState) -> f64 {
        match s {
            WorkloadState::Queue => self.queue,
            WorkloadState::Parked => self.parked,
            WorkloadState::WaitPrimary => self.wait_primary,
            WorkloadState::WaitSecondary => self.wait_secondary,
            _ => 0.0,
        }
    }
}

/// Per-workload state shares in percent, keyed by `WorkloadState::index`.
pub fn state_shares(trace: &SimTrace) -> Vec<(WorkloadId, [f64; 7])> {
    trace
        .workloads
        .iter()
        .filter_map(|r| {
            let life = r.lifetime()?;
            let mut pct = [0.0; 7];
            for s in WorkloadState::ALL {
                pct[s.index()] = 100.0 * r.dwell_in(s) as f64 / life.max(1) as f64;
            }
            Some((r.id, pct))
        })
        .collect()
}

pub fn wait_breakdown(trace: &SimTrace) -> WaitBreakdown {
    let shares = state_shares(trace);
    if shares.is_empty() {
        return WaitBreakdown::default();
    }
    let n = shares.len() as f64;
    let mean = |s: WorkloadState| shares.iter().map(|(_, p)| p[s.index()]).sum::<f64>() / n;
    WaitBreakdown {
        queue: mean(WorkloadState::Queue),
        parked: mean(WorkloadState::Parked),
        wait_primary: mean(WorkloadState::WaitPrimary),
        wait_secondary: mean(WorkloadState::WaitSecondary),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CmaxSummary {
    pub min: f64,
    /// Time-weighted mean over the run.
    pub mean: f64,
    /// Mean over the ticks where the free space was smallest.
    pub at_peak: f64,
}

pub fn cmax_summary(trace: &SimTrace) -> CmaxSummary {
    if trace.rows.is_empty() {
        return CmaxSummary {
            min: 1.0,
            mean: 1.0,
            at_peak: 1.0,
        };
    }
    let mut min = f64::INFINITY;
    let mut weighted = 0.0;
    let mut ticks = 0u64;
    let least_free = trace.rows.iter().map(|r| r.row.free_total).min().unwrap_or(0);
    let (mut peak_sum, mut peak_ticks) = (0.0, 0u64);
    for r in &trace.rows {
        let c = r.row.cmax_frac();
        min = min.min(c);
        weighted += c * r.len as f64;
        ticks += r.len;
        if r.row.free_total == least_free {
            peak_sum += c * r.len as f64;
            peak_ticks += r.len;
        }
    }
    CmaxSummary {
        min,
        mean: weighted / ticks.max(1) as f64,
        at_peak: peak_sum / peak_ticks.max(1) as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eta: f64,
    pub eta_partial: bool,
    pub completed: usize,
    pub excluded: usize,
    pub makespan: u64,
    pub mean_slowdown: f64,
    pub max_slowdown: f64,
    pub min_slowdown: f64,
    pub slowdowns: Vec<(WorkloadId, f64)>,
    pub waits: WaitBreakdown,
    pub cmax: CmaxSummary,
}

pub fn report(trace: &SimTrace, solo: &[Option<u64>]) -> Result<MetricsReport, MetricsError> {
    check(trace, solo)?;
    let (eta, eta_partial) = partial_throughput(trace, solo);
    let sd = slowdowns(trace, solo);
    let vals: Vec<f64> = sd.iter().map(|&(_, s)| s).collect();
    let mean = if vals.is_empty() {
        1.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    Ok(MetricsReport {
        eta,
        eta_partial,
        completed: vals.len(),
        excluded: trace.workloads.len() - counted(trace, solo).count(),
        makespan: trace.makespan,
        mean_slowdown: mean,
        max_slowdown: if vals.is_empty() {
            1.0
        } else {
            vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        },
        min_slowdown: if vals.is_empty() {
            1.0
        } else {
            vals.iter().copied().fold(f64::INFINITY, f64::min)
        },
        slowdowns: sd,
        waits: wait_breakdown(trace),
        cmax: cmax_summary(trace),
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{RowRun, TickRow, WorkloadRecord};
    use crate::floorplan::{TileClass, TileId};

    fn record(id: u32, arrival: u64, completed: u64, dwell: [u64; 7]) -> WorkloadRecord {
        WorkloadRecord {
            id: WorkloadId(id),
            qubits: 10,
            class: None,
            arrival,
            admitted: Some(arrival),
            completed: Some(completed),
            dwell,
            parks: 0,
            infeasible: false,
        }
    }

    fn trace(workloads: Vec<WorkloadRecord>) -> SimTrace {
        SimTrace {
            makespan: workloads.iter().filter_map(|w| w.completed).max().unwrap_or(0),
            rows: Vec::new(),
            workloads,
            transitions: Vec::new(),
            horizon_reached: false,
            incomplete: Vec::new(),
            magic: Default::default(),
            occupancy_digest: 0,
            violations: Vec::new(),
            total_tiles: 0,
            free_tiles_total: 0,
        }
    }

    fn running(n: u64) -> [u64; 7] {
        let mut d = [0; 7];
        d[WorkloadState::Running.index()] = n;
        d
    }

    #[test]
    fn single_workload_eta_one() {
        let t = trace(vec![record(0, 0, 100, running(100))]);
        assert_eq!(normalized_throughput(&t, &[Some(100)]).unwrap(), 1.0);
    }

    #[test]
    fn sequential_pair_eta_one() {
        let t = trace(vec![record(0, 0, 50, running(50)), record(1, 0, 100, running(100))]);
        assert_eq!(normalized_throughput(&t, &[Some(50), Some(50)]).unwrap(), 1.0);
    }

    #[test]
    fn parallel_pair_eta_two() {
        let t = trace(vec![record(0, 0, 50, running(50)), record(1, 0, 50, running(50))]);
        assert_eq!(normalized_throughput(&t, &[Some(50), Some(50)]).unwrap(), 2.0);
    }

    #[test]
    fn incomplete_is_an_error_but_partial_reported() {
        let mut r = record(1, 0, 0, [0; 7]);
        r.completed = None;
        let t = trace(vec![record(0, 0, 40, running(40)), r]);
        assert_eq!(
            normalized_throughput(&t, &[Some(40), Some(40)]),
            Err(MetricsError::Incomplete(vec![WorkloadId(1)]))
        );
        assert_eq!(partial_throughput(&t, &[Some(40), Some(40)]), (1.0, true));
    }

    #[test]
    fn queue_delay_slowdown() {
        let mut d = running(100);
        d[WorkloadState::Queue.index()] = 10;
        let t = trace(vec![record(0, 5, 115, d)]);
        let s = slowdowns(&t, &[Some(100)]);
        assert!((s[0].1 - 1.10).abs() < 1e-12);
    }

    #[test]
    fn wait_secondary_share() {
        let mut d = running(80);
        d[WorkloadState::WaitSecondary.index()] = 20;
        let t = trace(vec![record(0, 0, 100, d)]);
        let w = wait_breakdown(&t);
        assert!((w.wait_secondary - 20.0).abs() < 1e-12);
        assert_eq!(w.queue, 0.0);
    }

    #[test]
    fn uncontended_has_no_waits() {
        let t = trace(vec![record(0, 0, 100, running(100))]);
        assert_eq!(wait_breakdown(&t), WaitBreakdown::default());
    }

    #[test]
    fn cmax_examples() {
        let g = FloorplanGraph::grid(1, 5, vec![TileClass::Ancilla; 5]).unwrap();
        let mut occ = Occupancy::for_graph(&g);
        assert_eq!(cmax(&g, &occ), 1.0);
        occ.claim(TileId(2), WorkloadId(0)).unwrap();
        assert_eq!(cmax(&g, &occ), 0.5);
        for t in [0, 1, 3, 4] {
            occ.claim(TileId(t), WorkloadId(0)).unwrap();
        }
        assert_eq!(cmax(&g, &occ), 1.0);
    }

    #[test]
    fn cmax_summary_weights_time() {
        let mut t = trace(vec![]);
        let row = |free, largest| TickRow {
            free_total: free,
            largest_free: largest,
            n_running: 0,
            n_parked: 0,
            n_waitp: 0,
            n_waits: 0,
        };
        t.rows = vec![
            RowRun { start: 0, len: 3, row: row(10, 10) },
            RowRun { start: 3, len: 1, row: row(4, 2) },
        ];
        let s = cmax_summary(&t);
        assert_eq!(s.min, 0.5);
        assert!((s.mean - 3.5 / 4.0).abs() < 1e-12);
        assert_eq!(s.at_peak, 0.5);
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
    }
}
