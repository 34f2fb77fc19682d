//! Magic-state cultivation on idle ancilla tiles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::floorplan::{FloorplanGraph, TileClass, TileId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TilePhase {
    Idle,
    Routing,
    /// Cycles of cultivation completed so far.
    Cultivating(u32),
    ReadyMagic,
}

impl TilePhase {
    pub fn can_transition_to(self, next: TilePhase) -> bool {
        use TilePhase::*;
        match (self, next) {
            (Idle, Routing) | (Idle, Cultivating(0)) => true,
            (Cultivating(_), Idle | ReadyMagic | Routing) => true,
            (Cultivating(a), Cultivating(b)) => b == a + 1,
            (ReadyMagic, Idle | Routing) => true,
            (Routing, Idle) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CultivationParams {
    /// Cycles from the start of cultivation to a ready state.
    pub latency: u32,
    /// Post-selection failure probability per attempt.
    pub p_fail: f64,
}

impl Default for CultivationParams {
    fn default() -> Self {
        Self {
            latency: 26,
            p_fail: 0.0,
        }
    }
}

/// Ready magic states, sorted by tile id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReadySet {
    pub tiles: Vec<TileId>,
}

impl ReadySet {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CultivationStats {
    pub escapes: u64,
    pub failures: u64,
    pub consumed: u64,
    pub reclaimed_ready: u64,
}

/// Phase of every ancilla tile (`None` for data tiles).
#[derive(Clone, Debug)]
pub struct CultivationField {
    phases: Vec<Option<TilePhase>>,
    params: CultivationParams,
    ready: usize,
    pub stats: CultivationStats,
}

impl CultivationField {
    pub fn new(g: &FloorplanGraph, params: CultivationParams) -> Self {
        Self::filled(g, params, TilePhase::Idle)
    }

    /// Every ancilla tile already holds a ready state.
    pub fn prewarmed(g: &FloorplanGraph, params: CultivationParams) -> Self {
        Self::filled(g, params, TilePhase::ReadyMagic)
    }

    fn filled(g: &FloorplanGraph, params: CultivationParams, phase: TilePhase) -> Self {
        let phases: Vec<Option<TilePhase>> = g
            .tiles()
            .map(|t| (g.class_of(t) == TileClass::Ancilla).then_some(phase))
            .collect();
        let ready = if phase == TilePhase::ReadyMagic {
            phases.iter().flatten().count()
        } else {
            0
        };
        Self {
            phases,
            params,
            ready,
            stats: CultivationStats::default(),
        }
    }

    pub fn phase(&self, t: TileId) -> Option<TilePhase> {
        self.phases[t.index()]
    }

    pub fn ready_count(&self) -> usize {
        self.ready
    }

    fn set(&mut self, t: TileId, next: TilePhase) {
        let slot = self.phases[t.index()].as_mut().expect("ancilla tile");
        debug_assert!(slot.can_transition_to(next), "{slot:?} -> {next:?}");
        if *slot == TilePhase::ReadyMagic {
            self.ready -= 1;
        }
        if next == TilePhase::ReadyMagic {
            self.ready += 1;
        }
        *slot = next;
    }

    /// Routing claim; always preempts cultivation.
    pub fn claim(&mut self, t: TileId) {
        match self.phases[t.index()] {
            Some(TilePhase::Routing) | None => {}
            Some(p) => {
                if p == TilePhase::ReadyMagic {
                    self.stats.reclaimed_ready += 1;
                }
                self.set(t, TilePhase::Routing);
            }
        }
    }

    /// End of a routing claim.
    pub fn release(&mut self, t: TileId) {
        if self.phases[t.index()] == Some(TilePhase::Routing) {
            self.set(t, TilePhase::Idle);
        }
    }

    /// One cycle: claimed tiles route, unclaimed idle tiles start cultivating
    /// and cultivating tiles progress, escaping after `latency` cycles.
    pub fn tick<R: Rng>(&mut self, claimed: &[bool], rng: &mut R) {
        for i in 0..self.phases.len() {
            let Some(p) = self.phases[i] else { continue };
            let t = TileId(i as u32);
            if claimed[i] {
                self.claim(t);
                continue;
            }
            match p {
                TilePhase::Routing => self.set(t, TilePhase::Idle),
                TilePhase::Idle => self.set(t, TilePhase::Cultivating(0)),
                TilePhase::Cultivating(k) if k + 1 >= self.params.latency => {
                    let fail = self.params.p_fail > 0.0 && rng.gen_bool(self.params.p_fail.min(1.0));
                    if fail {
                        self.stats.failures += 1;
                        self.set(t, TilePhase::Idle);
                    } else {
                        self.stats.escapes += 1;
                        self.set(t, TilePhase::ReadyMagic);
                    }
                }
                TilePhase::Cultivating(k) => self.set(t, TilePhase::Cultivating(k + 1)),
                TilePhase::ReadyMagic => {}
            }
        }
    }

    pub fn ready_set(&self) -> ReadySet {
        ReadySet {
            tiles: self
                .phases
                .iter()
                .enumerate()
                .filter(|(_, p)| **p == Some(TilePhase::ReadyMagic))
                .map(|(i, _)| TileId(i as u32))
                .collect(),
        }
    }

    /// Measures out ready states; the tiles return to Idle.
    pub fn consume(&mut self, tiles: &[TileId]) {
        for &t in tiles {
            assert_eq!(self.phases[t.index()], Some(TilePhase::ReadyMagic));
            self.set(t, TilePhase::Idle);
            self.stats.consumed += 1;
        }
    }
}

/// The `mu` ready tiles nearest the footprint (ties: lower id), or `None` when
/// fewer than `mu` are ready.
pub fn assign_magic(
    g: &FloorplanGraph,
    ready: &ReadySet,
    footprint: &[TileId],
    mu: u32,
) -> Option<Vec<TileId>> {
    let mu = mu as usize;
    if ready.len() < mu {
        return None;
    }
    let mut ranked: Vec<(u32, TileId)> = ready
        .tiles
        .iter()
        .map(|&t| (g.dist_to_set(t, footprint.iter().copied()).unwrap_or(u32::MAX), t))
        .collect();
    ranked.sort_unstable();
    let mut out: Vec<TileId> = ranked[..mu].iter().map(|&(_, t)| t).collect();
    out.sort_unstable();
    Some(out)
}
