//! Automaton vs PDE collision sequences.
//!
//! Automaton events `(p_n, s_n)` live on integer cells and steps; PDE events
//! `(x_n, t_n)` on the real line. A single time scale `τ` is fitted by least
//! squares, `τ = Σ t_n s_n / Σ s_n²`. Cells are mapped to space by placing
//! `origin_cell` at `x = 0` and giving each cell the distance a single PDE
//! front covers in `τ` time units, so one automaton step per cell corresponds
//! to the front speed.

use serde::{Deserialize, Serialize};

use kinks::ghca::CollisionSequence;
use kinks::positions::EventLog;

/// One annihilation event in either system. `pair` numbers the annihilating
/// pairs from the inside out, starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceEvent {
    pub pair: usize,
    pub position: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceMap {
    /// Cell that corresponds to `x = 0`.
    pub origin_cell: f64,
    /// Single-front speed in the PDE.
    pub front_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDiscrepancy {
    pub index: usize,
    pub position: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceComparison {
    pub tau: f64,
    /// Length of one automaton cell in PDE units.
    pub cell_width: f64,
    /// Per-event `|x_n − x(p_n)|` and `|t_n − τ s_n|`, matched in time order.
    pub events: Vec<EventDiscrepancy>,
    pub max_position_error: f64,
    pub max_time_error: f64,
    /// Set when the two sequences have different lengths.
    pub structural: Option<String>,
    pub ordering_ghca: Vec<usize>,
    pub ordering_pde: Vec<usize>,
    pub ordering_match: bool,
}

/// Automaton events of a symmetric `pairs`-pair setup; the innermost right
/// mover carries label `pairs − 1`.
pub fn ghca_sequence(seq: &CollisionSequence, pairs: usize) -> Vec<SequenceEvent> {
    seq.events
        .iter()
        .map(|e| SequenceEvent { pair: pairs.saturating_sub(e.right_mover), position: e.p as f64, time: e.s as f64 })
        .collect()
}

/// PDE annihilations of a single valley; the `k`-th annihilation removes the
/// `k`-th pair from the inside.
pub fn pde_sequence(log: &EventLog) -> Vec<SequenceEvent> {
    log.annihilations.iter().map(|e| SequenceEvent { pair: e.level as usize, position: e.x, time: e.t }).collect()
}

fn time_order(events: &[SequenceEvent]) -> Vec<SequenceEvent> {
    let mut v = events.to_vec();
    v.sort_by(|a, b| a.time.total_cmp(&b.time));
    v
}

pub fn compare_collision_sequences(ghca: &[SequenceEvent], pde: &[SequenceEvent], map: &SpaceMap) -> SequenceComparison {
    let g = time_order(ghca);
    let p = time_order(pde);
    let m = g.len().min(p.len());
    let (num, den) = (0..m).fold((0.0, 0.0), |(n, d), k| (n + p[k].time * g[k].time, d + g[k].time * g[k].time));
    let tau = if den > 0.0 { num / den } else { 1.0 };
    let cell_width = map.front_speed * tau;
    let events: Vec<EventDiscrepancy> = (0..m)
        .map(|k| EventDiscrepancy {
            index: k,
            position: (p[k].position - (g[k].position - map.origin_cell) * cell_width).abs(),
            time: (p[k].time - tau * g[k].time).abs(),
        })
        .collect();
    let structural = (g.len() != p.len()).then(|| format!("automaton has {} events, PDE has {}", g.len(), p.len()));
    let ordering_ghca: Vec<usize> = g.iter().map(|e| e.pair).collect();
    let ordering_pde: Vec<usize> = p.iter().map(|e| e.pair).collect();
    SequenceComparison {
        tau,
        cell_width,
        max_position_error: events.iter().map(|e| e.position).fold(0.0, f64::max),
        max_time_error: events.iter().map(|e| e.time).fold(0.0, f64::max),
        events,
        structural,
        ordering_match: ordering_ghca == ordering_pde,
        ordering_ghca,
        ordering_pde,
    }
}
