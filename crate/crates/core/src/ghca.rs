//! One-dimensional Greenberg-Hastings automaton.
//!
//! States are `0` (rest), `1..=e` (excited) and `e+1..=e+r` (refractory).
//! A pulse is a block `(e+r, …, 2, 1)` travelling right, or its mirror
//! travelling left; its head is the freshly excited cell in state `1`, whose
//! trailing neighbour is in state `2`. Collision extraction follows heads.
//!
//! Excitation is two-sided: a resting cell fires when either neighbour is
//! excited. The direction of a pulse is carried by the shape of its block.
//! Pulses in a train need at least one rest cell between them; a head that
//! touches the refractory tail of the pulse ahead stalls for one step.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CARule {
    pub e: u8,
    pub r: u8,
}

impl Default for CARule {
    fn default() -> Self {
        Self { e: 2, r: 4 }
    }
}

impl CARule {
    pub fn new(e: u8, r: u8) -> Result<Self> {
        if e == 0 || r == 0 || e as u16 + r as u16 > 250 {
            return Err(invalid(format!("need e >= 1, r >= 1 and a small alphabet, got e = {e}, r = {r}")));
        }
        Ok(Self { e, r })
    }

    pub fn top(&self) -> u8 {
        self.e + self.r
    }

    pub fn is_excited(&self, s: u8) -> bool {
        s >= 1 && s <= self.e
    }

    /// Right-moving pulse block, oldest cell first.
    pub fn pulse_right(&self) -> Vec<u8> {
        (1..=self.top()).rev().collect()
    }

    /// Left-moving pulse block, head first.
    pub fn pulse_left(&self) -> Vec<u8> {
        (1..=self.top()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CABoundary {
    Periodic,
    #[default]
    FixedRest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CAConfiguration {
    pub cells: Vec<u8>,
    pub boundary: CABoundary,
}

impl CAConfiguration {
    pub fn new(cells: Vec<u8>, boundary: CABoundary) -> Self {
        Self { cells, boundary }
    }

    pub fn rest(len: usize, boundary: CABoundary) -> Self {
        Self { cells: vec![0; len], boundary }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn validate(&self, rule: &CARule) -> Result<()> {
        match self.cells.iter().position(|&s| s > rule.top()) {
            Some(i) => Err(invalid(format!("cell {i} holds state {} above e+r = {}", self.cells[i], rule.top()))),
            None => Ok(()),
        }
    }

    fn neighbor(&self, i: usize, offset: isize) -> u8 {
        let n = self.cells.len() as isize;
        let j = i as isize + offset;
        if (0..n).contains(&j) {
            self.cells[j as usize]
        } else {
            match self.boundary {
                CABoundary::Periodic => self.cells[j.rem_euclid(n) as usize],
                CABoundary::FixedRest => 0,
            }
        }
    }
}

/// Builds a configuration from a sequence of blocks: `Gap(k)` rest cells,
/// `Right` or `Left` pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Gap(usize),
    Right,
    Left,
}

pub fn build_configuration(rule: &CARule, blocks: &[Block], boundary: CABoundary) -> CAConfiguration {
    let mut cells = Vec::new();
    for b in blocks {
        match b {
            Block::Gap(k) => cells.extend(std::iter::repeat(0).take(*k)),
            Block::Right => cells.extend(rule.pulse_right()),
            Block::Left => cells.extend(rule.pulse_left()),
        }
    }
    CAConfiguration { cells, boundary }
}

/// One synchronous update.
pub fn step(rule: &CARule, config: &CAConfiguration) -> CAConfiguration {
    let top = rule.top();
    let cells = (0..config.len())
        .map(|i| match config.cells[i] {
            0 => {
                if rule.is_excited(config.neighbor(i, -1)) || rule.is_excited(config.neighbor(i, 1)) {
                    1
                } else {
                    0
                }
            }
            s if s >= top => 0,
            s => s + 1,
        })
        .collect();
    CAConfiguration { cells, boundary: config.boundary }
}

/// The orbit `[config, step(config), …]` with `steps + 1` entries.
pub fn run(rule: &CARule, config: &CAConfiguration, steps: usize) -> Vec<CAConfiguration> {
    let mut orbit = Vec::with_capacity(steps + 1);
    orbit.push(config.clone());
    for _ in 0..steps {
        let next = step(rule, orbit.last().expect("orbit is never empty"));
        orbit.push(next);
    }
    orbit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Left,
    Right,
}

/// A pulse head: the cell in state 1 and the direction it moves in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pulse {
    pub position: usize,
    pub direction: Direction,
}

/// Heads in the configuration, ordered by position (right before left on a tie,
/// which only happens for the single cell shared by two colliding heads).
pub fn identify_pulses(config: &CAConfiguration) -> Vec<Pulse> {
    let mut out = Vec::new();
    for i in 0..config.len() {
        if config.cells[i] != 1 {
            continue;
        }
        if config.neighbor(i, -1) == 2 {
            out.push(Pulse { position: i, direction: Direction::Right });
        }
        if config.neighbor(i, 1) == 2 {
            out.push(Pulse { position: i, direction: Direction::Left });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Collision cell: the shared cell, or the left one of two adjacent heads.
    pub p: i64,
    /// First step at which both heads are gone.
    pub s: u64,
    /// Labels of the annihilated pulses; labels number the pulses of the
    /// initial configuration from left to right.
    pub right_mover: usize,
    pub left_mover: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionSequence {
    pub events: Vec<CollisionEvent>,
}

#[derive(Debug, Clone, Copy)]
struct TrackedHead {
    label: usize,
    pulse: Pulse,
}

/// Follows every head of `orbit[0]` and records one event per annihilating
/// right/left pair. Heads that leave through a fixed-rest boundary vanish
/// without an event.
pub fn extract_collisions(orbit: &[CAConfiguration]) -> CollisionSequence {
    let Some(first) = orbit.first() else {
        return CollisionSequence::default();
    };
    let n = first.len();
    let mut alive: Vec<TrackedHead> =
        identify_pulses(first).into_iter().enumerate().map(|(label, pulse)| TrackedHead { label, pulse }).collect();
    let mut events = Vec::new();
    for (s, config) in orbit.iter().enumerate().skip(1) {
        let heads = identify_pulses(config);
        let mut survivors = Vec::with_capacity(alive.len());
        let mut vanished = Vec::new();
        for th in &alive {
            let target = match th.pulse.direction {
                Direction::Right => next_cell(th.pulse.position, 1, n, config.boundary),
                Direction::Left => next_cell(th.pulse.position, -1, n, config.boundary),
            };
            let hit = target.and_then(|t| heads.iter().find(|p| p.position == t && p.direction == th.pulse.direction));
            match hit {
                Some(p) => survivors.push(TrackedHead { label: th.label, pulse: *p }),
                None => vanished.push(*th),
            }
        }
        let mut used = vec![false; vanished.len()];
        for a in 0..vanished.len() {
            if used[a] || vanished[a].pulse.direction != Direction::Right {
                continue;
            }
            let pr = vanished[a].pulse.position;
            let partner = (0..vanished.len()).find(|&b| {
                !used[b] && vanished[b].pulse.direction == Direction::Left && {
                    let pl = vanished[b].pulse.position;
                    let gap = match config.boundary {
                        CABoundary::Periodic => (pl + n - pr) % n,
                        CABoundary::FixedRest => pl.wrapping_sub(pr),
                    };
                    gap <= 1
                }
            });
            if let Some(b) = partner {
                used[a] = true;
                used[b] = true;
                events.push(CollisionEvent {
                    p: pr as i64,
                    s: s as u64,
                    right_mover: vanished[a].label,
                    left_mover: vanished[b].label,
                });
            }
        }
        alive = survivors;
    }
    events.sort_by_key(|e| (e.s, e.p));
    CollisionSequence { events }
}

fn next_cell(i: usize, offset: isize, n: usize, boundary: CABoundary) -> Option<usize> {
    let j = i as isize + offset;
    if (0..n as isize).contains(&j) {
        Some(j as usize)
    } else if boundary == CABoundary::Periodic {
        Some(j.rem_euclid(n as isize) as usize)
    } else {
        None
    }
}

/// Symmetric setup with `pairs` right movers on the left and as many left
/// movers on the right. `gaps[0]` separates the innermost pair and `gaps[k]`
/// separates the k-th and (k+1)-th pulse on each side; `margin` rest cells pad
/// both ends.
pub fn symmetric_pairs(rule: &CARule, gaps: &[usize], margin: usize) -> CAConfiguration {
    let mut blocks = vec![Block::Gap(margin)];
    for k in (1..gaps.len()).rev() {
        blocks.push(Block::Right);
        blocks.push(Block::Gap(gaps[k]));
    }
    blocks.push(Block::Right);
    blocks.push(Block::Gap(gaps[0]));
    blocks.push(Block::Left);
    for &g in &gaps[1..] {
        blocks.push(Block::Gap(g));
        blocks.push(Block::Left);
    }
    blocks.push(Block::Gap(margin));
    build_configuration(rule, &blocks, CABoundary::FixedRest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule() -> CARule {
        CARule::default()
    }

    #[test]
    fn rest_is_fixed_point() {
        for b in [CABoundary::Periodic, CABoundary::FixedRest] {
            let c = CAConfiguration::rest(17, b);
            assert_eq!(step(&rule(), &c), c);
        }
    }

    #[test]
    fn refractory_completion() {
        let mut c = CAConfiguration::rest(9, CABoundary::FixedRest);
        c.cells[4] = rule().top();
        assert_eq!(step(&rule(), &c).cells, vec![0; 9]);
    }

    #[test]
    fn run_lengths() {
        let c = CAConfiguration::rest(5, CABoundary::FixedRest);
        assert_eq!(run(&rule(), &c, 0), vec![c.clone()]);
        assert_eq!(run(&rule(), &c, 7).len(), 8);
    }

    #[test]
    fn rejects_states_above_alphabet() {
        let c = CAConfiguration::new(vec![0, 7, 0], CABoundary::FixedRest);
        assert!(c.validate(&rule()).is_err());
        assert!(CARule::new(0, 3).is_err());
    }

    #[test]
    fn isolated_pulses_move_one_cell_per_step() {
        let r = rule();
        let c = build_configuration(&r, &[Block::Gap(3), Block::Right, Block::Gap(20)], CABoundary::FixedRest);
        let orbit = run(&r, &c, 10);
        for (s, cfg) in orbit.iter().enumerate() {
            let p = identify_pulses(cfg);
            assert_eq!(p.len(), 1);
            assert_eq!(p[0].direction, Direction::Right);
            assert_eq!(p[0].position, 3 + 5 + s);
        }
        let c = build_configuration(&r, &[Block::Gap(20), Block::Left, Block::Gap(3)], CABoundary::FixedRest);
        let orbit = run(&r, &c, 10);
        for (s, cfg) in orbit.iter().enumerate() {
            let p = identify_pulses(cfg);
            assert_eq!(p, vec![Pulse { position: 20 - s, direction: Direction::Left }]);
        }
    }

    #[test]
    fn counter_propagating_pair_annihilates_at_midpoint() {
        let r = rule();
        for gap in [0usize, 1, 2, 5, 6] {
            let c = symmetric_pairs(&r, &[gap], 4);
            let orbit = run(&r, &c, 40);
            assert!(orbit.last().unwrap().cells.iter().all(|&s| s == 0));
            let ev = extract_collisions(&orbit).events;
            assert_eq!(ev.len(), 1, "gap {gap}");
            let head_r = 4 + 5;
            let head_l = head_r + gap + 1;
            let mid = (head_r + head_l) / 2;
            assert_eq!(ev[0].p, mid as i64, "gap {gap}");
            assert_eq!(ev[0].s as usize, (head_l - head_r) / 2 + 1, "gap {gap}");
            assert_eq!((ev[0].right_mover, ev[0].left_mover), (0, 1));
        }
    }

    #[test]
    fn no_collisions_for_same_direction_train() {
        let r = rule();
        let c = build_configuration(&r, &[Block::Gap(2), Block::Right, Block::Gap(3), Block::Right, Block::Gap(30)], CABoundary::FixedRest);
        assert!(extract_collisions(&run(&r, &c, 40)).events.is_empty());
        assert!(extract_collisions(&[]).events.is_empty());
    }

    #[test]
    fn periodic_wraparound_collision() {
        let r = rule();
        // right mover at the end, left mover at the start: they meet across the seam
        let c = build_configuration(&r, &[Block::Left, Block::Gap(10), Block::Right], CABoundary::Periodic);
        let orbit = run(&r, &c, 30);
        let ev = extract_collisions(&orbit).events;
        assert_eq!(ev.len(), 1);
        assert!(orbit.last().unwrap().cells.iter().all(|&s| s == 0));
    }

    /// Four symmetric pairs with even gaps: innermost first, and the step
    /// between consecutive events is e + r + (k_n + k_{-n})/2 with the
    /// position fixed at the common midpoint.
    #[test]
    fn four_pairs_bottom_to_top() {
        let r = rule();
        let gaps = [2usize, 4, 6, 2];
        let c = symmetric_pairs(&r, &gaps, 3);
        let orbit = run(&r, &c, 120);
        let ev = extract_collisions(&orbit).events;
        assert_eq!(ev.len(), 4);
        for w in ev.windows(2) {
            assert!(w[0].s < w[1].s);
            assert_eq!(w[0].p, w[1].p);
        }
        for (k, e) in ev.iter().enumerate() {
            // labels 0..3 are the right movers left to right; the innermost is 3
            assert_eq!(e.right_mover, 3 - k);
            assert_eq!(e.left_mover, 4 + k);
        }
        for n in 1..4 {
            let expected = (r.top() as usize + gaps[n]) as u64;
            assert_eq!(ev[n].s - ev[n - 1].s, expected);
        }
    }

    fn arb_train() -> impl Strategy<Value = (Vec<usize>, usize)> {
        (proptest::collection::vec(1usize..6, 1..5), 0usize..4)
    }

    proptest! {
        #[test]
        fn same_direction_distances_conserved((gaps, lead) in arb_train()) {
            let r = rule();
            let mut blocks = vec![Block::Gap(lead)];
            for g in &gaps {
                blocks.push(Block::Right);
                blocks.push(Block::Gap(*g));
            }
            blocks.push(Block::Right);
            blocks.push(Block::Gap(60));
            let c = build_configuration(&r, &blocks, CABoundary::FixedRest);
            let d0: Vec<usize> = identify_pulses(&c).windows(2).map(|w| w[1].position - w[0].position).collect();
            for cfg in run(&r, &c, 30) {
                let d: Vec<usize> = identify_pulses(&cfg).windows(2).map(|w| w[1].position - w[0].position).collect();
                prop_assert_eq!(&d, &d0);
            }
        }

        #[test]
        fn pulse_count_drops_only_in_opposite_pairs(left in proptest::collection::vec(1usize..5, 1..4), right in proptest::collection::vec(1usize..5, 1..4), mid in 0usize..7) {
            let r = rule();
            let mut blocks = vec![Block::Gap(2)];
            for g in &left {
                blocks.push(Block::Right);
                blocks.push(Block::Gap(*g));
            }
            blocks.push(Block::Gap(mid));
            for g in &right {
                blocks.push(Block::Left);
                blocks.push(Block::Gap(*g));
            }
            blocks.push(Block::Gap(2));
            let c = build_configuration(&r, &blocks, CABoundary::Periodic);
            let orbit = run(&r, &c, 80);
            let count = |cfg: &CAConfiguration, d: Direction| identify_pulses(cfg).iter().filter(|p| p.direction == d).count();
            for w in orbit.windows(2) {
                let (r0, l0) = (count(&w[0], Direction::Right), count(&w[0], Direction::Left));
                let (r1, l1) = (count(&w[1], Direction::Right), count(&w[1], Direction::Left));
                prop_assert!(r1 <= r0 && l1 <= l0);
                prop_assert_eq!(r0 - r1, l0 - l1);
            }
            let ev = extract_collisions(&orbit).events;
            prop_assert_eq!(ev.len(), left.len().min(right.len()));
        }
    }
}
