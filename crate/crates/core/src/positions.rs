//! Geometric and analytic positions of kinks and antikinks.
//!
//! A geometric position is a point where `u` crosses an odd multiple of `π`;
//! crossings are located by linear interpolation between grid nodes. Falling
//! crossings belong to kinks and rising ones to antikinks.
//!
//! Collisions and annihilations are read off the valleys of `u`. Each valley
//! walks up a ladder of thresholds `π, 2π − tol, 3π, 4π − tol, …`: passing an
//! odd multiple `(2i − 1)π` is collision `i`, passing `2πi − tol` is
//! annihilation `i`. The minimum only approaches `2πi` asymptotically, hence
//! the tolerance. Event times are refined by bisection, re-integrating from the
//! last observed frame.
//!
//! The analytic positions `η` solve the orthogonality conditions
//! `⟨u − Σ φ(· − η_j), e_i*⟩ = 0` with `e_i*(z) = e^{c(z − η_i)} φ'(z − η_i)`,
//! scaled by the normalization `Λ` so the Jacobian has unit diagonal for
//! well-separated kinks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::front::FrontProfile;
use crate::linalg::trapezoid;
use crate::pde::{Boundary, Field1D, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Kink.
    Falling,
    /// Antikink.
    Rising,
}

/// A level crossing `u(x) = (2k + 1)π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub x: f64,
    pub level: i64,
    pub direction: Direction,
}

impl Crossing {
    pub fn value(&self) -> f64 {
        (2 * self.level + 1) as f64 * PI
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSnapshot {
    pub t: f64,
    /// Sorted by increasing `x`.
    pub crossings: Vec<Crossing>,
}

impl PositionSnapshot {
    /// Kink positions, largest first.
    pub fn kinks(&self) -> Vec<f64> {
        self.of_direction(Direction::Falling)
    }

    /// Antikink positions, largest first.
    pub fn antikinks(&self) -> Vec<f64> {
        self.of_direction(Direction::Rising)
    }

    fn of_direction(&self, d: Direction) -> Vec<f64> {
        let mut xs: Vec<f64> = self.crossings.iter().filter(|c| c.direction == d).map(|c| c.x).collect();
        xs.reverse();
        xs
    }

    /// `d_j = ξ_j − ξ_{j+1}` for the kinks ordered right to left.
    pub fn kink_distances(&self) -> Vec<f64> {
        self.kinks().windows(2).map(|w| w[0] - w[1]).collect()
    }

    pub fn count(&self, level: i64, direction: Direction) -> usize {
        self.crossings.iter().filter(|c| c.level == level && c.direction == direction).count()
    }
}

fn segment_crossings(xa: f64, h: f64, ua: f64, ub: f64, out: &mut Vec<Crossing>) {
    let (lo, hi) = if ua < ub { (ua, ub) } else { (ub, ua) };
    if !(hi > lo) {
        return;
    }
    let k_lo = ((lo / PI - 1.0) / 2.0).ceil() as i64;
    let k_hi = ((hi / PI - 1.0) / 2.0).floor() as i64;
    for k in k_lo..=k_hi {
        let level = (2 * k + 1) as f64 * PI;
        let a = ua - level;
        let b = ub - level;
        // A node sitting exactly on the level is credited to the segment it ends.
        let direction = if a < 0.0 && b >= 0.0 {
            Direction::Rising
        } else if a > 0.0 && b <= 0.0 {
            Direction::Falling
        } else {
            continue;
        };
        out.push(Crossing { x: xa + h * a / (a - b), level: k, direction });
    }
}

/// Collects every crossing of an odd multiple of `π` in the field, including
/// the seam segment of a periodic-with-jump window.
pub fn extract_positions(field: &Field1D) -> PositionSnapshot {
    let u = &field.values;
    let n = u.len();
    let mut crossings = Vec::new();
    for i in 0..n - 1 {
        segment_crossings(field.x(i), field.h, u[i], u[i + 1], &mut crossings);
    }
    if let Boundary::PeriodicJump { .. } = field.boundary {
        segment_crossings(field.x(n - 1), field.h, u[n - 1], field.value_ext(n as isize), &mut crossings);
    }
    crossings.sort_by(|a, b| a.x.total_cmp(&b.x));
    PositionSnapshot { t: field.t, crossings }
}

/// One labelled crossing followed through consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub level: i64,
    pub direction: Direction,
    /// Frame index of the first sample.
    pub start: usize,
    pub positions: Vec<f64>,
}

impl Track {
    /// One past the last frame index.
    pub fn end(&self) -> usize {
        self.start + self.positions.len()
    }

    pub fn at(&self, frame: usize) -> Option<f64> {
        frame.checked_sub(self.start).and_then(|k| self.positions.get(k).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionTrack {
    pub times: Vec<f64>,
    pub tracks: Vec<Track>,
    /// Frames where some track had more than one admissible continuation.
    pub flagged_frames: Vec<usize>,
}

impl PositionTrack {
    /// Central-difference speeds over the track's lifetime (one-sided at the ends).
    pub fn speeds(&self, track: usize) -> Vec<f64> {
        let tr = &self.tracks[track];
        let p = &tr.positions;
        let t = &self.times[tr.start..tr.end()];
        let m = p.len();
        if m < 2 {
            return vec![0.0; m];
        }
        (0..m)
            .map(|k| {
                let (a, b) = (k.saturating_sub(1), (k + 1).min(m - 1));
                (p[b] - p[a]) / (t[b] - t[a])
            })
            .collect()
    }

    /// Indices of kink tracks alive in every frame, ordered right to left at the start.
    pub fn persistent_kinks(&self) -> Vec<usize> {
        let n = self.times.len();
        let mut idx: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| {
                let t = &self.tracks[i];
                t.direction == Direction::Falling && t.start == 0 && t.end() == n
            })
            .collect();
        idx.sort_by(|&a, &b| self.tracks[b].positions[0].total_cmp(&self.tracks[a].positions[0]));
        idx
    }

    /// Distances `d_j(t)` between consecutive persistent kinks; one row per frame.
    pub fn distances(&self) -> Vec<Vec<f64>> {
        let ks = self.persistent_kinks();
        (0..self.times.len())
            .map(|f| ks.windows(2).map(|w| self.tracks[w[0]].positions[f] - self.tracks[w[1]].positions[f]).collect())
            .collect()
    }

    /// `d_min(t)` per frame.
    pub fn min_distance(&self) -> Vec<f64> {
        self.distances().iter().map(|d| d.iter().copied().fold(f64::INFINITY, f64::min)).collect()
    }
}

/// Links crossings frame to frame: same level and direction, nearest location,
/// at most `max_jump` away. Unmatched crossings open new tracks.
pub fn assemble_tracks(snapshots: &[PositionSnapshot], max_jump: f64) -> PositionTrack {
    let mut tracks: Vec<Track> = Vec::new();
    let mut flagged = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for (f, snap) in snapshots.iter().enumerate() {
        let mut pairs = Vec::new();
        let mut ambiguous = false;
        for &ti in &active {
            let tr = &tracks[ti];
            let last = *tr.positions.last().expect("tracks are never empty");
            let mut candidates = 0;
            for (ci, c) in snap.crossings.iter().enumerate() {
                if c.level == tr.level && c.direction == tr.direction {
                    let d = (c.x - last).abs();
                    if d <= max_jump {
                        candidates += 1;
                        pairs.push((d, ti, ci));
                    }
                }
            }
            ambiguous |= candidates > 1;
        }
        if ambiguous {
            flagged.push(f);
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut track_used = vec![false; tracks.len()];
        let mut crossing_used = vec![false; snap.crossings.len()];
        let mut next_active = Vec::new();
        for (_, ti, ci) in pairs {
            if track_used[ti] || crossing_used[ci] {
                continue;
            }
            track_used[ti] = true;
            crossing_used[ci] = true;
            tracks[ti].positions.push(snap.crossings[ci].x);
            next_active.push(ti);
        }
        for (ci, c) in snap.crossings.iter().enumerate() {
            if !crossing_used[ci] {
                next_active.push(tracks.len());
                tracks.push(Track { level: c.level, direction: c.direction, start: f, positions: vec![c.x] });
            }
        }
        active = next_active;
    }
    PositionTrack { times: snapshots.iter().map(|s| s.t).collect(), tracks, flagged_frames: flagged }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub level: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub collisions: Vec<Event>,
    pub annihilations: Vec<Event>,
}

impl EventLog {
    pub fn is_empty(&self) -> bool {
        self.collisions.is_empty() && self.annihilations.is_empty()
    }

    /// `t₁ < t₁ᴬ < t₂ < t₂ᴬ < …` for a single valley whose events start at level 1.
    pub fn is_interleaved(&self) -> bool {
        let n = self.collisions.len();
        if self.annihilations.len() != n {
            return false;
        }
        let mut prev = f64::NEG_INFINITY;
        for (c, a) in self.collisions.iter().zip(&self.annihilations) {
            if !(prev < c.t && c.t < a.t) {
                return false;
            }
            prev = a.t;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOptions {
    /// Annihilation `i` is declared once the valley rises above `2πi − tol`.
    pub annihilation_tol: f64,
    /// Valleys must be at least this deep below the maxima on both sides at the first frame.
    pub min_depth: f64,
    /// Half-width of the window in which a valley's minimum is followed.
    pub valley_window: f64,
    /// Bisection stops once the bracket is shorter than `dt / refine_divisor`.
    pub refine_divisor: f64,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self { annihilation_tol: 1e-3, min_depth: PI / 2.0, valley_window: 3.0, refine_divisor: 16.0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Valley {
    x: f64,
    /// Index of the next threshold on the ladder.
    rung: i64,
}

/// Threshold `r` of the ladder: odd `r = 2i − 1` is collision `i` at `(2i − 1)π`,
/// even `r = 2i` is annihilation `i` at `2πi − tol`.
fn rung_value(r: i64, tol: f64) -> f64 {
    if r % 2 == 0 {
        r as f64 * PI - tol
    } else {
        r as f64 * PI
    }
}

fn first_rung_above(v: f64, tol: f64) -> i64 {
    let mut r = (v / PI).floor() as i64;
    while rung_value(r, tol) <= v {
        r += 1;
    }
    r
}

/// Minimum of `u` over nodes within `half` of `x`, with a parabolic refinement
/// of the location. Returns `(x_min, u_min)`.
fn windowed_min(field: &Field1D, x: f64, half: f64) -> (f64, f64) {
    let n = field.len();
    let lo = (((x - half - field.x0) / field.h).floor().max(0.0) as usize).min(n - 1);
    let hi = (((x + half - field.x0) / field.h).ceil().max(0.0) as usize).min(n - 1);
    let mut best = lo;
    for i in lo..=hi {
        if field.values[i] < field.values[best] {
            best = i;
        }
    }
    let mut xm = field.x(best);
    if best > 0 && best + 1 < n {
        let (a, b, c) = (field.values[best - 1], field.values[best], field.values[best + 1]);
        let curv = a - 2.0 * b + c;
        if curv > 0.0 {
            xm += 0.5 * field.h * (a - c) / curv;
        }
    }
    (xm, field.values[best])
}

fn find_valleys(field: &Field1D, min_depth: f64) -> Vec<f64> {
    let u = &field.values;
    let n = u.len();
    let mut left_max = vec![f64::NEG_INFINITY; n];
    let mut right_max = vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        left_max[i] = if i == 0 { u[0] } else { left_max[i - 1].max(u[i]) };
    }
    for i in (0..n).rev() {
        right_max[i] = if i == n - 1 { u[n - 1] } else { right_max[i + 1].max(u[i]) };
    }
    let mut out: Vec<f64> = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if u[i] <= u[i - 1] && u[i] <= u[i + 1] && left_max[i] - u[i] >= min_depth && right_max[i] - u[i] >= min_depth {
            // A flat-bottomed valley is reported once, at the middle of its floor.
            let mut j = i;
            while j + 1 < n && u[j + 1] == u[i] {
                j += 1;
            }
            out.push(0.5 * (field.x(i) + field.x(j)));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Online collision/annihilation detector fed with observer frames.
#[derive(Debug)]
pub struct EventDetector<'a> {
    sim: &'a Simulation,
    opts: EventOptions,
    valleys: Vec<Valley>,
    prev: Option<Field1D>,
    log: EventLog,
    error: Option<Error>,
}

impl<'a> EventDetector<'a> {
    pub fn new(sim: &'a Simulation, opts: EventOptions) -> Self {
        Self { sim, opts, valleys: Vec::new(), prev: None, log: EventLog::default(), error: None }
    }

    pub fn observe(&mut self, field: &Field1D) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.observe_inner(field) {
            self.error = Some(e);
        }
    }

    fn observe_inner(&mut self, field: &Field1D) -> Result<()> {
        let tol = self.opts.annihilation_tol;
        let Some(prev) = self.prev.take() else {
            self.valleys = find_valleys(field, self.opts.min_depth)
                .into_iter()
                .map(|x| {
                    let (x, v) = windowed_min(field, x, self.opts.valley_window);
                    Valley { x, rung: first_rung_above(v, tol) }
                })
                .collect();
            self.prev = Some(field.clone());
            return Ok(());
        };
        for k in 0..self.valleys.len() {
            let mut start = prev.clone();
            loop {
                let valley = self.valleys[k];
                let (x_now, v_now) = windowed_min(field, valley.x, self.opts.valley_window);
                let threshold = rung_value(valley.rung, tol);
                if v_now < threshold {
                    self.valleys[k].x = x_now;
                    break;
                }
                let (t_ev, x_ev, refined_start) = self.refine(&start, field.t, valley.x, threshold)?;
                let event = Event { t: t_ev, x: x_ev, level: (valley.rung + 1) / 2 };
                if valley.rung % 2 == 0 {
                    self.log.annihilations.push(event);
                } else {
                    self.log.collisions.push(event);
                }
                self.valleys[k].rung += 1;
                self.valleys[k].x = x_ev;
                start = refined_start;
            }
        }
        self.prev = Some(field.clone());
        Ok(())
    }

    /// Bisects on time between `start.t` and `t_b` for the first instant where
    /// the valley near `x` rises through `threshold`.
    fn refine(&self, start: &Field1D, t_b: f64, x: f64, threshold: f64) -> Result<(f64, f64, Field1D)> {
        let tol = self.sim.dt / self.opts.refine_divisor;
        let mut a = start.clone();
        let mut x_a = x;
        let mut hi = t_b;
        let mut hit: Option<(f64, f64, Field1D)> = None;
        while hi - a.t > tol {
            let mid = 0.5 * (a.t + hi);
            let mut m = a.clone();
            self.sim.advance_to(&mut m, mid)?;
            let (xm, vm) = windowed_min(&m, x_a, self.opts.valley_window);
            if vm >= threshold {
                hi = mid;
                hit = Some((mid, xm, m));
            } else {
                a = m;
                x_a = xm;
            }
        }
        Ok(match hit {
            Some((t, xm, m)) if t == hi => (t, xm, m),
            _ => {
                let mut m = a.clone();
                self.sim.advance_to(&mut m, hi)?;
                let (xm, _) = windowed_min(&m, x_a, self.opts.valley_window);
                (hi, xm, m)
            }
        })
    }

    pub fn finish(self) -> Result<EventLog> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let mut log = self.log;
        log.collisions.sort_by(|a, b| a.t.total_cmp(&b.t));
        log.annihilations.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(log)
    }
}

/// Runs the detector over a stored, time-ordered field history produced by `sim`.
pub fn detect_events(history: &[Field1D], sim: &Simulation, opts: &EventOptions) -> Result<EventLog> {
    let mut det = EventDetector::new(sim, *opts);
    for f in history {
        det.observe(f);
    }
    det.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticDecomposition {
    pub t: f64,
    /// Decreasing.
    pub eta: Vec<f64>,
    /// Remainder `u − Σ φ(· − η_j)` on the field grid.
    pub w: Vec<f64>,
    /// `Λ ⟨w, e_i*⟩` at the returned `η`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

struct Kernels {
    phi: Vec<f64>,
    dphi: Vec<f64>,
    weight: Vec<f64>,
    dweight: Vec<f64>,
}

fn kernels(front: &FrontProfile, xs: &[f64], eta: f64) -> Kernels {
    let c = front.c;
    let mut k = Kernels {
        phi: Vec::with_capacity(xs.len()),
        dphi: Vec::with_capacity(xs.len()),
        weight: Vec::with_capacity(xs.len()),
        dweight: Vec::with_capacity(xs.len()),
    };
    for &x in xs {
        let s = x - eta;
        let (p, dp) = front.eval(s);
        let ddp = -c * dp - front.nl.f(p);
        let e = (c * s).exp();
        k.phi.push(p);
        k.dphi.push(dp);
        k.weight.push(e * dp);
        k.dweight.push(e * (c * dp + ddp));
    }
    k
}

/// Kink-only decomposition `u = Σ φ(· − η_j) + w` with `w ⟂ e_j*`.
///
/// The field is taken on a Neumann window whose left state is `2πn`.
pub fn decompose_analytic(
    field: &Field1D,
    front: &FrontProfile,
    eta_guess: &[f64],
    opts: &DecompositionOptions,
) -> Result<AnalyticDecomposition> {
    let n = eta_guess.len();
    if n == 0 {
        return Err(invalid("decomposition needs at least one kink"));
    }
    if eta_guess.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid("eta guess must be strictly decreasing"));
    }
    let xs = field.xs();
    let h = field.h;
    let lam = front.capital_lambda;
    let mut eta = eta_guess.to_vec();
    let min_gap = |eta: &[f64]| eta.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);

    let evaluate = |eta: &[f64]| {
        let ks: Vec<Kernels> = eta.iter().map(|&e| kernels(front, &xs, e)).collect();
        let mut w = field.values.clone();
        for k in &ks {
            for (wi, p) in w.iter_mut().zip(&k.phi) {
                *wi -= p;
            }
        }
        let mut buf = vec![0.0; xs.len()];
        let mut res = vec![0.0; eta.len()];
        for (i, k) in ks.iter().enumerate() {
            for ((b, a), wv) in buf.iter_mut().zip(&k.weight).zip(&w) {
                *b = a * wv;
            }
            res[i] = lam * trapezoid(&buf, h);
        }
        (ks, w, res)
    };

    for iter in 0..=opts.max_iter {
        let (ks, w, res) = evaluate(&eta);
        let norm = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if !norm.is_finite() {
            return Err(Error::NonFinite("analytic decomposition"));
        }
        if norm <= opts.tol {
            return Ok(AnalyticDecomposition { t: field.t, eta, w, residuals: res, iterations: iter });
        }
        if iter == opts.max_iter {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        let mut buf = vec![0.0; xs.len()];
        for i in 0..n {
            for kk in 0..n {
                for ((b, a), d) in buf.iter_mut().zip(&ks[i].weight).zip(&ks[kk].dphi) {
                    *b = a * d;
                }
                jac[(i, kk)] = lam * trapezoid(&buf, h);
            }
            for ((b, a), wv) in buf.iter_mut().zip(&ks[i].dweight).zip(&w) {
                *b = a * wv;
            }
            jac[(i, i)] -= lam * trapezoid(&buf, h);
        }
        let step = jac
            .lu()
            .solve(&DVector::from_vec(res))
            .ok_or_else(|| Error::NoConvergence { method: "analytic decomposition", detail: format!("singular Jacobian, minimum gap {:.4}", min_gap(&eta)) })?;
        for (e, s) in eta.iter_mut().zip(step.iter()) {
            *e -= s;
        }
        let inside = |e: &f64| *e > xs[0] && *e < xs[xs.len() - 1];
        if eta.windows(2).any(|w| w[0] <= w[1]) || !eta.iter().all(inside) {
            break;
        }
    }
    Err(Error::NoConvergence {
        method: "analytic decomposition",
        detail: format!("Newton failed; minimum gap {:.4} may be below the validity range", min_gap(&eta)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::compute_front;
    use crate::nonlinearity::Nonlinearity;
    use crate::pde::{make_initial_data, neumann_grid, Frame, InitialDataSpec, InitialStyle};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::TAU;
    use std::sync::OnceLock;

    fn front() -> &'static FrontProfile {
        static F: OnceLock<FrontProfile> = OnceLock::new();
        F.get_or_init(|| compute_front(&Nonlinearity::new(0.2).unwrap()).unwrap())
    }

    fn field_from(x0: f64, h: f64, values: Vec<f64>) -> Field1D {
        Field1D::new(x0, h, values, Frame::Lab, Boundary::Neumann).unwrap()
    }

    #[test]
    fn linear_ramp_has_single_rising_crossing_at_origin() {
        let h = 0.1;
        let values: Vec<f64> = (0..21).map(|i| PI + (-1.0 + i as f64 * h)).collect();
        let snap = extract_positions(&field_from(-1.0, h, values));
        assert_eq!(snap.crossings.len(), 1);
        let c = snap.crossings[0];
        assert_eq!(c.direction, Direction::Rising);
        assert_eq!(c.level, 0);
        assert_abs_diff_eq!(c.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_arithmetic() {
        let snap = extract_positions(&field_from(0.0, 0.04, vec![3.0, 3.3, 3.4]));
        assert_eq!(snap.crossings.len(), 1);
        assert_abs_diff_eq!(snap.crossings[0].x, 0.04 * (PI - 3.0) / 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(snap.crossings[0].x, 0.018879, epsilon = 1e-6);
    }

    #[test]
    fn single_kink_profile_crosses_once_at_zero() {
        let fr = front();
        let h = 0.05;
        let values: Vec<f64> = (0..401).map(|i| fr.phi(-10.0 + i as f64 * h)).collect();
        let snap = extract_positions(&field_from(-10.0, h, values));
        assert_eq!(snap.crossings.len(), 1);
        assert_eq!(snap.crossings[0].direction, Direction::Falling);
        assert_abs_diff_eq!(snap.crossings[0].x, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn steep_segment_yields_ordered_multi_level_crossings() {
        let snap = extract_positions(&field_from(0.0, 1.0, vec![8.0 * PI, 0.0, 0.0]));
        let levels: Vec<i64> = snap.crossings.iter().map(|c| c.level).collect();
        assert_eq!(levels, vec![3, 2, 1, 0]);
        assert!(snap.crossings.windows(2).all(|w| w[0].x < w[1].x));
    }

    #[test]
    fn periodic_seam_crossing_is_found() {
        // One kink per period placed right at the seam.
        let n = 100;
        let h = 0.1;
        let values: Vec<f64> = (0..n).map(|i| if i < 99 { 1.0 + 0.01 * i as f64 } else { 3.0 }).collect();
        let f = Field1D::new(0.0, h, values, Frame::Lab, Boundary::PeriodicJump { j: 1 }).unwrap();
        let snap = extract_positions(&f);
        // u_{N−1} = 3 and the extended node is 1 − 2π: falls through −π only.
        assert_eq!(snap.crossings.len(), 1);
        assert_eq!(snap.crossings[0].level, -1);
        assert!(snap.crossings[0].x > 9.8 && snap.crossings[0].x < 10.0);
    }

    #[test]
    fn stationary_crossing_gives_constant_track() {
        let snap = PositionSnapshot { t: 0.0, crossings: vec![Crossing { x: 1.5, level: 0, direction: Direction::Falling }] };
        let snaps: Vec<_> = (0..5).map(|k| PositionSnapshot { t: k as f64, ..snap.clone() }).collect();
        let tr = assemble_tracks(&snaps, 0.1);
        assert_eq!(tr.tracks.len(), 1);
        assert!(tr.tracks[0].positions.iter().all(|&x| x == 1.5));
        assert!(tr.speeds(0).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn tracks_end_and_start_with_crossings() {
        let mk = |xs: &[(f64, i64, Direction)], t| PositionSnapshot {
            t,
            crossings: xs.iter().map(|&(x, level, direction)| Crossing { x, level, direction }).collect(),
        };
        let f = Direction::Falling;
        let r = Direction::Rising;
        let snaps = vec![
            mk(&[(-1.0, 0, f), (1.0, 0, r)], 0.0),
            mk(&[(-0.5, 0, f), (0.5, 0, r)], 1.0),
            mk(&[], 2.0),
            mk(&[(3.0, 1, f)], 3.0),
        ];
        let tr = assemble_tracks(&snaps, 1.0);
        assert_eq!(tr.tracks.len(), 3);
        assert_eq!(tr.tracks[0].end(), 2);
        assert_eq!(tr.tracks[2].start, 3);
        assert!(tr.flagged_frames.is_empty());
    }

    #[test]
    fn ambiguous_frame_is_flagged() {
        let c = |x| Crossing { x, level: 0, direction: Direction::Falling };
        let snaps = vec![
            PositionSnapshot { t: 0.0, crossings: vec![c(0.0)] },
            PositionSnapshot { t: 1.0, crossings: vec![c(-0.1), c(0.2)] },
        ];
        let tr = assemble_tracks(&snaps, 0.5);
        assert_eq!(tr.flagged_frames, vec![1]);
        assert_eq!(tr.tracks[0].positions, vec![0.0, -0.1]);
    }

    fn kink_run(positions: &[f64], frame: Frame, t_end: f64, left: f64, right: f64) -> (Vec<PositionSnapshot>, Vec<Field1D>, Simulation) {
        let nl = Nonlinearity::new(0.2).unwrap();
        let grid = neumann_grid(left, right, 0.1, frame).unwrap();
        let spec = InitialDataSpec::kinks(positions);
        let field = make_initial_data(&spec, &grid, None).unwrap();
        let sim = Simulation::new(&nl, &field, 0.1).unwrap().with_observe_every(10);
        let mut snaps = Vec::new();
        let mut hist = Vec::new();
        sim.run(field, t_end, |f| {
            snaps.push(extract_positions(f));
            hist.push(f.clone());
        })
        .unwrap();
        (snaps, hist, sim)
    }

    #[test]
    fn single_kink_track_moves_with_front_speed() {
        let (snaps, hist, sim) = kink_run(&[-20.0], Frame::Lab, 200.0, -40.0, 40.0);
        let c = front().c;
        let tr = assemble_tracks(&snaps, 3.0 * c * 1.0 + 0.1);
        assert_eq!(tr.tracks.len(), 1);
        let sp = tr.speeds(0);
        let late = sp[sp.len() - 20];
        assert!((late - c).abs() < 0.02 * c, "speed {late} vs {c}");
        let log = detect_events(&hist, &sim, &EventOptions::default()).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn crossing_counts_never_increase_between_survivors() {
        let (snaps, _, _) = kink_run(&[0.0, -8.0, -14.0], Frame::Comoving { c: front().c }, 100.0, -30.0, 20.0);
        for lvl in 0..3 {
            let counts: Vec<usize> = snaps.iter().map(|s| s.count(lvl, Direction::Falling)).collect();
            assert!(counts.windows(2).all(|w| w[1] <= w[0]), "level {lvl}: {counts:?}");
        }
    }

    fn pair_run(l: f64, t_end: f64) -> (EventLog, Vec<Field1D>) {
        let nl = Nonlinearity::new(0.2).unwrap();
        let grid = neumann_grid(-20.0, 20.0, 0.05, Frame::Lab).unwrap();
        let spec = InitialDataSpec {
            kink_positions: vec![-l],
            antikink_positions: vec![l],
            mollifier_halfwidths: vec![0.5, 0.5],
            style: InitialStyle::Step,
        };
        let field = make_initial_data(&spec, &grid, None).unwrap();
        let sim = Simulation::new(&nl, &field, 0.05).unwrap().with_observe_every(20);
        let mut hist = Vec::new();
        sim.run(field, t_end, |f| hist.push(f.clone())).unwrap();
        (detect_events(&hist, &sim, &EventOptions::default()).unwrap(), hist)
    }

    #[test]
    fn symmetric_pair_collides_at_center() {
        let (log, _) = pair_run(3.0, 120.0);
        assert_eq!(log.collisions.len(), 1, "{log:?}");
        assert_eq!(log.annihilations.len(), 1, "{log:?}");
        assert!(log.collisions[0].x.abs() < 0.05);
        assert!(log.is_interleaved());
        assert_eq!(log.collisions[0].level, 1);
    }

    #[test]
    fn fronts_around_a_local_maximum_separate_without_annihilating() {
        // Antikink at −3 and kink at +3: a plateau at 2π over rest at 0.
        let nl = Nonlinearity::new(0.2).unwrap();
        let p = front();
        let grid = neumann_grid(-30.0, 30.0, 0.04, Frame::Lab).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|i| p.antikink(grid.x(i) + 3.0) + p.phi(grid.x(i) - 3.0) - TAU).collect();
        let u0 = Field1D::new(grid.x0, grid.h, values, Frame::Lab, Boundary::Neumann).unwrap();
        let sim = Simulation::new(&nl, &u0, 0.1).unwrap().with_observe_every(10);
        let mut det = EventDetector::new(&sim, EventOptions::default());
        let mut widths = Vec::new();
        let mut maxima = Vec::new();
        let last = sim
            .run(u0, 40.0, |f| {
                det.observe(f);
                let s = extract_positions(f);
                assert_eq!(s.crossings.len(), 2, "t = {}", f.t);
                widths.push(s.kinks()[0] - s.antikinks()[0]);
                maxima.push(f.max());
            })
            .unwrap();
        assert!(det.finish().unwrap().is_empty());
        assert!(widths.windows(2).all(|w| w[1] > w[0]));
        // The plateau fills up towards 2π from below and never overshoots.
        assert!(maxima.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(last.max() < TAU && last.max() > TAU - 1e-2, "{}", last.max());
    }

    #[test]
    fn refined_collision_time_matches_threshold() {
        let nl = Nonlinearity::new(0.2).unwrap();
        let (log, hist) = pair_run(3.0, 120.0);
        let t1 = log.collisions[0].t;
        // Re-integrate from the initial frame directly to the event time.
        let sim = Simulation::new(&nl, &hist[0], 0.05).unwrap();
        let mut f = hist[0].clone();
        sim.advance_to(&mut f, t1 - 0.05 / 8.0).unwrap();
        assert!(f.min() < PI);
        sim.advance_to(&mut f, t1 + 0.05 / 8.0).unwrap();
        assert!(f.min() >= PI - 1e-6);
    }

    #[test]
    fn ladder_rungs() {
        let tol = 1e-3;
        assert_eq!(first_rung_above(0.0, tol), 1);
        assert_eq!(rung_value(1, tol), PI);
        assert_abs_diff_eq!(rung_value(2, tol), TAU - tol);
        assert_eq!(first_rung_above(TAU - 0.5 * tol, tol), 3);
        assert_eq!(first_rung_above(PI, tol), 2);
    }

    fn superposition(eta: &[f64], left: f64, right: f64, h: f64) -> Field1D {
        let fr = front();
        let grid = neumann_grid(left, right, h, Frame::Comoving { c: fr.c }).unwrap();
        let values = grid.xs().iter().map(|&x| eta.iter().map(|&e| fr.phi(x - e)).sum()).collect();
        Field1D { values, ..grid }
    }

    #[test]
    fn exact_superposition_is_recovered() {
        let eta = [10.0, -2.0, -15.0];
        let f = superposition(&eta, -40.0, 35.0, 0.05);
        let guess = [10.3, -2.2, -14.9];
        let d = decompose_analytic(&f, front(), &guess, &DecompositionOptions::default()).unwrap();
        for (a, b) in d.eta.iter().zip(&eta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        assert!(d.w.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn even_perturbation_shifts_eta_slightly() {
        let eta = [6.0, -6.0];
        let mut f = superposition(&eta, -30.0, 30.0, 0.05);
        let amp = 1e-3;
        let xs = f.xs();
        for (v, x) in f.values.iter_mut().zip(&xs) {
            *v += amp * (-(x - 6.0) * (x - 6.0)).exp();
        }
        let d = decompose_analytic(&f, front(), &eta, &DecompositionOptions::default()).unwrap();
        assert!(d.residuals.iter().all(|r| r.abs() < 1e-10));
        let shift = (d.eta[0] - eta[0]).abs().max((d.eta[1] - eta[1]).abs());
        assert!(shift > 0.0 && shift < 10.0 * amp, "shift {shift}");
    }

    #[test]
    fn analytic_and_geometric_positions_merge_with_distance() {
        let mut errs = Vec::new();
        for gap in [10.0, 15.0, 20.0] {
            let eta = [0.5 * gap, -0.5 * gap];
            let f = superposition(&eta, -gap - 20.0, gap + 20.0, 0.02);
            let snap = extract_positions(&f);
            let xi = snap.kinks();
            let d = decompose_analytic(&f, front(), &xi, &DecompositionOptions::default()).unwrap();
            let e = d.eta.iter().zip(&xi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn newton_failure_reports_gap() {
        let f = superposition(&[0.5, -0.5], -20.0, 20.0, 0.05);
        let err = decompose_analytic(&f, front(), &[8.0, 7.9], &DecompositionOptions { tol: 1e-14, max_iter: 3 });
        match err {
            Err(Error::NoConvergence { detail, .. }) => assert!(detail.contains("gap")),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn crossings_strictly_increase(vals in proptest::collection::vec(-20.0f64..20.0, 3..60)) {
            let snap = extract_positions(&field_from(0.0, 0.1, vals.clone()));
            for w in snap.crossings.windows(2) {
                prop_assert!(w[0].x <= w[1].x);
            }
            for c in &snap.crossings {
                let i = ((c.x / 0.1).floor() as usize).min(vals.len() - 2);
                let (a, b) = (vals[i], vals[i + 1]);
                prop_assert_eq!(c.direction == Direction::Falling, a > b);
            }
        }
    }
}
