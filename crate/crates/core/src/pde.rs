//! Finite-difference evolution of the lifted phase `u_t = u_zz + c u_z + f(u)`.
//!
//! `c = 0` is the lab frame. Time stepping is IMEX: Crank-Nicolson on
//! diffusion and drift, the reaction treated explicitly with a Heun
//! predictor-corrector, which keeps the scheme second order and self-starting.
//!
//! Two boundary treatments:
//! * Neumann, through mirrored ghost nodes, for data with flat tails;
//! * periodic with a jump, `u(x + 2ℓ) = u(x) − 2πj`, solved for the periodic
//!   function `v = u − s (x − x0)` with `s = −2πj / 2ℓ` and a cyclic solver.
//!
//! Freezing moves the computational window: values are resampled at the
//! shifted nodes and `x0` moves with them, so node coordinates stay physical.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::front::FrontProfile;
use crate::linalg::{CyclicLu, Tridiagonal, TridiagonalLu};
use crate::nonlinearity::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Frame {
    Lab,
    Comoving { c: f64 },
}

impl Frame {
    pub fn speed(&self) -> f64 {
        match self {
            Frame::Lab => 0.0,
            Frame::Comoving { c } => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Boundary {
    Neumann,
    /// `u(x0 + 2ℓ) = u(x0) − 2πj`; the last node sits at `x0 + 2ℓ − h`.
    PeriodicJump { j: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field1D {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub t: f64,
    pub frame: Frame,
    pub boundary: Boundary,
}

impl Field1D {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, frame: Frame, boundary: Boundary) -> Result<Self> {
        if values.len() < 3 {
            return Err(invalid("a field needs at least 3 nodes"));
        }
        if !(h > 0.0) {
            return Err(invalid("mesh width must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Self { x0, h, values, t: 0.0, frame, boundary })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Physical length covered: last node for Neumann, full period for periodic.
    pub fn extent(&self) -> f64 {
        match self.boundary {
            Boundary::Neumann => (self.len() - 1) as f64 * self.h,
            Boundary::PeriodicJump { .. } => self.len() as f64 * self.h,
        }
    }

    pub fn center(&self) -> f64 {
        self.x0 + 0.5 * self.extent()
    }

    fn jump_slope(&self) -> f64 {
        match self.boundary {
            Boundary::Neumann => 0.0,
            Boundary::PeriodicJump { j } => -TAU * j as f64 / self.extent(),
        }
    }

    /// Value at node index `i` extended beyond the window: constant for
    /// Neumann, periodic with jump otherwise.
    pub fn value_ext(&self, i: isize) -> f64 {
        let n = self.len() as isize;
        match self.boundary {
            Boundary::Neumann => self.values[i.clamp(0, n - 1) as usize],
            Boundary::PeriodicJump { j } => {
                let wraps = i.div_euclid(n);
                self.values[i.rem_euclid(n) as usize] - TAU * j as f64 * wraps as f64
            }
        }
    }

    /// Cubic Lagrange interpolation at physical coordinate `x`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.h;
        let k = s.floor();
        let t = s - k;
        let k = k as isize;
        if t == 0.0 {
            return self.value_ext(k);
        }
        let p = [self.value_ext(k - 1), self.value_ext(k), self.value_ext(k + 1), self.value_ext(k + 2)];
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        w0 * p[0] + w1 * p[1] + w2 * p[2] + w3 * p[3]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Moves the window so that `reference_position` sits at its center.
/// Whole-cell shifts copy values; the sub-cell remainder is interpolated.
pub fn freeze_frame(field: &Field1D, reference_position: f64) -> Field1D {
    shift_window(field, reference_position - field.center(), false)
}

/// Moves the window by `shift` (physical units). With `whole_cells` the shift
/// is rounded to a multiple of `h`, which is exact.
pub fn shift_window(field: &Field1D, shift: f64, whole_cells: bool) -> Field1D {
    let cells = shift / field.h;
    let whole = cells.round();
    let frac = if whole_cells { 0.0 } else { cells - whole };
    let m = whole as isize;
    let mut out = field.clone();
    if frac.abs() < 1e-12 {
        for i in 0..field.len() {
            out.values[i] = field.value_ext(i as isize + m);
        }
        out.x0 = field.x0 + whole * field.h;
    } else {
        let new_x0 = field.x0 + cells * field.h;
        for i in 0..field.len() {
            out.values[i] = field.interpolate(new_x0 + i as f64 * field.h);
        }
        out.x0 = new_x0;
    }
    out
}

/// Prefactored IMEX stepper for one mesh, frame, boundary and time step.
#[derive(Debug, Clone)]
pub struct Stepper {
    nl: Nonlinearity,
    dt: f64,
    h: f64,
    n: usize,
    c: f64,
    boundary: Boundary,
    solver: Solver,
}

#[derive(Debug, Clone)]
enum Solver {
    Plain(TridiagonalLu),
    Cyclic(CyclicLu),
}

impl Stepper {
    pub fn new(nl: &Nonlinearity, field: &Field1D, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        if dt >= 2.0 / nl.lipschitz() {
            return Err(invalid(format!("dt = {dt} violates the reaction stability bound dt < 2/sup|f'|")));
        }
        let n = field.len();
        let h = field.h;
        let c = field.frame.speed();
        let (sub, diag, sup) = (1.0 / (h * h) - c / (2.0 * h), -2.0 / (h * h), 1.0 / (h * h) + c / (2.0 * h));
        let mut m = Tridiagonal::new(n);
        let k = 0.5 * dt;
        for i in 0..n {
            m.b[i] = 1.0 - k * diag;
            if i > 0 {
                m.a[i] = -k * sub;
            }
            if i + 1 < n {
                m.c[i] = -k * sup;
            }
        }
        let solver = match field.boundary {
            Boundary::Neumann => {
                // mirrored ghosts: u_{-1} = u_1 and u_n = u_{n-2}
                m.c[0] = -k * (sub + sup);
                m.a[n - 1] = -k * (sub + sup);
                Solver::Plain(TridiagonalLu::factor(&m)?)
            }
            Boundary::PeriodicJump { .. } => Solver::Cyclic(CyclicLu::factor(&m, -k * sup, -k * sub)?),
        };
        Ok(Self { nl: *nl, dt, h, n, c, boundary: field.boundary, solver })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn apply_explicit(&self, v: &[f64], out: &mut [f64]) {
        let (h, c, n, k) = (self.h, self.c, self.n, 0.5 * self.dt);
        let lap = |l: f64, m: f64, r: f64| (l - 2.0 * m + r) / (h * h) + c * (r - l) / (2.0 * h);
        for i in 0..n {
            let (l, r) = match self.boundary {
                Boundary::Neumann => (
                    if i == 0 { v[1] } else { v[i - 1] },
                    if i + 1 == n { v[n - 2] } else { v[i + 1] },
                ),
                Boundary::PeriodicJump { .. } => (v[(i + n - 1) % n], v[(i + 1) % n]),
            };
            out[i] = v[i] + k * lap(l, v[i], r);
        }
    }

    fn solve(&self, rhs: &mut [f64]) {
        match &self.solver {
            Solver::Plain(lu) => lu.solve_in_place(rhs),
            Solver::Cyclic(lu) => lu.solve_in_place(rhs),
        }
    }

    /// Advances the field by one step of length `dt` in place.
    pub fn step(&self, field: &mut Field1D) {
        let n = self.n;
        let s = field.jump_slope();
        let offs: Vec<f64> = (0..n).map(|i| s * i as f64 * self.h).collect();
        let v: Vec<f64> = field.values.iter().zip(&offs).map(|(u, o)| u - o).collect();
        let react = |vals: &[f64], i: usize| self.nl.f(vals[i] + offs[i]) + self.c * s;
        let mut base = vec![0.0; n];
        self.apply_explicit(&v, &mut base);
        let r0: Vec<f64> = (0..n).map(|i| react(&v, i)).collect();
        let mut pred: Vec<f64> = (0..n).map(|i| base[i] + self.dt * r0[i]).collect();
        self.solve(&mut pred);
        let mut next: Vec<f64> = (0..n).map(|i| base[i] + 0.5 * self.dt * (r0[i] + react(&pred, i))).collect();
        self.solve(&mut next);
        for i in 0..n {
            field.values[i] = next[i] + offs[i];
        }
        field.t += self.dt;
    }
}

/// One IMEX step as a pure function.
pub fn step_imex(nl: &Nonlinearity, field: &Field1D, dt: f64) -> Result<Field1D> {
    let stepper = Stepper::new(nl, field, dt)?;
    let mut out = field.clone();
    stepper.step(&mut out);
    Ok(out)
}

/// Window re-centering applied at observer frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezeOptions {
    /// Only shift by whole cells, which keeps the values exact.
    pub whole_cells: bool,
    /// Re-center once the reference drifts further than this from the center.
    pub tolerance: f64,
}

impl Default for FreezeOptions {
    fn default() -> Self {
        Self { whole_cells: true, tolerance: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub nl: Nonlinearity,
    stepper: Stepper,
    pub dt: f64,
    /// Observer cadence in steps.
    pub observe_every: usize,
    pub freeze: Option<FreezeOptions>,
}

impl Simulation {
    pub fn new(nl: &Nonlinearity, field: &Field1D, dt: f64) -> Result<Self> {
        Ok(Self { nl: *nl, stepper: Stepper::new(nl, field, dt)?, dt, observe_every: 50, freeze: None })
    }

    pub fn with_observe_every(mut self, k: usize) -> Self {
        self.observe_every = k.max(1);
        self
    }

    pub fn with_freeze(mut self, freeze: FreezeOptions) -> Self {
        self.freeze = Some(freeze);
        self
    }

    pub fn step(&self, field: &mut Field1D) {
        self.stepper.step(field);
    }

    /// Integrates to exactly `t_target`: whole steps of `dt`, then one shorter step.
    pub fn advance_to(&self, field: &mut Field1D, t_target: f64) -> Result<()> {
        let eps = 1e-9 * self.dt;
        while field.t + self.dt <= t_target + eps {
            self.stepper.step(field);
        }
        let rest = t_target - field.t;
        if rest > eps {
            let short = Stepper::new(&self.nl, field, rest)?;
            short.step(field);
        }
        field.t = t_target;
        Ok(())
    }

    /// Runs to `t_end`, calling `observer` on the initial field, every
    /// `observe_every` steps, and on the final field. With freezing enabled the
    /// window is re-centered on `reference(field)` before each observation.
    pub fn run_with<O, R>(&self, mut field: Field1D, t_end: f64, mut observer: O, reference: R) -> Result<Field1D>
    where
        O: FnMut(&Field1D),
        R: Fn(&Field1D) -> Option<f64>,
    {
        let n_steps = ((t_end - field.t) / self.dt - 1e-9).ceil().max(0.0) as usize;
        observer(&field);
        for k in 1..=n_steps {
            if k == n_steps {
                self.advance_to(&mut field, t_end)?;
            } else {
                self.stepper.step(&mut field);
            }
            if k % self.observe_every == 0 || k == n_steps {
                if let Some(fr) = self.freeze {
                    if let Some(r) = reference(&field) {
                        let drift = r - field.center();
                        if drift.abs() > fr.tolerance.max(if fr.whole_cells { field.h } else { 0.0 }) {
                            field = shift_window(&field, drift, fr.whole_cells);
                        }
                    }
                }
                if field.values.iter().any(|v| !v.is_finite()) {
                    return Err(crate::Error::NonFinite("pde field"));
                }
                observer(&field);
            }
        }
        Ok(field)
    }

    pub fn run<O: FnMut(&Field1D)>(&self, field: Field1D, t_end: f64, observer: O) -> Result<Field1D> {
        self.run_with(field, t_end, observer, |_| None)
    }
}

/// Convenience wrapper: lab or comoving run without observers, returning the final field.
pub fn run(nl: &Nonlinearity, field: Field1D, t_end: f64, dt: f64) -> Result<Field1D> {
    Simulation::new(nl, &field, dt)?.run(field, t_end, |_| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialStyle {
    #[default]
    Step,
    FrontSuperposition,
}

/// Kinks sit left of antikinks. Kink positions are listed from right to
/// left (decreasing), antikink positions from left to right (increasing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialDataSpec {
    pub kink_positions: Vec<f64>,
    #[serde(default)]
    pub antikink_positions: Vec<f64>,
    /// Mollifier half-widths, one per kink then one per antikink;
    /// empty means `min(1, gap/4)` with the smallest neighbour gap.
    #[serde(default)]
    pub mollifier_halfwidths: Vec<f64>,
    #[serde(default)]
    pub style: InitialStyle,
}

impl InitialDataSpec {
    pub fn kinks(positions: &[f64]) -> Self {
        Self { kink_positions: positions.to_vec(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.kink_positions.windows(2).any(|w| w[1] >= w[0]) {
            errors.push("kink positions must be strictly decreasing".to_string());
        }
        if self.antikink_positions.windows(2).any(|w| w[1] <= w[0]) {
            errors.push("antikink positions must be strictly increasing".to_string());
        }
        if let (Some(k), Some(a)) = (self.kink_positions.first(), self.antikink_positions.first()) {
            if k >= a {
                errors.push("kinks must lie left of antikinks".to_string());
            }
        }
        let all = self.sorted_positions();
        if self.style == InitialStyle::Step && !self.mollifier_halfwidths.is_empty() {
            if self.mollifier_halfwidths.len() != all.len() {
                errors.push(format!("expected {} mollifier half-widths, got {}", all.len(), self.mollifier_halfwidths.len()));
            } else {
                let ordered = self.ordered_with_widths();
                for (k, &(x, eps)) in ordered.iter().enumerate() {
                    let gl = if k > 0 { x - ordered[k - 1].0 } else { f64::INFINITY };
                    let gr = if k + 1 < ordered.len() { ordered[k + 1].0 - x } else { f64::INFINITY };
                    if !(eps > 0.0 && eps < 0.5 * gl.min(gr)) {
                        errors.push(format!("mollifier half-width {eps} at {x} must be positive and below half the neighbour gap"));
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(invalid(errors.join("; ")))
        }
    }

    fn sorted_positions(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.kink_positions.iter().rev().copied().collect();
        all.extend(self.antikink_positions.iter().copied());
        all
    }

    /// (position, half-width) pairs ordered left to right.
    fn ordered_with_widths(&self) -> Vec<(f64, f64)> {
        let nk = self.kink_positions.len();
        let all = self.sorted_positions();
        let min_gap = all.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let default_eps = (0.25 * min_gap).min(1.0);
        let width = |orig: usize| {
            if self.mollifier_halfwidths.is_empty() {
                default_eps
            } else {
                self.mollifier_halfwidths[orig]
            }
        };
        let mut out = Vec::with_capacity(all.len());
        for k in (0..nk).rev() {
            out.push((self.kink_positions[k], width(k)));
        }
        for (k, &x) in self.antikink_positions.iter().enumerate() {
            out.push((x, width(nk + k)));
        }
        out
    }

    /// Value far to the left and far to the right.
    pub fn limits(&self) -> (f64, f64) {
        (TAU * self.kink_positions.len() as f64, TAU * self.antikink_positions.len() as f64)
    }
}

struct BumpTable {
    cdf: Vec<f64>,
    total: f64,
}

fn bump_density(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

const BUMP_CELLS: usize = 4000;

fn bump_table() -> &'static BumpTable {
    static TABLE: OnceLock<BumpTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 / BUMP_CELLS as f64;
        let mut cum = vec![0.0; BUMP_CELLS + 1];
        for k in 0..BUMP_CELLS {
            let a = -1.0 + k as f64 * h;
            cum[k + 1] = cum[k] + h / 6.0 * (bump_density(a) + 4.0 * bump_density(a + 0.5 * h) + bump_density(a + h));
        }
        let total = cum[BUMP_CELLS];
        BumpTable { cdf: cum.iter().map(|v| v / total).collect(), total }
    })
}

/// Cumulative distribution of the normalized bump `∝ exp(−1/(1−s²))` on
/// `[−1, 1]`: Simpson table plus cubic Hermite interpolation with the exact density.
pub fn bump_cdf(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let table = bump_table();
    let h = 2.0 / BUMP_CELLS as f64;
    let pos = (s + 1.0) / h;
    let k = (pos.floor() as usize).min(BUMP_CELLS - 1);
    let t = pos - k as f64;
    let (x0, x1) = (-1.0 + k as f64 * h, -1.0 + (k + 1) as f64 * h);
    let (p0, p1) = (table.cdf[k], table.cdf[k + 1]);
    let (m0, m1) = (bump_density(x0) / table.total * h, bump_density(x1) / table.total * h);
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}

/// Mollified kink step: `2π` left of `xi`, `0` right of it, `π` at `xi`.
pub fn kink_step(x: f64, xi: f64, eps: f64) -> f64 {
    TAU * (1.0 - bump_cdf((x - xi) / eps))
}

/// Samples the initial datum on the nodes of `grid` (which supplies mesh,
/// frame and boundary). Front superposition needs `front`.
pub fn make_initial_data(spec: &InitialDataSpec, grid: &Field1D, front: Option<&FrontProfile>) -> Result<Field1D> {
    spec.validate()?;
    let mut out = grid.clone();
    out.t = 0.0;
    match spec.style {
        InitialStyle::Step => {
            let ordered = spec.ordered_with_widths();
            let nk = spec.kink_positions.len();
            for i in 0..out.len() {
                let x = out.x(i);
                let mut u = 0.0;
                for (k, &(xi, eps)) in ordered.iter().enumerate() {
                    u += if k < nk { kink_step(x, xi, eps) } else { TAU - kink_step(x, xi, eps) };
                }
                out.values[i] = u;
            }
        }
        InitialStyle::FrontSuperposition => {
            let front = front.ok_or_else(|| invalid("front-superposition data needs a front profile"))?;
            // Periodic windows sum translated images; images on the far side of
            // a kink (antikink) contribute a full 2π that is removed again.
            let (period, images) = match out.boundary {
                Boundary::Neumann => (0.0, 0i32),
                Boundary::PeriodicJump { .. } => (out.extent(), 3),
            };
            for i in 0..out.len() {
                let x = out.x(i);
                let mut u = 0.0;
                for m in -images..=images {
                    let shift = period * m as f64;
                    for &xi in &spec.kink_positions {
                        u += front.phi(x - xi - shift) - if m > 0 { TAU } else { 0.0 };
                    }
                    for &xi in &spec.antikink_positions {
                        u += front.phi(xi + shift - x) - if m < 0 { TAU } else { 0.0 };
                    }
                }
                out.values[i] = u;
            }
        }
    }
    if let Boundary::PeriodicJump { j } = out.boundary {
        let expected = spec.kink_positions.len() as i32 - spec.antikink_positions.len() as i32;
        if expected != j {
            return Err(invalid(format!("periodic jump j = {j} does not match the net kink count {expected}")));
        }
    }
    Ok(out)
}

/// Uniform Neumann grid covering `[left, right]` with spacing close to `h`.
pub fn neumann_grid(left: f64, right: f64, h: f64, frame: Frame) -> Result<Field1D> {
    let n = ((right - left) / h).round() as usize + 1;
    Field1D::new(left, h, vec![0.0; n], frame, Boundary::Neumann)
}

/// Periodic grid on `[−ℓ, ℓ)` with `n` nodes and jump `2πj`.
pub fn periodic_grid(ell: f64, n: usize, j: i32, frame: Frame) -> Result<Field1D> {
    Field1D::new(-ell, 2.0 * ell / n as f64, vec![0.0; n], frame, Boundary::PeriodicJump { j })
}

/// Single-step stability bound for the explicit reaction part.
pub fn max_stable_dt(nl: &Nonlinearity) -> f64 {
    2.0 / nl.lipschitz()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::compute_front;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn nl() -> Nonlinearity {
        Nonlinearity::new(0.2).unwrap()
    }

    fn level_crossing(field: &Field1D, level: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..field.len() - 1 {
            let (a, b) = (field.values[i] - level, field.values[i + 1] - level);
            if a == 0.0 {
                out.push(field.x(i));
            } else if a * b < 0.0 {
                out.push(field.x(i) + field.h * a / (a - b));
            }
        }
        out
    }

    #[test]
    fn rest_state_preserved() {
        let g = neumann_grid(-5.0, 5.0, 0.04, Frame::Lab).unwrap();
        let out = step_imex(&nl(), &g, 0.1).unwrap();
        assert!(out.values.iter().all(|&v| v.abs() < 1e-15));
        assert_abs_diff_eq!(out.t, 0.1);
    }

    #[test]
    fn rejects_unstable_step_and_tiny_grid() {
        let g = neumann_grid(-5.0, 5.0, 0.04, Frame::Lab).unwrap();
        assert!(step_imex(&nl(), &g, 2.5).is_err());
        assert!(Field1D::new(0.0, 0.1, vec![0.0, 1.0], Frame::Lab, Boundary::Neumann).is_err());
    }

    /// A constant state follows θ' = f(θ); the per-step error against an
    /// accurate scalar integration shrinks at least like dt².
    #[test]
    fn constant_state_tracks_scalar_flow() {
        let nl = nl();
        let theta = 2.0;
        let exact = |dt: f64| {
            let (_, y) = crate::ode::integrate(|_, y, d| d[0] = nl.f(y[0]), 0.0, &[theta], dt, &crate::ode::Dopri5Options::with_tol(1e-13, 1e-15), |_| crate::ode::Control::Continue).unwrap();
            y[0]
        };
        let err = |dt: f64| {
            let mut g = neumann_grid(0.0, 1.0, 0.1, Frame::Lab).unwrap();
            g.values.iter_mut().for_each(|v| *v = theta);
            let out = step_imex(&nl, &g, dt).unwrap();
            out.values.iter().map(|v| (v - exact(dt)).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 < 0.1 * 0.1);
        assert!(e1 / e2 > 3.9, "ratio {}", e1 / e2);
    }

    #[test]
    fn bump_cdf_is_a_distribution() {
        assert_eq!(bump_cdf(-1.5), 0.0);
        assert_eq!(bump_cdf(1.5), 1.0);
        assert_abs_diff_eq!(bump_cdf(0.0), 0.5, epsilon = 1e-14);
        let mut prev = 0.0;
        for k in 0..=200 {
            let s = -1.0 + k as f64 * 0.01;
            let v = bump_cdf(s);
            assert!(v >= prev - 1e-15);
            assert_abs_diff_eq!(v + bump_cdf(-s), 1.0, epsilon = 1e-12);
            prev = v;
        }
    }

    #[test]
    fn single_kink_step_centered() {
        let g = neumann_grid(-10.0, 10.0, 0.04, Frame::Lab).unwrap();
        let u = make_initial_data(&InitialDataSpec::kinks(&[0.0]), &g, None).unwrap();
        let xs = level_crossing(&u, PI);
        assert_eq!(xs.len(), 1);
        assert_abs_diff_eq!(xs[0], 0.0, epsilon = 1e-12);
        assert_eq!(u.values[0], TAU);
        assert_eq!(*u.values.last().unwrap(), 0.0);
    }

    #[test]
    fn double_staircase_shape() {
        let spec = InitialDataSpec {
            kink_positions: vec![-3.0, -7.0, -11.0, -15.0],
            antikink_positions: vec![3.0, 7.0, 11.0, 15.0],
            ..Default::default()
        };
        let g = neumann_grid(-25.0, 25.0, 0.04, Frame::Lab).unwrap();
        let u = make_initial_data(&spec, &g, None).unwrap();
        let mid = u.len() / 2;
        assert!(u.values[..=mid].windows(2).all(|w| w[1] <= w[0]));
        assert!(u.values[mid..].windows(2).all(|w| w[1] >= w[0]));
        assert_abs_diff_eq!(u.values[0], 8.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(*u.values.last().unwrap(), 8.0 * PI, epsilon = 1e-12);
        assert_eq!(spec.limits(), (8.0 * PI, 8.0 * PI));
    }

    #[test]
    fn invalid_specs_list_every_problem() {
        let spec = InitialDataSpec {
            kink_positions: vec![0.0, 1.0],
            antikink_positions: vec![-5.0],
            ..Default::default()
        };
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("decreasing") && msg.contains("left of antikinks"), "{msg}");
        let spec = InitialDataSpec { kink_positions: vec![2.0, 0.0], mollifier_halfwidths: vec![1.5, 0.5], ..Default::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn superposition_positions_exponentially_close() {
        let front = compute_front(&nl()).unwrap();
        let g = neumann_grid(-30.0, 30.0, 0.04, Frame::Comoving { c: front.c }).unwrap();
        let spec = InitialDataSpec { kink_positions: vec![10.0, -10.0], style: InitialStyle::FrontSuperposition, ..Default::default() };
        let u = make_initial_data(&spec, &g, Some(&front)).unwrap();
        let tol = (-front.mu * 10.0).exp();
        let x1 = level_crossing(&u, PI);
        let x2 = level_crossing(&u, 3.0 * PI);
        assert_eq!((x1.len(), x2.len()), (1, 1));
        assert!((x1[0] - 10.0).abs() < tol, "{}", x1[0]);
        assert!((x2[0] + 10.0).abs() < tol, "{}", x2[0]);
    }

    #[test]
    fn periodic_superposition_has_the_jump() {
        let front = compute_front(&nl()).unwrap();
        let g = periodic_grid(6.0, 300, 2, Frame::Lab).unwrap();
        let spec = InitialDataSpec { kink_positions: vec![3.0, -3.0], style: InitialStyle::FrontSuperposition, ..Default::default() };
        let u = make_initial_data(&spec, &g, Some(&front)).unwrap();
        // one step across the seam should look like any interior step
        let seam = (u.values[0] - 2.0 * TAU) - u.values[u.len() - 1];
        let inner = u.values[1] - u.values[0];
        assert!((seam - inner).abs() < 1e-3, "{seam} vs {inner}");
        let bad = periodic_grid(6.0, 300, 1, Frame::Lab).unwrap();
        assert!(make_initial_data(&spec, &bad, Some(&front)).is_err());
    }

    #[test]
    fn whole_cell_shift_is_exact() {
        let mut g = periodic_grid(2.0, 40, 1, Frame::Lab).unwrap();
        for i in 0..g.len() {
            g.values[i] = (g.x(i)).sin() + 0.3 * i as f64;
        }
        let s = shift_window(&g, g.h, false);
        for i in 0..g.len() - 1 {
            assert_eq!(s.values[i], g.values[i + 1]);
        }
        assert_abs_diff_eq!(s.values[g.len() - 1], g.values[0] - TAU, epsilon = 1e-15);
        assert_abs_diff_eq!(s.x0, g.x0 + g.h, epsilon = 1e-15);
        let back = freeze_frame(&s, g.center());
        assert_abs_diff_eq!(back.x0, g.x0, epsilon = 1e-12);
    }

    #[test]
    fn subcell_shift_preserves_positions() {
        let g = neumann_grid(-10.0, 10.0, 0.04, Frame::Lab).unwrap();
        let u = make_initial_data(&InitialDataSpec::kinks(&[2.0, -2.0]), &g, None).unwrap();
        let f = freeze_frame(&u, 0.37);
        let before = level_crossing(&u, PI)[0] - level_crossing(&u, 3.0 * PI)[0];
        let after = level_crossing(&f, PI)[0] - level_crossing(&f, 3.0 * PI)[0];
        assert!((before - after).abs() <= g.h * g.h, "{before} {after}");
        assert_abs_diff_eq!(f.center(), 0.37, epsilon = 1e-12);
    }

    #[test]
    fn lab_frame_kink_moves_at_shooting_speed() {
        let nl = nl();
        let c = crate::front::compute_speed(&nl, 1e-12).unwrap();
        let g = neumann_grid(-25.0, 25.0, 0.04, Frame::Lab).unwrap();
        let u0 = make_initial_data(&InitialDataSpec::kinks(&[-10.0]), &g, None).unwrap();
        let sim = Simulation::new(&nl, &u0, 0.05).unwrap();
        let mut samples = Vec::new();
        sim.run(u0, 120.0, |f| samples.push((f.t, level_crossing(f, PI)[0]))).unwrap();
        let (t1, x1) = samples[samples.len() / 2];
        let (t2, x2) = *samples.last().unwrap();
        let speed = (x2 - x1) / (t2 - t1);
        assert!((speed / c - 1.0).abs() < 0.01, "{speed} vs {c}");
    }

    #[test]
    fn flat_tails_stay_at_rest_states() {
        let nl = nl();
        let g = neumann_grid(-25.0, 25.0, 0.04, Frame::Lab).unwrap();
        let u0 = make_initial_data(&InitialDataSpec::kinks(&[3.0, -3.0]), &g, None).unwrap();
        let u = run(&nl, u0, 30.0, 0.05).unwrap();
        assert!((u.values[0] - 2.0 * TAU).abs() < 1e-6);
        assert!(u.values[u.len() - 1].abs() < 1e-6);
    }

    #[test]
    fn periodic_run_keeps_the_winding() {
        let nl = nl();
        let g = periodic_grid(5.0, 250, 1, Frame::Lab).unwrap();
        let u0 = make_initial_data(&InitialDataSpec::kinks(&[0.0]), &g, None).unwrap();
        let u = run(&nl, u0, 20.0, 0.05).unwrap();
        let xs = level_crossing(&u, PI);
        assert_eq!(xs.len(), 1);
        assert!(u.values.windows(2).all(|w| w[1] < w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn ordered_data_stay_ordered(a in -3.0f64..3.0, gap in 3.0f64..6.0, shift in 0.0f64..1.5) {
            let nl = nl();
            let g = neumann_grid(-15.0, 15.0, 0.04, Frame::Lab).unwrap();
            let lo = make_initial_data(&InitialDataSpec::kinks(&[a + gap, a]), &g, None).unwrap();
            let hi = make_initial_data(&InitialDataSpec::kinks(&[a + gap + shift, a + shift]), &g, None).unwrap();
            prop_assert!(lo.values.iter().zip(&hi.values).all(|(x, y)| x <= y));
            let sim = Simulation::new(&nl, &lo, 0.1).unwrap().with_observe_every(10);
            let lo_end = sim.run(lo, 10.0, |_| {}).unwrap();
            let hi_end = sim.run(hi, 10.0, |_| {}).unwrap();
            prop_assert!(lo_end.values.iter().zip(&hi_end.values).all(|(x, y)| *x <= y + 1e-8));
            prop_assert!(lo_end.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
