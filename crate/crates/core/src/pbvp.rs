//! Periodic traveling waves: `u'' + a u' + f(u) = 0` on `[−ℓ, ℓ]` with
//! `u(−ℓ) = 2πj`, `u(ℓ) = 0` and matched end slopes `u'(−ℓ) = u'(ℓ)`.
//!
//! The inner problem fixes `a` and solves the Dirichlet problem with
//! second-order finite differences and damped Newton. The outer problem finds
//! the root of the matching function
//!
//! ```text
//! m(a) = [(u_1 − u_0) − (u_N − u_{N−1})]/h² + a [(u_1 − u_0) + (u_N − u_{N−1})]/(2h)
//! ```
//!
//! which is the discrete equation at the end node when the profile is
//! continued periodically with the jump `2πj`. A zero of `m` is therefore an
//! exact discrete periodic wave, and `j` copies of the `(ℓ/j, 1)` discrete wave
//! tile the `(ℓ, j)` one when both use the same spacing. The default mesh has
//! `1000·j` intervals, so `h = ℓ/(500 j)`.
//!
//! Reported speeds and energy integrals are Richardson-extrapolated from the
//! default mesh and its refinement by two.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::front::FrontProfile;
use crate::error::{invalid, Error, Result};
use crate::linalg::{linear_fit, Tridiagonal, TridiagonalLu};
use crate::nonlinearity::Nonlinearity;
use crate::pde::{make_initial_data, periodic_grid, Frame, InitialDataSpec, InitialStyle, Simulation};
use crate::positions::{extract_positions, Direction};

/// Dirichlet profile at a fixed speed, nodes `z_i = −ℓ + i h`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSpeedProfile {
    pub ell: f64,
    pub j: u32,
    pub a: f64,
    pub h: f64,
    pub values: Vec<f64>,
    /// Max-norm of the discrete residual at the interior nodes.
    pub residual: f64,
    pub newton_iterations: usize,
}

impl FixedSpeedProfile {
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn z(&self, i: usize) -> f64 {
        -self.ell + i as f64 * self.h
    }

    /// Discrete matching function `m(a)`.
    pub fn matching(&self) -> f64 {
        let u = &self.values;
        let n = u.len() - 1;
        let left = u[1] - u[0];
        let right = u[n] - u[n - 1];
        (left - right) / (self.h * self.h) + self.a * (left + right) / (2.0 * self.h)
    }

    /// One-sided second-order end slopes `(u'(−ℓ), u'(ℓ))`.
    pub fn end_slopes(&self) -> (f64, f64) {
        let u = &self.values;
        let n = u.len() - 1;
        let h = self.h;
        ((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h), (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h))
    }

    /// `∫(u')²` by the midpoint rule on cell differences.
    pub fn dirichlet_energy(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / self.h
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbvpOptions {
    /// Intervals per unit of `j`; the mesh has `intervals_per_kink · j` intervals.
    pub intervals_per_kink: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Upper end of the initial speed bracket; `None` means twice the front speed.
    pub bracket_hi: Option<f64>,
    pub speed_tol: f64,
    pub richardson: bool,
}

impl Default for PbvpOptions {
    fn default() -> Self {
        Self { intervals_per_kink: 1000, newton_tol: 1e-9, max_newton: 60, bracket_hi: None, speed_tol: 1e-13, richardson: true }
    }
}

fn residual(nl: &Nonlinearity, u: &[f64], a: f64, h: f64, out: &mut [f64]) -> f64 {
    let n = u.len() - 1;
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let r = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h) + a * (u[i + 1] - u[i - 1]) / (2.0 * h) + nl.f(u[i]);
        out[i - 1] = r;
        worst = worst.max(r.abs());
    }
    worst
}

fn newton(nl: &Nonlinearity, u: &mut [f64], a: f64, h: f64, tol: f64, max_iter: usize) -> Result<(f64, usize)> {
    let n = u.len() - 1;
    let m = n - 1;
    let mut r = vec![0.0; m];
    let mut trial = u.to_vec();
    let mut rt = vec![0.0; m];
    let mut norm = residual(nl, u, a, h, &mut r);
    let (lo, dg, hi) = (1.0 / (h * h) - a / (2.0 * h), -2.0 / (h * h), 1.0 / (h * h) + a / (2.0 * h));
    for it in 0..max_iter {
        if norm <= tol {
            return Ok((norm, it));
        }
        let mut jac = Tridiagonal::new(m);
        for k in 0..m {
            jac.a[k] = lo;
            jac.b[k] = dg + nl.f_prime(u[k + 1]);
            jac.c[k] = hi;
        }
        let mut step = r.clone();
        TridiagonalLu::factor(&jac)?.solve_in_place(&mut step);
        let mut lambda = 1.0;
        loop {
            for k in 0..m {
                trial[k + 1] = u[k + 1] - lambda * step[k];
            }
            let nt = residual(nl, &trial, a, h, &mut rt);
            if nt.is_finite() && (nt < norm || lambda < 1e-4) {
                u.copy_from_slice(&trial);
                r.copy_from_slice(&rt);
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm <= tol {
        Ok((norm, max_iter))
    } else {
        Err(Error::NoConvergence { method: "pbvp newton", detail: format!("residual {norm:.3e} at a = {a}") })
    }
}

/// Pseudo-transient continuation: implicit Euler steps of `u_t = F(u)` with a
/// growing step, used to reach Newton's basin from a crude start.
fn relax(nl: &Nonlinearity, u: &mut [f64], a: f64, h: f64, target: f64) -> Result<f64> {
    let n = u.len() - 1;
    let m = n - 1;
    let mut r = vec![0.0; m];
    let mut norm = residual(nl, u, a, h, &mut r);
    let (lo, dg, hi) = (1.0 / (h * h) - a / (2.0 * h), -2.0 / (h * h), 1.0 / (h * h) + a / (2.0 * h));
    let mut dt = 1.0;
    for _ in 0..20000 {
        if norm <= target {
            return Ok(norm);
        }
        let mut jac = Tridiagonal::new(m);
        for k in 0..m {
            jac.a[k] = -lo;
            jac.b[k] = 1.0 / dt - dg - nl.f_prime(u[k + 1]);
            jac.c[k] = -hi;
        }
        let mut step = r.clone();
        TridiagonalLu::factor(&jac)?.solve_in_place(&mut step);
        for k in 0..m {
            u[k + 1] += step[k];
        }
        let next = residual(nl, u, a, h, &mut r);
        if !next.is_finite() {
            return Err(Error::NonFinite("pbvp relaxation"));
        }
        dt = (dt * (norm / next).clamp(0.5, 4.0)).min(1e8);
        norm = next;
    }
    Err(Error::NoConvergence { method: "pbvp relaxation", detail: format!("residual {norm:.3e} at a = {a}") })
}

fn ramp(j: u32, n: usize) -> Vec<f64> {
    let top = TAU * j as f64;
    (0..=n).map(|i| top * (n - i) as f64 / n as f64).collect()
}

fn solve_on_mesh(nl: &Nonlinearity, ell: f64, j: u32, a: f64, n: usize, guess: Option<&[f64]>, opts: &PbvpOptions) -> Result<FixedSpeedProfile> {
    let h = 2.0 * ell / n as f64;
    // Rounding in the second difference limits the attainable residual on fine meshes.
    let floor = 16.0 * f64::EPSILON * TAU * j as f64 / (h * h);
    let opts = &PbvpOptions { newton_tol: opts.newton_tol.max(floor), ..*opts };
    let mut u = match guess {
        Some(g) if g.len() == n + 1 => g.to_vec(),
        _ => ramp(j, n),
    };
    let attempt = newton(nl, &mut u, a, h, opts.newton_tol, opts.max_newton);
    let (res, its) = match attempt {
        Ok(v) => v,
        Err(_) => {
            let mut u0 = ramp(j, n);
            relax(nl, &mut u0, a, h, opts.newton_tol)?;
            let out = newton(nl, &mut u0, a, h, opts.newton_tol, opts.max_newton)?;
            u = u0;
            out
        }
    };
    Ok(FixedSpeedProfile { ell, j, a, h, values: u, residual: res, newton_iterations: its })
}

fn check_params(ell: f64, j: u32) -> Result<()> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(invalid("half-length ℓ must be positive"));
    }
    if j == 0 {
        return Err(invalid("winding count j must be at least 1"));
    }
    Ok(())
}

/// Dirichlet solve at fixed speed on the default mesh.
pub fn solve_fixed_a(nl: &Nonlinearity, ell: f64, j: u32, a: f64) -> Result<FixedSpeedProfile> {
    solve_fixed_a_with(nl, ell, j, a, &PbvpOptions::default())
}

pub fn solve_fixed_a_with(nl: &Nonlinearity, ell: f64, j: u32, a: f64, opts: &PbvpOptions) -> Result<FixedSpeedProfile> {
    check_params(ell, j)?;
    solve_on_mesh(nl, ell, j, a, opts.intervals_per_kink * j as usize, None, opts)
}

/// Root of the matching function on a fixed mesh.
fn speed_on_mesh(nl: &Nonlinearity, ell: f64, j: u32, n: usize, opts: &PbvpOptions) -> Result<FixedSpeedProfile> {
    let mut lo = solve_on_mesh(nl, ell, j, 0.0, n, None, opts)?;
    let mut m_lo = lo.matching();
    if m_lo <= 0.0 {
        return Err(Error::NoConvergence { method: "pbvp speed", detail: format!("matching function {m_lo:.3e} ≤ 0 at a = 0") });
    }
    let mut hi_a = match opts.bracket_hi {
        Some(v) => v,
        None => 2.0 * crate::front::compute_front(nl)?.c,
    };
    let mut hi = solve_on_mesh(nl, ell, j, hi_a, n, Some(&lo.values), opts)?;
    let mut m_hi = hi.matching();
    let mut expansions = 0;
    while m_hi > 0.0 {
        expansions += 1;
        if expansions > 20 {
            return Err(Error::NoConvergence { method: "pbvp speed", detail: format!("no sign change of m(a) up to a = {hi_a}") });
        }
        lo = hi;
        m_lo = m_hi;
        hi_a *= 2.0;
        hi = solve_on_mesh(nl, ell, j, hi_a, n, Some(&lo.values), opts)?;
        m_hi = hi.matching();
    }
    // Illinois regula falsi: bisection-safe, superlinear near the root.
    let mut side = 0i8;
    for _ in 0..200 {
        if (hi.a - lo.a).abs() <= opts.speed_tol {
            break;
        }
        let mut a = (lo.a * m_hi - hi.a * m_lo) / (m_hi - m_lo);
        if !(a > lo.a && a < hi.a) {
            a = 0.5 * (lo.a + hi.a);
        }
        let guess = if m_lo.abs() < m_hi.abs() { lo.values.clone() } else { hi.values.clone() };
        let mid = solve_on_mesh(nl, ell, j, a, n, Some(&guess), opts)?;
        let m_mid = mid.matching();
        if m_mid == 0.0 {
            return Ok(mid);
        }
        if m_mid > 0.0 {
            lo = mid;
            m_lo = m_mid;
            if side == 1 {
                m_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = mid;
            m_hi = m_mid;
            if side == -1 {
                m_lo *= 0.5;
            }
            side = -1;
        }
    }
    let lo_m = lo.matching().abs();
    let hi_m = hi.matching().abs();
    Ok(if lo_m < hi_m { lo } else { hi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbvpSolution {
    pub ell: f64,
    pub j: u32,
    /// Speed, extrapolated when Richardson is enabled.
    pub a: f64,
    /// Speed on the default mesh.
    pub a_mesh: f64,
    pub h: f64,
    /// Profile on the default mesh, `u(−ℓ) = 2πj` down to `u(ℓ) = 0`.
    pub profile: Vec<f64>,
    /// `∫(u')²`, extrapolated like `a`.
    pub energy_integral: f64,
    /// `|a ∫(u')² − (F(2πj) − F(0))|`.
    pub energy_residual: f64,
    /// `|m(a)|` on the default mesh.
    pub matching_residual: f64,
    /// `|u'(−ℓ) − u'(ℓ)|` from one-sided differences.
    pub slope_mismatch: f64,
}

impl PbvpSolution {
    pub fn z(&self, i: usize) -> f64 {
        -self.ell + i as f64 * self.h
    }

    /// Cauchy–Schwarz bound `f0 ℓ / (π j)`.
    pub fn speed_bound(&self, nl: &Nonlinearity) -> f64 {
        nl.f0() * self.ell / (std::f64::consts::PI * self.j as f64)
    }
}

/// Speed `a(ℓ, j)` of the periodic wave and its profile; `tol` bounds the
/// width of the final speed bracket.
pub fn solve_speed(nl: &Nonlinearity, ell: f64, j: u32, tol: f64) -> Result<PbvpSolution> {
    if !(tol > 0.0) {
        return Err(invalid("speed tolerance must be positive"));
    }
    solve_speed_with(nl, ell, j, &PbvpOptions { speed_tol: tol, ..PbvpOptions::default() })
}

pub fn solve_speed_with(nl: &Nonlinearity, ell: f64, j: u32, opts: &PbvpOptions) -> Result<PbvpSolution> {
    check_params(ell, j)?;
    let n = opts.intervals_per_kink * j as usize;
    let coarse = speed_on_mesh(nl, ell, j, n, opts)?;
    let target = nl.big_f(TAU * j as f64) - nl.big_f(0.0);
    let (a, energy) = if opts.richardson {
        let fine = speed_on_mesh(nl, ell, j, 2 * n, opts)?;
        ((4.0 * fine.a - coarse.a) / 3.0, (4.0 * fine.dirichlet_energy() - coarse.dirichlet_energy()) / 3.0)
    } else {
        (coarse.a, coarse.dirichlet_energy())
    };
    let (sl, sr) = coarse.end_slopes();
    Ok(PbvpSolution {
        ell,
        j,
        a,
        a_mesh: coarse.a,
        h: coarse.h,
        energy_integral: energy,
        energy_residual: (a * energy - target).abs(),
        matching_residual: coarse.matching().abs(),
        slope_mismatch: (sl - sr).abs(),
        profile: coarse.values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyReport {
    pub j: u32,
    /// Speed of the single-kink cell problem `(ℓ/j, 1)`.
    pub a_cell: f64,
    /// Max nodewise deviation between the profile and the tiled cell profile.
    pub max_deviation: f64,
    /// Differences of the one-sided end slopes.
    pub slope_deviation: (f64, f64),
}

/// Compares a solution with `j` copies of the `(ℓ/j, 1)` wave, each shifted
/// by `2ℓ/j` and raised by a multiple of `2π`.
pub fn verify_copy_structure(nl: &Nonlinearity, sol: &PbvpSolution) -> Result<CopyReport> {
    verify_copy_structure_with(nl, sol, &PbvpOptions::default())
}

pub fn verify_copy_structure_with(nl: &Nonlinearity, sol: &PbvpSolution, opts: &PbvpOptions) -> Result<CopyReport> {
    let j = sol.j as usize;
    let cell = solve_speed_with(nl, sol.ell / j as f64, 1, &PbvpOptions { richardson: false, ..*opts })?;
    let m = cell.profile.len() - 1;
    if m * j != sol.profile.len() - 1 {
        return Err(invalid("cell and full meshes do not align"));
    }
    let mut worst: f64 = 0.0;
    for (i, &u) in sol.profile.iter().enumerate() {
        let copy = (i / m).min(j - 1);
        let local = i - copy * m;
        let tiled = cell.profile[local] + TAU * (j - 1 - copy) as f64;
        worst = worst.max((u - tiled).abs());
    }
    let h = sol.h;
    let u = &sol.profile;
    let n = u.len() - 1;
    let full = ((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h), (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h));
    let c = &cell.profile;
    let cell_slopes = ((-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * h), (3.0 * c[m] - 4.0 * c[m - 1] + c[m - 2]) / (2.0 * h));
    Ok(CopyReport {
        j: sol.j,
        a_cell: cell.a_mesh,
        max_deviation: worst,
        slope_deviation: ((full.0 - cell_slopes.0).abs(), (full.1 - cell_slopes.1).abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WashoutOptions {
    pub h: f64,
    pub dt: f64,
    pub observe_every: usize,
}

impl Default for WashoutOptions {
    fn default() -> Self {
        Self { h: 0.04, dt: 0.1, observe_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WashoutResult {
    pub times: Vec<f64>,
    /// Cyclic distances per frame, starting from the leftmost kink.
    pub distances: Vec<Vec<f64>>,
    /// Variance of the cyclic distances per frame.
    pub variances: Vec<f64>,
    /// Lab-frame drift speed of the mean kink position over the last half of the run.
    pub drift_speed: f64,
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Runs the periodic-with-jump PDE on `[−ℓ, ℓ)` from `initial` (kinks only,
/// `j` of them) and records the cyclic distances between the kinks.
pub fn washout_experiment(nl: &Nonlinearity, ell: f64, j: u32, initial: &InitialDataSpec, t_end: f64, opts: &WashoutOptions, front: Option<&FrontProfile>) -> Result<WashoutResult> {
    check_params(ell, j)?;
    if initial.kink_positions.len() != j as usize || !initial.antikink_positions.is_empty() {
        return Err(invalid(format!("washout needs exactly {j} kinks and no antikinks")));
    }
    if initial.kink_positions.iter().any(|&x| !(x >= -ell && x < ell)) {
        return Err(invalid("initial kinks must lie in [−ℓ, ℓ)"));
    }
    let n = (2.0 * ell / opts.h).round() as usize;
    let grid = periodic_grid(ell, n, j as i32, Frame::Lab)?;
    let field = make_initial_data(initial, &grid, front)?;
    let sim = Simulation::new(nl, &field, opts.dt)?.with_observe_every(opts.observe_every);
    let period = 2.0 * ell;
    let mut times = Vec::new();
    let mut distances = Vec::new();
    let mut variances = Vec::new();
    let mut centers = Vec::new();
    // Unwrapped mean position: kinks leaving at the right re-enter at the left.
    let mut prev_center: Option<f64> = None;
    let mut offset = 0.0;
    let mut failure = None;
    sim.run(field, t_end, |f| {
        let snap = extract_positions(f);
        let mut xs: Vec<f64> = snap.crossings.iter().filter(|c| c.direction == Direction::Falling).map(|c| c.x).collect();
        if xs.len() != j as usize {
            failure.get_or_insert(f.t);
            return;
        }
        xs.sort_by(f64::total_cmp);
        let mut d: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        d.push(xs[0] + period - xs[xs.len() - 1]);
        // The mean of the positions is defined modulo the spacing 2ℓ/j.
        let spacing = period / j as f64;
        let raw = xs.iter().sum::<f64>() / xs.len() as f64;
        if let Some(p) = prev_center {
            let jump = raw + offset - p;
            offset -= spacing * (jump / spacing).round();
        }
        let c = raw + offset;
        prev_center = Some(c);
        times.push(f.t);
        variances.push(variance(&d));
        distances.push(d);
        centers.push(c);
    })?;
    if let Some(t) = failure {
        return Err(Error::NoConvergence { method: "washout", detail: format!("lost track of the {j} kinks at t = {t}") });
    }
    let half = times.len() / 2;
    let drift_speed = if times.len() - half >= 3 { linear_fit(&times[half..], &centers[half..]).0 } else { 0.0 };
    Ok(WashoutResult { times, distances, variances, drift_speed })
}

/// Equidistant `j`-kink data on `[−ℓ, ℓ)` (front superposition style).
pub fn equidistant_kinks(ell: f64, j: u32, offset: f64) -> InitialDataSpec {
    let spacing = 2.0 * ell / j as f64;
    let mut xs: Vec<f64> = (0..j).map(|k| -ell + offset + spacing * (k as f64 + 0.5)).collect();
    xs.reverse();
    InitialDataSpec { kink_positions: xs, antikink_positions: Vec::new(), mollifier_halfwidths: Vec::new(), style: InitialStyle::FrontSuperposition }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::compute_front;
    use approx::assert_abs_diff_eq;

    fn nl() -> Nonlinearity {
        Nonlinearity::new(0.2).unwrap()
    }

    fn quick() -> PbvpOptions {
        PbvpOptions { intervals_per_kink: 200, ..PbvpOptions::default() }
    }

    #[test]
    fn fixed_speed_solution_is_monotone_with_small_residual() {
        let p = solve_fixed_a(&nl(), 4.0, 1, 0.05).unwrap();
        assert!(p.residual < 1e-8);
        assert!(p.is_monotone());
        assert_eq!(p.values[0], TAU);
        assert_eq!(*p.values.last().unwrap(), 0.0);
    }

    #[test]
    fn larger_speed_gives_lower_profile() {
        let o = quick();
        let p1 = solve_fixed_a_with(&nl(), 3.0, 1, 0.02, &o).unwrap();
        let p2 = solve_fixed_a_with(&nl(), 3.0, 1, 0.2, &o).unwrap();
        assert!(p1.values.iter().zip(&p2.values).all(|(a, b)| b <= a));
        assert!(p1.matching() > p2.matching());
    }

    #[test]
    fn speed_is_positive_and_bounded() {
        let s = solve_speed_with(&nl(), 4.0, 1, &quick()).unwrap();
        assert!(s.a > 0.0);
        assert!(s.a <= s.speed_bound(&nl()));
        assert!(s.matching_residual < 1e-6);
        // The continuum slope mismatch is a discretization effect.
        assert!(s.slope_mismatch < 1e-3, "{}", s.slope_mismatch);
    }

    #[test]
    fn energy_identity_holds_after_extrapolation() {
        let s = solve_speed(&nl(), 4.0, 1, 1e-13).unwrap();
        assert!(s.energy_residual < 1e-6, "{}", s.energy_residual);
        let raw = solve_speed_with(&nl(), 4.0, 1, &PbvpOptions { richardson: false, ..PbvpOptions::default() }).unwrap();
        assert!(raw.energy_residual > s.energy_residual);
    }

    #[test]
    fn speed_increases_with_cell_length() {
        let o = quick();
        let a: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&l| solve_speed_with(&nl(), l, 1, &o).unwrap().a).collect();
        assert!(a[0] < a[1] && a[1] < a[2], "{a:?}");
    }

    #[test]
    fn long_cells_approach_the_front_speed() {
        let c = compute_front(&nl()).unwrap().c;
        let s = solve_speed_with(&nl(), 8.0, 1, &quick()).unwrap();
        assert!(s.a < c && (s.a - c).abs() < 0.01 * c, "{} vs {c}", s.a);
    }

    #[test]
    fn grid_convergence_is_second_order() {
        let a: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&k| solve_speed_with(&nl(), 2.0, 1, &PbvpOptions { intervals_per_kink: k, richardson: false, ..PbvpOptions::default() }).unwrap().a)
            .collect();
        let ratio = (a[0] - a[1]) / (a[1] - a[2]);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn copy_structure_and_scaling() {
        let o = PbvpOptions { intervals_per_kink: 400, ..PbvpOptions::default() };
        let s2 = solve_speed_with(&nl(), 8.0, 2, &o).unwrap();
        let s1 = solve_speed_with(&nl(), 4.0, 1, &o).unwrap();
        assert_abs_diff_eq!(s2.a, s1.a, epsilon = 1e-9);
        let rep = verify_copy_structure_with(&nl(), &s2, &o).unwrap();
        assert!(rep.max_deviation < 1e-7, "{}", rep.max_deviation);
        assert!(rep.slope_deviation.0 < 1e-6 && rep.slope_deviation.1 < 1e-6);
        let self_rep = verify_copy_structure_with(&nl(), &s1, &o).unwrap();
        assert!(self_rep.max_deviation < 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(solve_speed(&nl(), -1.0, 1, 1e-12).is_err());
        assert!(solve_speed(&nl(), 1.0, 0, 1e-12).is_err());
        assert!(solve_speed(&nl(), 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn equidistant_data_stays_equidistant() {
        let front = compute_front(&nl()).unwrap();
        let spec = equidistant_kinks(3.0, 2, 0.3);
        let r = washout_experiment(&nl(), 3.0, 2, &spec, 20.0, &WashoutOptions::default(), Some(&front)).unwrap();
        assert!(r.variances.iter().all(|&v| v <= 1e-6), "{:?}", r.variances.iter().fold(0.0f64, |a, b| a.max(*b)));
    }

    #[test]
    fn unequal_kinks_wash_out_and_drift_at_the_wave_speed() {
        let nl = nl();
        let front = compute_front(&nl).unwrap();
        let spec = InitialDataSpec { kink_positions: vec![4.0, 1.5, -4.0], ..equidistant_kinks(6.0, 3, 0.0) };
        let r = washout_experiment(&nl, 6.0, 3, &spec, 1000.0, &WashoutOptions::default(), Some(&front)).unwrap();
        let v0 = r.variances[0];
        assert!(*r.variances.last().unwrap() < 0.01 * v0);
        // After the first tenth of the run the variance only shrinks (up to rounding).
        let start = r.times.len() / 10;
        assert!(r.variances[start..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let a = solve_speed_with(&nl, 6.0, 3, &quick()).unwrap().a;
        assert!((r.drift_speed - front.c).signum() == (a - front.c).signum());
        assert!((r.drift_speed - a).abs() < 2e-3, "{} vs {a}", r.drift_speed);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn fixed_speed_profiles_are_monotone_and_ordered(ell in 0.5f64..5.0, a1 in 0.0f64..0.3, da in 0.01f64..0.1) {
            let o = PbvpOptions { intervals_per_kink: 200, ..PbvpOptions::default() };
            let p1 = solve_fixed_a_with(&nl(), ell, 1, a1, &o).unwrap();
            let p2 = solve_fixed_a_with(&nl(), ell, 1, a1 + da, &o).unwrap();
            proptest::prop_assert!(p1.is_monotone() && p2.is_monotone());
            proptest::prop_assert!(p1.values.iter().zip(&p2.values).all(|(u1, u2)| u2 <= u1));
        }
    }
}
