//! The single traveling kink `φ'' + cφ' + f(φ) = 0`, `φ(-∞) = 2π`, `φ(∞) = 0`.
//!
//! The speed is found by shooting: the unstable manifold of the saddle at
//! `(2π, 0)` is followed forward and the stable manifold of `(0, 0)` backward,
//! both to the section `u = θu` (the unstable zero of `f`). Their slope
//! mismatch is monotone in `c` and vanishes at the heteroclinic speed.
//!
//! The sampled profile is glued from the same two branches at `φ = π`, so
//! neither half is ever integrated along its unstable direction.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Error, Result};
use crate::linalg::{linear_fit, trapezoid};
use crate::nonlinearity::Nonlinearity;
use crate::ode::{integrate, Control, DenseStep, Dopri5Options};

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    /// Distance from the saddle along the linear eigenvector at launch.
    pub launch_offset: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Longest integration span before a branch is declared stuck.
    pub max_span: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { launch_offset: 1e-8, rtol: 1e-12, atol: 1e-15, max_span: 400.0 }
    }
}

/// Tail rates of the linearization at either rest state for speed `c`.
/// Returns `(mu, lambda)` with `mu > 0 > lambda`.
pub fn tail_rates(nl: &Nonlinearity, c: f64) -> (f64, f64) {
    let fp = nl.f_prime(0.0);
    let disc = (c * c - 4.0 * fp).sqrt();
    ((-c + disc) / 2.0, (-c - disc) / 2.0)
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    /// Slope `u'` where the branch meets the section.
    Hit(f64),
    /// The branch turned back before reaching the section.
    Turned,
}

fn rhs(nl: &Nonlinearity, c: f64) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_, y, d| {
        d[0] = y[1];
        d[1] = -c * y[1] - nl.f(y[0]);
    }
}

fn unstable_branch(nl: &Nonlinearity, c: f64, section: f64, opts: &ShootingOptions, mut keep: Option<&mut Vec<DenseStep>>) -> Result<(Branch, f64)> {
    let (mu, _) = tail_rates(nl, c);
    let d = opts.launch_offset;
    let y0 = [TAU - d, -d * mu];
    let mut outcome = None;
    let ode_opts = Dopri5Options::with_tol(opts.rtol, opts.atol);
    integrate(rhs(nl, c), 0.0, &y0, opts.max_span, &ode_opts, |step| {
        let y1 = step.eval(step.t1());
        if let Some(keep) = keep.as_deref_mut() {
            keep.push(step.clone());
        }
        if y1[0] <= section {
            let z = step.find_root(|_, y| y[0] - section, 1e-14).unwrap_or(step.t1());
            outcome = Some((Branch::Hit(step.eval(z)[1]), z));
            return Control::Stop;
        }
        if y1[1] >= 0.0 {
            outcome = Some((Branch::Turned, step.t1()));
            return Control::Stop;
        }
        Control::Continue
    })?;
    outcome.ok_or_else(|| Error::NoConvergence { method: "front shooting", detail: format!("unstable branch did not reach the section for c = {c}") })
}

fn stable_branch(nl: &Nonlinearity, c: f64, section: f64, opts: &ShootingOptions, mut keep: Option<&mut Vec<DenseStep>>) -> Result<(Branch, f64)> {
    let (_, lambda) = tail_rates(nl, c);
    let d = opts.launch_offset;
    let y0 = [d, d * lambda];
    let mut outcome = None;
    let ode_opts = Dopri5Options::with_tol(opts.rtol, opts.atol);
    integrate(rhs(nl, c), 0.0, &y0, -opts.max_span, &ode_opts, |step| {
        let y1 = step.eval(step.t1());
        if let Some(keep) = keep.as_deref_mut() {
            keep.push(step.clone());
        }
        if y1[0] >= section {
            let z = step.find_root(|_, y| y[0] - section, 1e-14).unwrap_or(step.t1());
            outcome = Some((Branch::Hit(step.eval(z)[1]), z));
            return Control::Stop;
        }
        if y1[1] >= 0.0 {
            outcome = Some((Branch::Turned, step.t1()));
            return Control::Stop;
        }
        Control::Continue
    })?;
    outcome.ok_or_else(|| Error::NoConvergence { method: "front shooting", detail: format!("stable branch did not reach the section for c = {c}") })
}

/// Signed slope mismatch at the section `u = θu`; negative when the
/// trajectory overshoots (c too small), positive when it turns back.
/// `None` encodes a branch that turned before reaching the section.
pub fn shooting_miss(nl: &Nonlinearity, c: f64, opts: &ShootingOptions) -> Result<Option<f64>> {
    let section = nl.unstable_zero();
    let (up, _) = unstable_branch(nl, c, section, opts, None)?;
    let (down, _) = stable_branch(nl, c, section, opts, None)?;
    Ok(match (up, down) {
        (Branch::Hit(a), Branch::Hit(b)) => Some(a - b),
        _ => None,
    })
}

fn miss_sign(nl: &Nonlinearity, c: f64, opts: &ShootingOptions) -> Result<f64> {
    Ok(match shooting_miss(nl, c, opts)? {
        Some(m) => m,
        None => f64::INFINITY,
    })
}

/// Result of the speed computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedSolution {
    pub c: f64,
    /// |miss| at the returned speed.
    pub residual: f64,
    pub iterations: usize,
}

/// Kink speed by bisection on the shooting miss, refined until the bracket
/// is narrower than `tol`.
pub fn compute_speed(nl: &Nonlinearity, tol: f64) -> Result<f64> {
    Ok(solve_speed(nl, tol, &ShootingOptions::default())?.c)
}

pub fn solve_speed(nl: &Nonlinearity, tol: f64, opts: &ShootingOptions) -> Result<SpeedSolution> {
    if !(tol > 0.0) {
        return Err(invalid("speed tolerance must be positive"));
    }
    let mut lo = 0.0;
    let m_lo = miss_sign(nl, lo, opts)?;
    if m_lo >= 0.0 {
        return Err(Error::NoConvergence { method: "front shooting", detail: "no overshoot at c = 0".into() });
    }
    let mut hi = 1.0;
    let mut tries = 0;
    while miss_sign(nl, hi, opts)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 20 {
            return Err(Error::NoConvergence { method: "front shooting", detail: "could not bracket the speed".into() });
        }
    }
    let mut iterations = 0;
    while hi - lo > tol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if miss_sign(nl, mid, opts)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    // Take whichever bracket end has the smaller finite miss.
    let m_lo = miss_sign(nl, lo, opts)?.abs();
    let m_hi = miss_sign(nl, hi, opts)?.abs();
    let (c, residual) = if m_lo <= m_hi { (lo, m_lo) } else { (hi, m_hi) };
    Ok(SpeedSolution { c, residual, iterations })
}

/// Traveling kink sampled on a uniform grid centered at `φ(0) = π`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontProfile {
    pub nl: Nonlinearity,
    pub c: f64,
    pub mu: f64,
    pub lambda: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub capital_lambda: f64,
    pub a_l: f64,
    pub a_r: f64,
    /// Grid spacing; sample `k` sits at `z = z_min + k h`.
    pub h: f64,
    pub z_min: f64,
    pub values: Vec<f64>,
    /// `φ'` at the grid points, taken from the phase-plane state.
    pub slopes: Vec<f64>,
}

/// Samples the kink for speed `c` on `[-half_width, half_width]` with step `h`.
/// The returned profile has tail data and interaction coefficients filled in.
pub fn compute_profile(nl: &Nonlinearity, c: f64, half_width: f64, h: f64) -> Result<FrontProfile> {
    compute_profile_with(nl, c, half_width, h, &ShootingOptions::default())
}

pub fn compute_profile_with(nl: &Nonlinearity, c: f64, half_width: f64, h: f64, opts: &ShootingOptions) -> Result<FrontProfile> {
    if !(h > 0.0 && half_width > h) {
        return Err(invalid("profile grid needs 0 < h < half_width"));
    }
    let (mu, lambda) = tail_rates(nl, c);
    let m = (half_width / h).round() as usize;
    let n = 2 * m + 1;
    let z_min = -(m as f64) * h;

    let mut left_steps = Vec::new();
    let (hit, s_left) = unstable_branch(nl, c, PI, opts, Some(&mut left_steps))?;
    if !matches!(hit, Branch::Hit(_)) {
        return Err(Error::NoConvergence { method: "front profile", detail: format!("unstable branch turned back for c = {c}") });
    }
    let mut right_steps = Vec::new();
    let (hit, s_right) = stable_branch(nl, c, PI, opts, Some(&mut right_steps))?;
    if !matches!(hit, Branch::Hit(_)) {
        return Err(Error::NoConvergence { method: "front profile", detail: format!("stable branch turned back for c = {c}") });
    }
    // Branch times: left runs s ∈ [0, s_left] and z = s - s_left;
    // right runs s ∈ [s_right, 0] (s_right < 0) and z = s - s_right.
    let d = opts.launch_offset;
    let z_launch_left = -s_left;
    let z_launch_right = -s_right;

    let mut values = vec![0.0; n];
    let mut slopes = vec![0.0; n];
    for k in 0..n {
        let z = z_min + k as f64 * h;
        let (u, v) = if k < m {
            if z <= z_launch_left {
                let e = (mu * (z - z_launch_left)).exp();
                (TAU - d * e, -d * mu * e)
            } else {
                let y = eval_steps(&left_steps, z + s_left);
                (y[0], y[1])
            }
        } else if k == m {
            let y = eval_steps(&left_steps, s_left);
            let w = eval_steps(&right_steps, s_right);
            (PI, 0.5 * (y[1] + w[1]))
        } else if z >= z_launch_right {
            let e = (lambda * (z - z_launch_right)).exp();
            (d * e, d * lambda * e)
        } else {
            let y = eval_steps(&right_steps, z + s_right);
            (y[0], y[1])
        };
        values[k] = u;
        slopes[k] = v;
    }

    let mut profile = FrontProfile {
        nl: *nl,
        c,
        mu,
        lambda,
        a_plus: f64::NAN,
        a_minus: f64::NAN,
        capital_lambda: f64::NAN,
        a_l: f64::NAN,
        a_r: f64::NAN,
        h,
        z_min,
        values,
        slopes,
    };
    let tails = fit_tails(&profile);
    profile.a_plus = tails.a_plus;
    profile.a_minus = tails.a_minus;
    let coeffs = compute_interaction_coefficients(&profile);
    profile.capital_lambda = coeffs.capital_lambda;
    profile.a_l = coeffs.a_l;
    profile.a_r = coeffs.a_r;
    Ok(profile)
}

fn eval_steps(steps: &[DenseStep], s: f64) -> Vec<f64> {
    // Steps are ordered in integration direction; the sign of h tells which.
    let forward = steps.first().map(|st| st.h > 0.0).unwrap_or(true);
    let idx = steps.partition_point(|st| if forward { st.t1() < s } else { st.t1() > s });
    let st = &steps[idx.min(steps.len() - 1)];
    st.eval(s)
}

/// Default grid: `half_width = 10/μ`, `h = 0.01`.
pub fn compute_front(nl: &Nonlinearity) -> Result<FrontProfile> {
    let c = compute_speed(nl, 1e-13)?;
    let (mu, _) = tail_rates(nl, c);
    compute_profile(nl, c, 10.0 / mu, 0.01)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailFit {
    pub mu: f64,
    pub lambda: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    /// Free-slope regression of the log tails, used to validate the closed-form rates.
    pub fitted_mu: f64,
    pub fitted_lambda: f64,
    /// RMS residual of the amplitude fits in log space.
    pub residual: f64,
}

/// Fits `φ ≈ a₊ e^{λz}` on the right and `2π − φ ≈ a₋ e^{μz}` on the left.
///
/// Rates are the closed forms; the amplitude fits include the leading
/// nonlinear correction (`log(φ e^{-λz}) = log a₊ + b e^{λz}`) so the
/// default window at half the grid gives amplitudes to about 1e-6.
pub fn fit_tails(profile: &FrontProfile) -> TailFit {
    let (mu, lambda) = (profile.mu, profile.lambda);
    let z_max = profile.z_min + (profile.values.len() - 1) as f64 * profile.h;
    let mut rz = Vec::new();
    let mut rlog = Vec::new();
    let mut lz = Vec::new();
    let mut llog = Vec::new();
    for (k, &u) in profile.values.iter().enumerate() {
        let z = profile.z_min + k as f64 * profile.h;
        if z >= 0.5 * z_max && u > 0.0 {
            rz.push(z);
            rlog.push(u.ln());
        } else if z <= 0.5 * profile.z_min && TAU - u > 0.0 {
            lz.push(z);
            llog.push((TAU - u).ln());
        }
    }
    let (fitted_lambda, _, _) = linear_fit(&rz, &rlog);
    let (fitted_mu, _, _) = linear_fit(&lz, &llog);

    let fit_amp = |zs: &[f64], logs: &[f64], rate: f64| {
        let x: Vec<f64> = zs.iter().map(|z| (rate * z).exp()).collect();
        let y: Vec<f64> = zs.iter().zip(logs).map(|(z, l)| l - rate * z).collect();
        let (_, intercept, rms) = linear_fit(&x, &y);
        (intercept.exp(), rms)
    };
    let (a_plus, r1) = fit_amp(&rz, &rlog, lambda);
    let (a_minus, r2) = fit_amp(&lz, &llog, mu);
    TailFit { mu, lambda, a_plus, a_minus, fitted_mu, fitted_lambda, residual: r1.max(r2) }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InteractionCoefficients {
    pub capital_lambda: f64,
    pub a_l: f64,
    pub a_r: f64,
}

/// `Λ = 1 / ∫ e^{cz} φ'(z)² dz` by the trapezoid rule, then
/// `a_L = Λ a₊ a₋ μ (2μ + c)` and `a_R = Λ a₊ a₋ λ (2λ + c)`.
pub fn compute_interaction_coefficients(profile: &FrontProfile) -> InteractionCoefficients {
    let c = profile.c;
    let integrand: Vec<f64> = profile
        .slopes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let z = profile.z_min + k as f64 * profile.h;
            (c * z).exp() * s * s
        })
        .collect();
    let capital_lambda = 1.0 / trapezoid(&integrand, profile.h);
    let amp = capital_lambda * profile.a_plus * profile.a_minus;
    InteractionCoefficients {
        capital_lambda,
        a_l: amp * profile.mu * (2.0 * profile.mu + c),
        a_r: amp * profile.lambda * (2.0 * profile.lambda + c),
    }
}

impl FrontProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn z(&self, k: usize) -> f64 {
        self.z_min + k as f64 * self.h
    }

    pub fn z_max(&self) -> f64 {
        self.z(self.values.len() - 1)
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.z(k)).collect()
    }

    fn second(&self, u: f64, v: f64) -> f64 {
        -self.c * v - self.nl.f(u)
    }

    /// `φ(z)`: Hermite interpolation inside the grid, exponential tails outside.
    pub fn phi(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    pub fn phi_prime(&self, z: f64) -> f64 {
        self.eval(z).1
    }

    pub fn phi_second(&self, z: f64) -> f64 {
        let (u, v) = self.eval(z);
        self.second(u, v)
    }

    /// Returns `(φ(z), φ'(z))`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let n = self.values.len();
        if z <= self.z_min {
            let e = (self.mu * (z - self.z_min)).exp();
            let gap = TAU - self.values[0];
            return (TAU - gap * e, self.slopes[0] * e);
        }
        let z_max = self.z_max();
        if z >= z_max {
            let e = (self.lambda * (z - z_max)).exp();
            return (self.values[n - 1] * e, self.slopes[n - 1] * e);
        }
        let s = (z - self.z_min) / self.h;
        let k = (s.floor() as usize).min(n - 2);
        let t = s - k as f64;
        let h = self.h;
        let (u0, u1) = (self.values[k], self.values[k + 1]);
        let (v0, v1) = (self.slopes[k], self.slopes[k + 1]);
        let (w0, w1) = (self.second(u0, v0), self.second(u1, v1));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * u0 + h10 * h * v0 + h01 * u1 + h11 * h * v1;
        let v = h00 * v0 + h10 * h * w0 + h01 * v1 + h11 * h * w1;
        (u, v)
    }

    /// Antikink profile `φ(−z)`, which travels with speed `−c`.
    pub fn antikink(&self, z: f64) -> f64 {
        self.phi(-z)
    }

    /// Max-norm residual of `φ'' + cφ' + f(φ)` on the interior grid, with
    /// fourth-order central differences of the sampled values.
    pub fn ode_residual(&self) -> f64 {
        let u = &self.values;
        let h = self.h;
        let mut worst: f64 = 0.0;
        for k in 2..u.len() - 2 {
            let d2 = (-u[k + 2] + 16.0 * u[k + 1] - 30.0 * u[k] + 16.0 * u[k - 1] - u[k - 2]) / (12.0 * h * h);
            let d1 = (-u[k + 2] + 8.0 * u[k + 1] - 8.0 * u[k - 1] + u[k - 2]) / (12.0 * h);
            worst = worst.max((d2 + self.c * d1 + self.nl.f(u[k])).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::sync::OnceLock;

    fn default_front() -> &'static FrontProfile {
        static FRONT: OnceLock<FrontProfile> = OnceLock::new();
        FRONT.get_or_init(|| compute_front(&Nonlinearity::new(0.2).unwrap()).unwrap())
    }

    #[test]
    fn speed_has_small_residual() {
        let nl = Nonlinearity::new(0.2).unwrap();
        let sol = solve_speed(&nl, 1e-13, &ShootingOptions::default()).unwrap();
        assert!(sol.residual < 1e-10, "residual {}", sol.residual);
        assert!(sol.c > 0.0);
    }

    #[test]
    fn miss_changes_sign_across_speed() {
        let nl = Nonlinearity::new(0.2).unwrap();
        let c = default_front().c;
        let opts = ShootingOptions::default();
        assert!(miss_sign(&nl, c - 1e-3, &opts).unwrap() < 0.0);
        assert!(miss_sign(&nl, c + 1e-3, &opts).unwrap() > 0.0);
    }

    #[test]
    fn speed_decreases_toward_excitable_limit() {
        let cs: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&f0| compute_speed(&Nonlinearity::new(f0).unwrap(), 1e-10).unwrap())
            .collect();
        assert!(cs[0] < cs[1] && cs[1] < cs[2], "{cs:?}");
    }

    #[test]
    fn tail_rates_satisfy_vieta() {
        let nl = Nonlinearity::new(0.2).unwrap();
        for c in [0.0, 0.3, 1.7] {
            let (mu, lambda) = tail_rates(&nl, c);
            assert_abs_diff_eq!(mu + lambda, -c, epsilon = 1e-12);
            assert_abs_diff_eq!(mu * lambda, nl.f_prime(0.0), epsilon = 1e-12);
            assert!(mu > 0.0 && lambda < 0.0);
        }
    }

    #[test]
    fn profile_is_centered_monotone_with_limits() {
        let p = default_front();
        let mid = p.values.len() / 2;
        assert_abs_diff_eq!(p.z(mid), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values[mid], PI, epsilon = 1e-12);
        assert!(p.values.windows(2).all(|w| w[1] < w[0]));
        assert!(p.slopes.iter().all(|&s| s < 0.0));
        assert!(TAU - p.values[0] < 5e-4);
        assert!(p.values[p.len() - 1] < 5e-4);
    }

    #[test]
    fn profile_satisfies_ode() {
        let p = default_front();
        let r = p.ode_residual();
        assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn antikink_satisfies_reflected_ode() {
        let p = default_front();
        let h = 0.01;
        let mut worst: f64 = 0.0;
        for k in -500..=500 {
            let z = k as f64 * h;
            let psi = |s: f64| p.antikink(s);
            let d2 = (psi(z + h) - 2.0 * psi(z) + psi(z - h)) / (h * h);
            let d1 = (psi(z + h) - psi(z - h)) / (2.0 * h);
            worst = worst.max((d2 - p.c * d1 + p.nl.f(psi(z))).abs());
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn tail_fit_validates_rates() {
        let p = default_front();
        let t = fit_tails(p);
        assert!((t.fitted_mu / t.mu - 1.0).abs() < 0.01, "{t:?}");
        assert!((t.fitted_lambda / t.lambda - 1.0).abs() < 0.01, "{t:?}");
        assert!(t.a_plus > 0.0 && t.a_minus > 0.0);
        assert!(t.residual < 1e-6);
    }

    #[test]
    fn coefficients_positive_and_integrand_decays() {
        let p = default_front();
        assert!(p.a_l > 0.0 && p.a_r > 0.0);
        assert!(p.capital_lambda > 0.0);
        // decay of e^{cz} φ'^2 on the right tail
        let n = p.len();
        let g = |k: usize| (p.c * p.z(k)).exp() * p.slopes[k].powi(2);
        let (k1, k2) = (n - 200, n - 1);
        let rate = (g(k2).ln() - g(k1).ln()) / (p.z(k2) - p.z(k1));
        let expected = -(2.0 * p.mu + p.c);
        assert!((rate / expected - 1.0).abs() < 0.05, "{rate} vs {expected}");
    }

    #[test]
    fn interpolation_matches_grid_and_tails() {
        let p = default_front();
        for k in [0, 17, p.len() / 2, p.len() - 1] {
            assert_abs_diff_eq!(p.phi(p.z(k)), p.values[k], epsilon = 1e-13);
        }
        let zr = p.z_max() + 3.0;
        assert_abs_diff_eq!(p.phi(zr) / p.phi(p.z_max()), (p.lambda * 3.0).exp(), epsilon = 1e-12);
        // half-grid points agree with the ODE residual within interpolation error
        let z = 0.005;
        let fd = (p.phi(z + 1e-4) - p.phi(z - 1e-4)) / 2e-4;
        assert_abs_diff_eq!(fd, p.phi_prime(z), epsilon = 1e-6);
    }

    /// Independent route to the interaction coefficients: project the tail
    /// perturbation onto the adjoint weight directly instead of using the
    /// integrated-by-parts closed forms.
    #[test]
    fn coefficients_match_direct_projection() {
        let nl = Nonlinearity::new(0.2).unwrap();
        let base = default_front();
        let p = compute_profile(&nl, base.c, 20.0 / base.mu, 0.005).unwrap();
        let fp0 = nl.f_prime(0.0);
        let kernel = |rate: f64| {
            let vals: Vec<f64> = (0..p.len())
                .map(|k| {
                    let z = p.z(k);
                    ((p.c + rate) * z).exp() * p.slopes[k] * (nl.f_prime(p.values[k]) - fp0)
                })
                .collect();
            trapezoid(&vals, p.h)
        };
        let a_l = -p.capital_lambda * p.a_plus * kernel(p.lambda);
        let a_r = -p.capital_lambda * p.a_minus * kernel(p.mu);
        assert!((a_l / p.a_l - 1.0).abs() < 1e-3, "{a_l} vs {}", p.a_l);
        assert!((a_r / p.a_r - 1.0).abs() < 1e-3, "{a_r} vs {}", p.a_r);
    }
}
