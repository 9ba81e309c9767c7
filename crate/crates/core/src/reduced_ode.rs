//! Reduced dynamics of well-separated kinks.
//!
//! Positions `η₁ > … > η_n` in the comoving frame obey
//!
//! ```text
//! η_j' = a_L e^{λ(η_j − η_{j+1})} − a_R e^{−μ(η_{j−1} − η_j)} + R_j
//! ```
//!
//! with the first term absent for `j = n` and the second for `j = 1`.
//!
//! After normalizing `δ̃ = μ δ(t/μ)` the distances follow
//! `δ̃_1' = e^{−δ̃_1} + g_1 e^{−(1+ε)δ̃_min}` and
//! `δ̃_j' = e^{−δ̃_j} − e^{−δ̃_{j−1}} + g_j e^{−(1+ε)δ̃_min}`.
//! For `n` kinks there are `N = n − 1` distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};
use crate::front::FrontProfile;
use crate::linalg::linear_fit;
use crate::ode::{integrate, Control, Dopri5Options};

/// Bounded smooth perturbation `g_j(δ) = A sin(ω_j δ_j + φ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Perturbation {
    #[default]
    Zero,
    Sinusoidal { amplitude: f64, omega: Vec<f64>, phase: Vec<f64> },
}

impl Perturbation {
    /// Frequencies in `[0.5, 2]` and phases in `[0, 2π)` drawn from `seed`.
    pub fn random(n: usize, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let phase = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        Perturbation::Sinusoidal { amplitude, omega, phase }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Perturbation::Zero)
    }

    pub fn bound(&self) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::Sinusoidal { amplitude, .. } => amplitude.abs(),
        }
    }

    /// `g_j` at the distance vector `delta`.
    pub fn eval(&self, j: usize, delta: &[f64]) -> f64 {
        self.eval_at(j, delta[j])
    }

    /// Component `j` evaluated at the scalar argument `x`.
    pub fn eval_at(&self, j: usize, x: f64) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::Sinusoidal { amplitude, omega, phase } => {
                let k = j % omega.len();
                amplitude * (omega[k] * x + phase[k]).sin()
            }
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Perturbation::Sinusoidal { amplitude, omega, phase } = self {
            if !amplitude.is_finite() || omega.len() < n || phase.len() < n {
                return Err(invalid(format!("perturbation needs finite amplitude and {n} frequencies and phases")));
            }
        }
        Ok(())
    }
}

/// Remainder model for the position system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Remainder {
    #[default]
    Zero,
    /// `R_j = g_j(μ d) e^{−(1+ε) μ δ_min}`.
    Bounded { epsilon: f64, g: Perturbation },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub n: usize,
    pub a_l: f64,
    pub a_r: f64,
    pub mu: f64,
    pub lambda: f64,
    pub remainder: Remainder,
}

impl ReducedSystem {
    pub fn new(n: usize, a_l: f64, a_r: f64, mu: f64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need at least one kink"));
        }
        if !(a_l > 0.0 && a_r > 0.0 && mu > 0.0 && lambda < 0.0) {
            return Err(invalid(format!("need a_L, a_R, μ > 0 > λ (got {a_l}, {a_r}, {mu}, {lambda})")));
        }
        Ok(Self { n, a_l, a_r, mu, lambda, remainder: Remainder::Zero })
    }

    pub fn from_front(n: usize, front: &FrontProfile) -> Result<Self> {
        Self::new(n, front.a_l, front.a_r, front.mu, front.lambda)
    }

    pub fn with_remainder(mut self, remainder: Remainder) -> Self {
        self.remainder = remainder;
        self
    }

    /// Default validity threshold `δ* = 8/μ`.
    pub fn default_validity(&self) -> f64 {
        8.0 / self.mu
    }

    pub fn rhs(&self, eta: &[f64], out: &mut [f64]) {
        let n = eta.len();
        for j in 0..n {
            let mut v = 0.0;
            if j + 1 < n {
                v += self.a_l * (self.lambda * (eta[j] - eta[j + 1])).exp();
            }
            if j > 0 {
                v -= self.a_r * (-self.mu * (eta[j - 1] - eta[j])).exp();
            }
            out[j] = v;
        }
        if let Remainder::Bounded { epsilon, g } = &self.remainder {
            if n >= 2 {
                let scaled: Vec<f64> = eta.windows(2).map(|w| self.mu * (w[0] - w[1])).collect();
                let dmin = scaled.iter().copied().fold(f64::INFINITY, f64::min);
                let weight = (-(1.0 + epsilon) * dmin).exp();
                for (j, o) in out.iter_mut().enumerate() {
                    *o += g.eval_at(j, scaled[j.min(n - 2)]) * weight;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityBreach {
    pub t: f64,
    pub gap: f64,
    pub threshold: f64,
}

impl From<ValidityBreach> for Error {
    fn from(b: ValidityBreach) -> Self {
        Error::OutsideValidity { gap: b.gap, threshold: b.threshold, t: b.t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Set when the run stopped early because the minimum gap fell below the threshold.
    pub breach: Option<ValidityBreach>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Consecutive differences `η_j − η_{j+1}` of every state.
    pub fn gaps(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.windows(2).map(|w| w[0] - w[1]).collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Minimum admissible gap; `None` uses `8/μ`, a non-positive value disables the check.
    pub validity: Option<f64>,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, validity: None }
    }
}

fn min_gap(eta: &[f64]) -> f64 {
    eta.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
}

/// Integrates the position system, recording every accepted step. With
/// `times` given, records those instants only (plus the breach time, if any).
pub fn integrate_eta_with(sys: &ReducedSystem, eta0: &[f64], t_end: f64, times: Option<&[f64]>, opts: &ReducedOptions) -> Result<Trajectory> {
    if eta0.len() != sys.n {
        return Err(invalid(format!("expected {} positions, got {}", sys.n, eta0.len())));
    }
    if eta0.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid("positions must be strictly decreasing"));
    }
    let threshold = opts.validity.unwrap_or_else(|| sys.default_validity());
    let check = threshold > 0.0 && sys.n >= 2;
    if check && min_gap(eta0) < threshold {
        return Err(Error::OutsideValidity { gap: min_gap(eta0), threshold, t: 0.0 });
    }
    let dopri = Dopri5Options::with_tol(opts.rtol, opts.atol);
    let mut out = Trajectory { times: vec![0.0], states: vec![eta0.to_vec()], breach: None };
    if let Some(ts) = times {
        out.times.clear();
        out.states.clear();
        for &t in ts.iter().filter(|&&t| t <= 0.0) {
            out.times.push(t);
            out.states.push(eta0.to_vec());
        }
    }
    let mut next = times.map(|ts| ts.iter().position(|&t| t > 0.0).unwrap_or(ts.len()));
    integrate(
        |_, y, dy| sys.rhs(y, dy),
        0.0,
        eta0,
        t_end,
        &dopri,
        |step| {
            let mut stop_at = None;
            if check && min_gap(&step.eval(step.t1())) < threshold {
                let t = step.find_root(|_, y| min_gap(y) - threshold, 1e-12 * step.t1().abs().max(1.0)).unwrap_or(step.t1());
                stop_at = Some(t);
            }
            let horizon = stop_at.unwrap_or(step.t1());
            match (times, next.as_mut()) {
                (Some(ts), Some(k)) => {
                    while *k < ts.len() && ts[*k] <= horizon {
                        out.times.push(ts[*k]);
                        out.states.push(step.eval(ts[*k]));
                        *k += 1;
                    }
                }
                _ => {
                    if stop_at.is_none() {
                        out.times.push(step.t1());
                        out.states.push(step.eval(step.t1()));
                    }
                }
            }
            if let Some(t) = stop_at {
                let y = step.eval(t);
                out.breach = Some(ValidityBreach { t, gap: min_gap(&y), threshold });
                if out.times.last() != Some(&t) {
                    out.times.push(t);
                    out.states.push(y);
                }
                return Control::Stop;
            }
            Control::Continue
        },
    )?;
    Ok(out)
}

pub fn integrate_eta(sys: &ReducedSystem, eta0: &[f64], t_end: f64) -> Result<Trajectory> {
    integrate_eta_with(sys, eta0, t_end, None, &ReducedOptions::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDistances {
    pub delta_tilde: Vec<f64>,
    pub epsilon: f64,
    pub g: Perturbation,
}

impl NormalizedDistances {
    pub fn unperturbed(delta_tilde: Vec<f64>) -> Self {
        Self { delta_tilde, epsilon: 0.5, g: Perturbation::Zero }
    }

    pub fn perturbed(delta_tilde: Vec<f64>, epsilon: f64, g: Perturbation) -> Self {
        Self { delta_tilde, epsilon, g }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_tilde.is_empty() {
            return Err(invalid("need at least one distance"));
        }
        if self.delta_tilde.iter().any(|d| !d.is_finite()) {
            return Err(invalid("distances must be finite"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        self.g.check(self.delta_tilde.len())
    }
}

/// Right-hand side of the normalized distance system.
pub fn normalized_rhs(epsilon: f64, g: &Perturbation, delta: &[f64], out: &mut [f64]) {
    let mut prev = 0.0;
    for (j, (o, d)) in out.iter_mut().zip(delta).enumerate() {
        let e = (-d).exp();
        *o = if j == 0 { e } else { e - prev };
        prev = e;
    }
    if !g.is_zero() {
        let dmin = delta.iter().copied().fold(f64::INFINITY, f64::min);
        let weight = (-(1.0 + epsilon) * dmin).exp();
        for (j, o) in out.iter_mut().enumerate() {
            *o += g.eval(j, delta) * weight;
        }
    }
}

/// Integrates the normalized distances and samples them at `times`.
pub fn integrate_normalized_at(nd: &NormalizedDistances, times: &[f64], opts: &Dopri5Options) -> Result<Trajectory> {
    nd.validate()?;
    let states = crate::ode::integrate_sampled(|_, y, dy| normalized_rhs(nd.epsilon, &nd.g, y, dy), 0.0, &nd.delta_tilde, times, opts)?;
    Ok(Trajectory { times: times.to_vec(), states, breach: None })
}

/// Integrates the normalized distances to `t_end`, recording every accepted step.
pub fn integrate_normalized(nd: &NormalizedDistances, t_end: f64) -> Result<Trajectory> {
    nd.validate()?;
    let opts = Dopri5Options::with_tol(1e-10, 1e-12);
    let mut out = Trajectory { times: vec![0.0], states: vec![nd.delta_tilde.clone()], breach: None };
    integrate(|_, y, dy| normalized_rhs(nd.epsilon, &nd.g, y, dy), 0.0, &nd.delta_tilde, t_end, &opts, |step| {
        out.times.push(step.t1());
        out.states.push(step.eval(step.t1()));
        Control::Continue
    })?;
    Ok(out)
}

/// Permutation sorting the entries in decreasing order.
pub fn ordering(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// True when `δ_N < … < δ_1` strictly.
pub fn is_strictly_ordered(delta: &[f64]) -> bool {
    delta.windows(2).all(|w| w[1] < w[0])
}

/// Distances over time, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    pub distances: Vec<Vec<f64>>,
}

impl DistanceSeries {
    pub fn from_positions(traj: &Trajectory) -> Self {
        Self { times: traj.times.clone(), distances: traj.gaps() }
    }

    pub fn from_track(track: &crate::positions::PositionTrack) -> Self {
        Self { times: track.times.clone(), distances: track.distances() }
    }

    /// Linear interpolation of distance `j` at time `t` (clamped to the sampled range).
    pub fn at(&self, j: usize, t: f64) -> f64 {
        let ts = &self.times;
        let k = ts.partition_point(|&s| s <= t);
        if k == 0 {
            return self.distances[0][j];
        }
        if k >= ts.len() {
            return self.distances[ts.len() - 1][j];
        }
        let (t0, t1) = (ts[k - 1], ts[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        (1.0 - w) * self.distances[k - 1][j] + w * self.distances[k][j]
    }
}

/// Fits `log(dδ/dt) = log A + rate·δ` for distance `j` over samples with
/// `δ ∈ [lo, hi]`; derivatives are secants over `stride` samples.
/// Returns `(rate, intercept, rms)` or `None` if too few usable samples.
pub fn fit_interaction_rate(series: &DistanceSeries, j: usize, window: (f64, f64), stride: usize) -> Option<(f64, f64, f64)> {
    let stride = stride.max(1);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let n = series.times.len();
    let mut k = 0;
    while k + stride < n {
        let (d0, d1) = (series.distances[k][j], series.distances[k + stride][j]);
        let slope = (d1 - d0) / (series.times[k + stride] - series.times[k]);
        let mid = 0.5 * (d0 + d1);
        if slope > 0.0 && d0 >= window.0 && d1 <= window.1 {
            xs.push(mid);
            ys.push(slope.ln());
        }
        k += stride;
    }
    (xs.len() >= 3).then(|| linear_fit(&xs, &ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Only samples where every PDE distance lies in this range are compared.
    pub gap_window: Option<(f64, f64)>,
    /// Secant stride (in samples) for the rate fit.
    pub rate_stride: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { gap_window: None, rate_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub samples: usize,
    /// Time span of the compared samples.
    pub window: Option<(f64, f64)>,
    /// `max |d_pde − d_ode| / d_pde` over compared samples and distances.
    pub max_relative_error: f64,
    /// Same, for the increments `d(t) − d(t_start)` relative to the PDE increment.
    pub max_relative_increment_error: f64,
    pub pde_rate: Option<f64>,
    pub ode_rate: Option<f64>,
    pub final_ordering_pde: Vec<usize>,
    pub final_ordering_ode: Vec<usize>,
    pub ordering_match: bool,
}

/// Compares PDE distances with the reduced-ODE distances at the PDE sample times.
pub fn compare_pde_ode(pde: &DistanceSeries, ode: &DistanceSeries, opts: &CompareOptions) -> ComparisonReport {
    let in_window = |row: &[f64]| match opts.gap_window {
        Some((lo, hi)) => row.iter().all(|&d| d >= lo && d <= hi),
        None => true,
    };
    let selected: Vec<usize> = (0..pde.times.len()).filter(|&k| !pde.distances[k].is_empty() && in_window(&pde.distances[k])).collect();
    let mut max_rel: f64 = 0.0;
    let mut max_inc: f64 = 0.0;
    if let Some(&k0) = selected.first() {
        let t0 = pde.times[k0];
        for &k in &selected {
            let t = pde.times[k];
            for (j, &dp) in pde.distances[k].iter().enumerate() {
                let d_ode = ode.at(j, t);
                max_rel = max_rel.max((dp - d_ode).abs() / dp.abs());
                let inc_p = dp - pde.distances[k0][j];
                let inc_o = d_ode - ode.at(j, t0);
                if inc_p.abs() > 1e-3 {
                    max_inc = max_inc.max((inc_p - inc_o).abs() / inc_p.abs());
                }
            }
        }
    }
    let window = selected.first().map(|&a| (pde.times[a], pde.times[*selected.last().unwrap()]));
    let rate_window = opts.gap_window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let has_distances = pde.distances.first().is_some_and(|r| !r.is_empty());
    let (pde_rate, ode_rate) = if has_distances {
        let sub = |s: &DistanceSeries| {
            let keep: Vec<usize> = match window {
                Some((a, b)) => (0..s.times.len()).filter(|&k| s.times[k] >= a && s.times[k] <= b).collect(),
                None => Vec::new(),
            };
            DistanceSeries { times: keep.iter().map(|&k| s.times[k]).collect(), distances: keep.iter().map(|&k| s.distances[k].clone()).collect() }
        };
        (
            fit_interaction_rate(&sub(pde), 0, rate_window, opts.rate_stride).map(|f| f.0),
            fit_interaction_rate(&sub(ode), 0, rate_window, opts.rate_stride).map(|f| f.0),
        )
    } else {
        (None, None)
    };
    let final_ordering_pde = pde.distances.last().map(|r| ordering(r)).unwrap_or_default();
    let t_last = pde.times.last().copied().unwrap_or(0.0);
    let ode_final: Vec<f64> = (0..final_ordering_pde.len()).map(|j| ode.at(j, t_last)).collect();
    let final_ordering_ode = ordering(&ode_final);
    ComparisonReport {
        samples: selected.len(),
        window,
        max_relative_error: max_rel,
        max_relative_increment_error: max_inc,
        pde_rate,
        ode_rate,
        ordering_match: final_ordering_pde == final_ordering_ode,
        final_ordering_pde,
        final_ordering_ode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sys(n: usize) -> ReducedSystem {
        // Constants of the f0 = 0.2 front, rounded.
        ReducedSystem::new(n, 3.56766, 4.18463, 0.913968, -1.072024).unwrap()
    }

    #[test]
    fn single_kink_does_not_move() {
        let tr = integrate_eta(&sys(1), &[2.5], 100.0).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 2.5));
    }

    #[test]
    fn two_kinks_repel_with_rate_mu() {
        let s = sys(2);
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 200.0).collect();
        let tr = integrate_eta_with(&s, &[6.0, -6.0], 8e4, Some(&times), &ReducedOptions::default()).unwrap();
        let series = DistanceSeries::from_positions(&tr);
        assert!(series.distances.windows(2).all(|w| w[1][0] > w[0][0]));
        let (rate, _, _) = fit_interaction_rate(&series, 0, (12.0, 14.0), 1).unwrap();
        assert!((rate + s.mu).abs() < 0.05 * s.mu, "rate {rate}");
        // Oracle: d log δ'/dδ for δ' = a_L e^{λδ} + a_R e^{−μδ} at mid-window.
        let d = 13.0;
        let r = s.a_l / s.a_r * ((s.lambda + s.mu) * d).exp();
        let local = (s.lambda * r - s.mu) / (1.0 + r);
        assert!((rate - local).abs() < 2e-3, "rate {rate} vs {local}");
    }

    #[test]
    fn translation_shifts_trajectory_exactly() {
        let s = sys(3);
        let times = [0.0, 100.0, 5000.0];
        let opts = ReducedOptions::default();
        let a = integrate_eta_with(&s, &[12.0, 0.0, -11.0], 5000.0, Some(&times), &opts).unwrap();
        let b = integrate_eta_with(&s, &[19.5, 7.5, -3.5], 5000.0, Some(&times), &opts).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in x.iter().zip(y) {
                assert_abs_diff_eq!(q - p, 7.5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn validity_breach_stops_integration() {
        // Remainder pulling the kinks together until the threshold is hit.
        let half = std::f64::consts::FRAC_PI_2;
        let g = Perturbation::Sinusoidal { amplitude: 1.0, omega: vec![0.0, 0.0], phase: vec![-half, half] };
        let s = sys(2).with_remainder(Remainder::Bounded { epsilon: -0.9, g });
        let tr = integrate_eta(&s, &[5.0, -5.0], 1e6).unwrap();
        let b = tr.breach.expect("breach");
        assert_abs_diff_eq!(b.gap, b.threshold, epsilon = 1e-8);
        assert_abs_diff_eq!(*tr.times.last().unwrap(), b.t);
        let err = integrate_eta(&sys(2), &[1.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::OutsideValidity { .. }));
    }

    #[test]
    fn closed_form_single_distance() {
        let nd = NormalizedDistances::unperturbed(vec![0.0]);
        let opts = Dopri5Options::with_tol(1e-12, 1e-14);
        let tr = integrate_normalized_at(&nd, &[1.0, 10.0, 1e4], &opts).unwrap();
        assert_abs_diff_eq!(tr.states[0][0], 2f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(tr.states[1][0], 11f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(tr.states[2][0], 10001f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn integrator_converges_at_fifth_order() {
        // Fixed steps via a loose tolerance are awkward with an adaptive method;
        // compare global errors at two tolerances instead and check the error
        // ratio against the step-count ratio.
        let nd = NormalizedDistances::unperturbed(vec![0.0]);
        let mut errs = Vec::new();
        let mut steps = Vec::new();
        for tol in [1e-6, 1e-9] {
            let opts = Dopri5Options::with_tol(tol, tol);
            let mut count = 0usize;
            let (_, y) = integrate(|_, y, dy| normalized_rhs(0.5, &Perturbation::Zero, y, dy), 0.0, &nd.delta_tilde, 50.0, &opts, |_| {
                count += 1;
                Control::Continue
            })
            .unwrap();
            errs.push((y[0] - 51f64.ln()).abs());
            steps.push(count as f64);
        }
        let order = (errs[0] / errs[1]).ln() / (steps[1] / steps[0]).ln();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn equal_distances_become_ordered() {
        let nd = NormalizedDistances::unperturbed(vec![2.0; 4]);
        let opts = Dopri5Options::default();
        let early = integrate_normalized_at(&nd, &[1e-3], &opts).unwrap();
        assert!(early.states[0][0] > 2.0);
        assert!((early.states[0][2] - 2.0).abs() < 1e-8);
        let late = integrate_normalized_at(&nd, &[1e3], &opts).unwrap();
        assert!(is_strictly_ordered(&late.states[0]), "{:?}", late.states[0]);
    }

    #[test]
    fn crossing_is_forward_invariant() {
        // δ̃₂ starts above δ̃₁; after they meet, δ̃₂ stays below.
        let nd = NormalizedDistances::unperturbed(vec![1.0, 3.0]);
        let tr = integrate_normalized(&nd, 1e3).unwrap();
        let meet = tr.states.iter().position(|s| s[1] <= s[0]).expect("meeting");
        assert!(tr.states[meet + 1..].iter().all(|s| s[1] < s[0]));
    }

    #[test]
    fn comparison_of_identical_inputs_is_exact() {
        let tr = integrate_eta(&sys(3), &[10.0, 0.0, -12.0], 1e4).unwrap();
        let s = DistanceSeries::from_positions(&tr);
        let r = compare_pde_ode(&s, &s, &CompareOptions::default());
        assert_eq!(r.max_relative_error, 0.0);
        assert!(r.ordering_match);
    }

    #[test]
    fn random_perturbation_is_bounded_and_deterministic() {
        let g = Perturbation::random(5, 1.0, 42);
        assert_eq!(g, Perturbation::random(5, 1.0, 42));
        assert_ne!(g, Perturbation::random(5, 1.0, 43));
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((0..5).all(|j| g.eval(j, &d).abs() <= 1.0));
    }

    proptest! {
        #[test]
        fn smallest_unperturbed_distance_grows(d in proptest::collection::vec(0.5f64..6.0, 1..7)) {
            let mut out = vec![0.0; d.len()];
            normalized_rhs(0.5, &Perturbation::Zero, &d, &mut out);
            let k = d.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            prop_assert!(out[k] >= 0.0);
            prop_assert!(out[0] > 0.0);
        }

        #[test]
        fn unperturbed_gaps_stay_bounded(d in proptest::collection::vec(1.0f64..5.0, 2..5)) {
            let nd = NormalizedDistances::unperturbed(d);
            let tr = integrate_normalized_at(&nd, &[1e3, 1e4, 1e5], &Dopri5Options::default()).unwrap();
            let spread = |s: &Vec<f64>| s.iter().copied().fold(f64::NEG_INFINITY, f64::max) - s.iter().copied().fold(f64::INFINITY, f64::min);
            let s = tr.states.iter().map(spread).collect::<Vec<_>>();
            prop_assert!(s[2] <= s[0] + 1.0);
        }
    }
}
