//! Dormand-Prince 5(4) integrator with step-size control and the
//! fourth-order continuous extension of Hairer, Nørsett and Wanner.
//!
//! Integration runs forward or backward in time; the sign of `t_end - t0`
//! decides the direction. Every accepted step is handed to a callback as a
//! [`DenseStep`] so callers can sample output or locate events.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: None, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

impl Dopri5Options {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

/// Callback verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Interpolation data for one accepted step on `[t0, t0 + h]`.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> &[f64] {
        &self.rcont[0]
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rcont[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    /// Locates a sign change of `g` inside this step by bisection on the
    /// interpolant. Returns `None` when `g` has the same sign at both ends.
    pub fn find_root<G: Fn(f64, &[f64]) -> f64>(&self, g: G, tol: f64) -> Option<f64> {
        let mut a = self.t0;
        let mut b = self.t1();
        let ga = g(a, &self.eval(a));
        let gb = g(b, &self.eval(b));
        if ga == 0.0 {
            return Some(a);
        }
        if ga * gb > 0.0 {
            return None;
        }
        let mut fa = ga;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let gm = g(m, &self.eval(m));
            if gm == 0.0 {
                return Some(m);
            }
            if fa * gm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = gm;
            }
            if (b - a).abs() <= tol {
                break;
            }
        }
        Some(0.5 * (a + b))
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`.
///
/// `on_step` sees every accepted step; returning [`Control::Stop`] ends the
/// integration early. The state at the final time reached is returned.
pub fn integrate<F, S>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &Dopri5Options,
    mut on_step: S,
) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(&DenseStep) -> Control,
{
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(invalid("tolerances must be positive"));
    }
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0.to_vec();
    if span == 0.0 {
        return Ok((t, y));
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    rhs(t, &y, &mut k1);

    let mut h = match opts.h_init {
        Some(h0) => h0.abs().min(span),
        None => initial_step(&mut rhs, t, &y, &k1, dir, opts).min(span),
    };
    h = h.min(opts.h_max);
    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::NoConvergence { method: "dopri5", detail: format!("step budget exhausted at t = {t}") });
        }
        let remaining = (t_end - t) * dir;
        if remaining <= 1e-14 * span.max(t.abs()) {
            break;
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < 1e-15 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
        let hs = h * dir;
        steps += 1;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + hs, &ynew, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            rejected_last = true;
            continue;
        }

        // PI step-size controller (beta = 0.04) as in the reference dopri5.
        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let mut fac = fac11 / fac_old.powf(0.04);
        fac = (fac / 0.9).clamp(0.1, 5.0);
        let mut h_new = h / fac;

        if err <= 1.0 {
            fac_old = err.max(1e-4);
            let mut rc2 = vec![0.0; n];
            let mut rc3 = vec![0.0; n];
            let mut rc4 = vec![0.0; n];
            let mut rc5 = vec![0.0; n];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rc2[i] = ydiff;
                rc3[i] = bspl;
                rc4[i] = ydiff - hs * k7[i] - bspl;
                rc5[i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { t0: t, h: hs, rcont: [y.clone(), rc2, rc3, rc4, rc5] };
            t = if last { t_end } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dopri5 state"));
            }
            if on_step(&step) == Control::Stop || last {
                break;
            }
            if rejected_last {
                h_new = h_new.min(h);
            }
            rejected_last = false;
            h = h_new.min(opts.h_max);
        } else {
            h_new = h / (fac11 / 0.9).min(5.0);
            rejected_last = true;
            h = h_new;
        }
    }
    Ok((t, y))
}

fn initial_step<F>(rhs: &mut F, t: f64, y: &[f64], f0: &[f64], dir: f64, opts: &Dopri5Options) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(v, d)| v + dir * h0 * d).collect();
    let mut f1 = vec![0.0; n];
    rhs(t + dir * h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(opts.h_max)
}

/// Integrates and samples the solution at the given output times, which must
/// be monotone in the integration direction and lie within `[t0, t_end]`.
pub fn integrate_sampled<F>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    times: &[f64],
    opts: &Dopri5Options,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let Some(&t_end) = times.last() else {
        return Ok(Vec::new());
    };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    while idx < times.len() && (times[idx] - t0) * dir <= 0.0 {
        out.push(y0.to_vec());
        idx += 1;
    }
    let (_, y_final) = integrate(rhs, t0, y0, t_end, opts, |step| {
        while idx < times.len() && (times[idx] - step.t1()) * dir <= 0.0 {
            out.push(step.eval(times[idx]));
            idx += 1;
        }
        Control::Continue
    })?;
    while out.len() < times.len() {
        out.push(y_final.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_decay_forward_and_backward() {
        let opts = Dopri5Options::with_tol(1e-12, 1e-14);
        let (t, y) = integrate(|_, y, d| d[0] = -y[0], 0.0, &[1.0], 5.0, &opts, |_| Control::Continue).unwrap();
        assert_eq!(t, 5.0);
        assert_abs_diff_eq!(y[0], (-5.0f64).exp(), epsilon = 1e-11);
        let (t, y) = integrate(|_, y, d| d[0] = -y[0], 5.0, &[(-5.0f64).exp()], 0.0, &opts, |_| Control::Continue).unwrap();
        assert_eq!(t, 0.0);
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let opts = Dopri5Options::with_tol(1e-10, 1e-12);
        let mut worst: f64 = 0.0;
        integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            10.0,
            &opts,
            |step| {
                for k in 1..10 {
                    let t = step.t0 + step.h * k as f64 / 10.0;
                    let v = step.eval(t);
                    worst = worst.max((v[0] - t.sin()).abs()).max((v[1] - t.cos()).abs());
                }
                Control::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn sampled_output_and_root_finding() {
        let opts = Dopri5Options::default();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
        let ys = integrate_sampled(|_, y, d| d[0] = y[0], 0.0, &[1.0], &times, &opts).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert_abs_diff_eq!(y[0], t.exp(), epsilon = 1e-8 * t.exp());
        }
        let mut root = None;
        integrate(|_, _, d| d[0] = 1.0, 0.0, &[0.0], 3.0, &opts, |step| {
            if let Some(r) = step.find_root(|_, y| y[0] - 2.0, 1e-13) {
                root = Some(r);
                return Control::Stop;
            }
            Control::Continue
        })
        .unwrap();
        assert_abs_diff_eq!(root.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fifth_order_convergence_with_fixed_steps() {
        // Steps are pinned by h_max with a loose tolerance so the
        // controller never rejects: the error then scales like h^5.
        let run = |h: f64| {
            let opts = Dopri5Options { rtol: 1.0, atol: 1.0, h_init: Some(h), h_max: h, max_steps: 1_000_000 };
            let (_, y) = integrate(|t, y, d| d[0] = y[0] * t.cos(), 0.0, &[1.0], 2.0, &opts, |_| Control::Continue).unwrap();
            (y[0] - (2.0f64).sin().exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
    }
}
