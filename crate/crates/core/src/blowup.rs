//! Polar blow-up of the normalized distance system.
//!
//! With `z_j = e^{−δ̃_j}` the distances obey
//! `z_j' = −z_j² + z_{j−1} z_j − g_j z_j z_max^{1+ε}` (`z_0 = 0`). Writing
//! `z = rΨ` with `‖Ψ‖ = 1` and dividing the field by `r` gives
//!
//! ```text
//! r'   = −rΣ − r^{1+ε} G
//! Ψ_j' = Ψ_j(Σ − Ψ_j + Ψ_{j−1}) − r^ε (g_j Ψ_j Ψ_max^{1+ε} − G Ψ_j)
//! ```
//!
//! where `Σ(Ψ) = Σ_k Ψ_k³ − Σ_{k≥2} Ψ_{k−1} Ψ_k²` and
//! `G = Σ_j g_j Ψ_j² Ψ_max^{1+ε}`.
//!
//! The angular field `F_j(Ψ) = Ψ_j(Σ(Ψ) − Ψ_j + Ψ_{j−1})` is defined on all of
//! `ℝ^N` and satisfies `⟨Ψ, F(Ψ)⟩ = Σ(Ψ)(‖Ψ‖² − 1)`. Hence the sphere is
//! invariant, every nonzero root of `F` lies on it, the tangent space at an
//! equilibrium is invariant under the Jacobian, and the transverse eigenvalue
//! there is `2Σ`.
//!
//! Eigenvalues are reported twice: as computed from the raw Jacobian, and
//! multiplied by `Σ(E)^{−3}`. At `E = (1, 2, …, N)/√β` with
//! `β = N(N+1)(2N+1)/6` the scaled values are `−kβ` (`k = 2..N`) and `2β`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ode::{integrate, Control, Dopri5Options};
use crate::reduced_ode::Perturbation;

/// Point of the blown-up space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r: f64,
    pub psi: Vec<f64>,
}

impl PolarState {
    pub fn new(r: f64, psi: Vec<f64>) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(invalid("radius must be nonnegative"));
        }
        if psi.is_empty() || psi.iter().any(|p| *p < 0.0) {
            return Err(invalid("angular part must be a nonempty, nonnegative vector"));
        }
        if (norm(&psi) - 1.0).abs() > 1e-12 {
            return Err(invalid("angular part must be a unit vector"));
        }
        Ok(Self { r, psi })
    }

    /// Blow-up of a point `z` with positive entries.
    pub fn from_cartesian(z: &[f64]) -> Result<Self> {
        let r = norm(z);
        if !(r > 0.0) {
            return Err(invalid("cannot blow up the origin"));
        }
        Self::new(r, z.iter().map(|v| v / r).collect())
    }

    pub fn to_cartesian(&self) -> Vec<f64> {
        self.psi.iter().map(|p| self.r * p).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Σ(Ψ) = Σ_k Ψ_k³ − Σ_{k≥2} Ψ_{k−1} Ψ_k²`.
pub fn sigma(psi: &[f64]) -> f64 {
    let mut s = 0.0;
    for (k, &p) in psi.iter().enumerate() {
        s += p * p * p;
        if k > 0 {
            s -= psi[k - 1] * p * p;
        }
    }
    s
}

/// Unperturbed angular field `F_j = Ψ_j(Σ − Ψ_j + Ψ_{j−1})`.
pub fn angular_field(psi: &[f64]) -> Vec<f64> {
    let s = sigma(psi);
    psi.iter()
        .enumerate()
        .map(|(j, &p)| {
            let prev = if j > 0 { psi[j - 1] } else { 0.0 };
            p * (s - p + prev)
        })
        .collect()
}

/// Settings for the perturbation terms of the polar field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarPerturbation {
    pub epsilon: f64,
    pub g: Perturbation,
}

/// Desingularized polar field. `perturbation = None` gives the unperturbed
/// system; otherwise `g` is evaluated at `δ̃_j = −ln(rΨ_j)` as in the
/// Cartesian system. Returns `(r', Ψ')`.
pub fn vector_field_polar(state: &PolarState, perturbation: Option<&PolarPerturbation>) -> (f64, Vec<f64>) {
    let psi = &state.psi;
    let r = state.r;
    let s = sigma(psi);
    let mut dpsi = angular_field(psi);
    let mut dr = -r * s;
    if let Some(p) = perturbation {
        if r > 0.0 && !p.g.is_zero() {
            let eps = p.epsilon;
            let pmax = psi.iter().copied().fold(0.0, f64::max);
            let weight = pmax.powf(1.0 + eps);
            let delta: Vec<f64> = psi.iter().map(|&q| if q > 0.0 { -(r * q).ln() } else { f64::INFINITY }).collect();
            let gs: Vec<f64> = (0..psi.len()).map(|j| if psi[j] > 0.0 { p.g.eval(j, &delta) } else { 0.0 }).collect();
            let big_g: f64 = gs.iter().zip(psi).map(|(g, q)| g * q * q * weight).sum();
            let re = r.powf(eps);
            for ((d, g), q) in dpsi.iter_mut().zip(&gs).zip(psi) {
                *d -= re * (g * q * weight - big_g * q);
            }
            dr -= r.powf(1.0 + eps) * big_g;
        }
    }
    (dr, dpsi)
}

/// Cartesian field `z_j' = −z_j² + z_{j−1} z_j − g_j z_j z_max^{1+ε}` with
/// `g` evaluated at `δ̃ = −ln z`.
pub fn cartesian_field(z: &[f64], perturbation: Option<&PolarPerturbation>) -> Vec<f64> {
    let zmax = z.iter().copied().fold(0.0, f64::max);
    let mut out: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let prev = if j > 0 { z[j - 1] } else { 0.0 };
            -v * v + prev * v
        })
        .collect();
    if let Some(p) = perturbation {
        let delta: Vec<f64> = z.iter().map(|v| -v.ln()).collect();
        let w = zmax.powf(1.0 + p.epsilon);
        for (j, o) in out.iter_mut().enumerate() {
            *o -= p.g.eval(j, &delta) * z[j] * w;
        }
    }
    out
}

/// Analytic Jacobian of the angular field on `ℝ^N`.
pub fn angular_jacobian(psi: &[f64]) -> DMatrix<f64> {
    let n = psi.len();
    let s = sigma(psi);
    let dsigma: Vec<f64> = (0..n)
        .map(|i| {
            let mut d = 3.0 * psi[i] * psi[i];
            if i + 1 < n {
                d -= psi[i + 1] * psi[i + 1];
            }
            if i > 0 {
                d -= 2.0 * psi[i - 1] * psi[i];
            }
            d
        })
        .collect();
    DMatrix::from_fn(n, n, |j, i| {
        let prev = if j > 0 { psi[j - 1] } else { 0.0 };
        let mut v = psi[j] * dsigma[i];
        if i == j {
            v += s - psi[j] + prev - psi[j];
        }
        if j > 0 && i == j - 1 {
            v += psi[j];
        }
        v
    })
}

/// Central-difference Jacobian of the angular field.
pub fn angular_jacobian_fd(psi: &[f64], step: f64) -> DMatrix<f64> {
    let n = psi.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut a = psi.to_vec();
        let mut b = psi.to_vec();
        a[i] += step;
        b[i] -= step;
        let (fa, fb) = (angular_field(&a), angular_field(&b));
        for j in 0..n {
            m[(j, i)] = (fa[j] - fb[j]) / (2.0 * step);
        }
    }
    m
}

/// Orthonormal basis (as columns) of the complement of `psi`, by
/// Gram–Schmidt on `spanning` after removing the `psi` component.
fn complement_basis(psi: &[f64], spanning: &[Vec<f64>]) -> DMatrix<f64> {
    let n = psi.len();
    let p = DVector::from_column_slice(psi).normalize();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for v in spanning {
        let mut w = DVector::from_column_slice(v);
        w -= &p * p.dot(&w);
        for c in &cols {
            w -= c * c.dot(&w);
        }
        let nw = w.norm();
        if nw > 1e-8 {
            cols.push(w / nw);
        }
        if cols.len() + 1 == n {
            break;
        }
    }
    DMatrix::from_columns(&cols)
}

fn standard_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Tangential block `WᵀJW` and transverse value `ΨᵀJΨ` at `psi`.
fn split_spectrum(psi: &[f64], jac: &DMatrix<f64>, spanning: &[Vec<f64>]) -> (DMatrix<f64>, f64) {
    let p = DVector::from_column_slice(psi);
    let transverse = p.dot(&(jac * &p));
    if psi.len() == 1 {
        return (DMatrix::zeros(0, 0), transverse);
    }
    let w = complement_basis(psi, spanning);
    (w.transpose() * jac * &w, transverse)
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    ev
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub psi: Vec<f64>,
    /// Bit `j` set when `Ψ_{j+1} ≠ 0`.
    pub zero_pattern: u32,
    pub sigma: f64,
    /// Max-norm of the angular field at `psi`.
    pub residual: f64,
    /// Raw tangential eigenvalues, sorted by decreasing real part.
    pub eigenvalues: Vec<Complex64>,
    /// Raw transverse eigenvalue `2Σ`.
    pub transverse: f64,
}

/// Chain vector of a zero pattern: nonzero runs read `1, 2, 3, …`, restarting after each zero.
pub fn chain_vector(n: usize, pattern: u32) -> Vec<f64> {
    let mut v = vec![0.0; n];
    let mut run = 0.0;
    for (j, vj) in v.iter_mut().enumerate() {
        if pattern & (1 << j) != 0 {
            run += 1.0;
            *vj = run;
        } else {
            run = 0.0;
        }
    }
    v
}

/// Solves `σ³ Σ(v) = σ` for the positive scale `σ` by bisection on `[0, 1/max v]`.
/// For chain vectors `Σ(v) = ‖v‖²`, so `σ = 1/‖v‖` and `σv` is a unit vector.
fn chain_scale(v: &[f64]) -> f64 {
    let s = sigma(v);
    let vmax = v.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, 1.0 / vmax);
    // q(σ) = σ² Σ(v) − 1 is increasing on σ > 0.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid * s - 1.0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn equilibrium_point(psi: Vec<f64>, pattern: u32, with_eigen: bool) -> EquilibriumPoint {
    let residual = angular_field(&psi).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s = sigma(&psi);
    let (eigenvalues, transverse) = if with_eigen {
        let jac = angular_jacobian(&psi);
        let (t, tr) = split_spectrum(&psi, &jac, &standard_basis(psi.len()));
        (sorted_eigenvalues(&t), tr)
    } else {
        (Vec::new(), 2.0 * s)
    };
    EquilibriumPoint { psi, zero_pattern: pattern, sigma: s, residual, eigenvalues, transverse }
}

/// Every equilibrium of the angular field on the sphere, `2(2^N − 1)` in
/// total, ordered by pattern with the positive member of each pair first.
pub fn enumerate_equilibria_with(n: usize, with_eigen: bool) -> Result<Vec<EquilibriumPoint>> {
    if !(1..=12).contains(&n) {
        return Err(invalid(format!("N must lie in 1..=12 (got {n})")));
    }
    let mut out = Vec::with_capacity(2 * ((1usize << n) - 1));
    for pattern in 1u32..(1u32 << n) {
        let v = chain_vector(n, pattern);
        let scale = chain_scale(&v);
        let plus: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let minus: Vec<f64> = plus.iter().map(|x| -x).collect();
        out.push(equilibrium_point(plus, pattern, with_eigen));
        out.push(equilibrium_point(minus, pattern, with_eigen));
    }
    Ok(out)
}

pub fn enumerate_equilibria(n: usize) -> Result<Vec<EquilibriumPoint>> {
    enumerate_equilibria_with(n, true)
}

/// `β(N) = N(N+1)(2N+1)/6 = ‖(1, …, N)‖²`.
pub fn beta(n: usize) -> f64 {
    let n = n as f64;
    n * (n + 1.0) * (2.0 * n + 1.0) / 6.0
}

/// The interior equilibrium `E = (1, 2, …, N)/√β`.
pub fn equilibrium_e(n: usize) -> Vec<f64> {
    let s = beta(n).sqrt();
    (1..=n).map(|k| k as f64 / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub n: usize,
    /// Tangential eigenvalues times `Σ(E)^{−3}`, sorted by decreasing real part.
    pub tangential: Vec<Complex64>,
    /// Transverse eigenvalue times `Σ(E)^{−3}`.
    pub transverse: f64,
    pub raw_tangential: Vec<Complex64>,
    pub raw_transverse: f64,
    /// `Σ(E)^{−3} = β^{3/2}`.
    pub scale: f64,
}

/// Spectrum of the angular linearization at `E`, projected onto the tangent
/// space spanned by Gram–Schmidt on `v_j = j e_1 − e_j`, `j = 2..N`.
pub fn eigenvalues_at_e(n: usize) -> Result<EigenReport> {
    if n < 2 {
        return Err(invalid("eigenvalues at E need N ≥ 2"));
    }
    let e = equilibrium_e(n);
    let jac = angular_jacobian(&e);
    let spanning: Vec<Vec<f64>> = (2..=n)
        .map(|j| {
            let mut v = vec![0.0; n];
            v[0] = j as f64;
            v[j - 1] = -1.0;
            v
        })
        .collect();
    let (t, raw_transverse) = split_spectrum(&e, &jac, &spanning);
    let raw_tangential = sorted_eigenvalues(&t);
    let scale = sigma(&e).powi(-3);
    Ok(EigenReport {
        n,
        tangential: raw_tangential.iter().map(|z| z * scale).collect(),
        transverse: raw_transverse * scale,
        raw_tangential,
        raw_transverse,
        scale,
    })
}

/// Tangential block of the Jacobian at `E` (raw scale), for cross-checks.
pub fn tangential_block_at_e(n: usize) -> DMatrix<f64> {
    let e = equilibrium_e(n);
    let jac = angular_jacobian(&e);
    split_spectrum(&e, &jac, &standard_basis(n)).0
}

/// Characteristic polynomial coefficients `[1, c_1, …, c_m]` of
/// `det(λI − A) = λ^m + c_1 λ^{m−1} + … + c_m` by Faddeev–LeVerrier.
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(m, m);
    for k in 1..=m {
        mk = a * &mk + DMatrix::identity(m, m) * coeffs[k - 1];
        let am = a * &mk;
        coeffs.push(-am.trace() / k as f64);
    }
    coeffs
}

/// Roots of a monic polynomial `[1, c_1, …, c_m]` by Durand–Kerner iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let m = coeffs.len() - 1;
    if m == 0 {
        return Vec::new();
    }
    let bound = 1.0 + coeffs[1..].iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..m).map(|k| seed.powu(k as u32) * bound).collect();
    let eval = |x: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c);
    for _ in 0..2000 {
        let mut change: f64 = 0.0;
        for i in 0..m {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..m {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let delta = eval(z[i]) / denom;
            z[i] -= delta;
            change = change.max(delta.norm() / z[i].norm().max(1.0));
        }
        if change < 1e-15 {
            break;
        }
    }
    z.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub n: usize,
    pub starts: usize,
    /// Distinct nonzero roots reached by Newton from the start mesh.
    pub found: Vec<Vec<f64>>,
    /// Found roots that are not in the enumerated list.
    pub missing: Vec<Vec<f64>>,
}

/// Newton from a mesh of start points on the closed positive orthant of the
/// sphere (`per_axis` levels per coordinate), collecting nonzero roots of the
/// angular field and checking each against [`enumerate_equilibria`].
pub fn brute_force_census(n: usize, per_axis: usize) -> Result<CensusReport> {
    let listed = enumerate_equilibria_with(n, false)?;
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut starts = 0;
    let levels = per_axis.max(2);
    let total = levels.pow(n as u32);
    for idx in 0..total {
        let mut x: Vec<f64> = (0..n).map(|k| ((idx / levels.pow(k as u32)) % levels) as f64 / (levels - 1) as f64).collect();
        let nx = norm(&x);
        if nx == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        starts += 1;
        if let Some(root) = newton_root(&x) {
            if norm(&root) > 0.5 && !found.iter().any(|f| dist(f, &root) < 1e-7) {
                found.push(root);
            }
        }
    }
    let missing = found.iter().filter(|f| !listed.iter().any(|e| dist(&e.psi, f) < 1e-7)).cloned().collect();
    Ok(CensusReport { n, starts, found, missing })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn newton_root(x0: &[f64]) -> Option<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    for _ in 0..100 {
        let f = DVector::from_vec(angular_field(x.as_slice()));
        if f.amax() < 1e-13 {
            return Some(x.as_slice().to_vec());
        }
        let step = angular_jacobian(x.as_slice()).lu().solve(&f)?;
        // Damp long steps; the field is cubic.
        let s = step.norm();
        let damp = if s > 0.5 { 0.5 / s } else { 1.0 };
        x -= step * damp;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Integrates the unperturbed angular flow from `psi0` to `t_end`, using the
/// field projected onto the tangent space so round-off does not leave the
/// sphere, and renormalizes the result.
pub fn integrate_angular(psi0: &[f64], t_end: f64) -> Result<Vec<f64>> {
    let opts = Dopri5Options::with_tol(1e-12, 1e-14);
    let (_, y) = integrate(
        |_, y, dy| {
            let f = angular_field(y);
            let radial: f64 = f.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / y.iter().map(|v| v * v).sum::<f64>();
            for ((d, fj), yj) in dy.iter_mut().zip(&f).zip(y) {
                *d = fj - radial * yj;
            }
        },
        0.0,
        psi0,
        t_end,
        &opts,
        |_| Control::Continue,
    )?;
    let ny = norm(&y);
    Ok(y.into_iter().map(|v| v / ny).collect())
}
