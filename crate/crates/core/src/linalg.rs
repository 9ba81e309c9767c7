//! Banded and dense linear-algebra kernels shared by the PDE and BVP solvers.

use crate::error::{invalid, Result};

/// Tridiagonal matrix with sub-diagonal `a[1..n]`, diagonal `b`, super-diagonal `c[0..n-1]`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(n: usize) -> Self {
        Self { a: vec![0.0; n], b: vec![0.0; n], c: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.b[i] * x[i];
            if i > 0 {
                v += self.a[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.c[i] * x[i + 1];
            }
            out[i] = v;
        }
    }
}

/// LU factors of a tridiagonal matrix for repeated solves (Thomas algorithm).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    a: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl TridiagonalLu {
    pub fn factor(m: &Tridiagonal) -> Result<Self> {
        let n = m.len();
        if n == 0 {
            return Err(invalid("empty tridiagonal system"));
        }
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let sub = if i > 0 { m.a[i] } else { 0.0 };
            let denom = m.b[i] - sub * prev_c;
            if denom.abs() < 1e-300 || !denom.is_finite() {
                return Err(invalid("singular tridiagonal system"));
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = if i + 1 < n { m.c[i] * inv_denom[i] } else { 0.0 };
            prev_c = c_prime[i];
        }
        Ok(Self { a: m.a.clone(), c_prime, inv_denom })
    }

    pub fn solve_in_place(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv_denom[0];
        for i in 1..n {
            d[i] = (d[i] - self.a[i] * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c_prime[i] * d[i + 1];
        }
    }
}

/// Cyclic tridiagonal system: a tridiagonal matrix plus corner entries
/// `alpha = M[n-1][0]` and `beta = M[0][n-1]`, solved by Sherman-Morrison.
#[derive(Debug, Clone)]
pub struct CyclicLu {
    lu: TridiagonalLu,
    z: Vec<f64>,
    gamma: f64,
    beta: f64,
}

impl CyclicLu {
    pub fn factor(m: &Tridiagonal, alpha: f64, beta: f64) -> Result<Self> {
        let n = m.len();
        if n < 3 {
            return Err(invalid("cyclic system needs at least 3 unknowns"));
        }
        let gamma = -m.b[0];
        let mut modified = m.clone();
        modified.b[0] -= gamma;
        modified.b[n - 1] -= alpha * beta / gamma;
        let lu = TridiagonalLu::factor(&modified)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        lu.solve_in_place(&mut u);
        Ok(Self { lu, z: u, gamma, beta })
    }

    pub fn solve_in_place(&self, d: &mut [f64]) {
        let n = d.len();
        self.lu.solve_in_place(d);
        let v0 = 1.0;
        let vn = self.beta / self.gamma;
        let num = v0 * d[0] + vn * d[n - 1];
        let den = 1.0 + v0 * self.z[0] + vn * self.z[n - 1];
        let fact = num / den;
        for i in 0..n {
            d[i] -= fact * self.z[i];
        }
    }
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Least-squares line `y = slope * x + intercept`; returns `(slope, intercept, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_diag_dominant(n: usize, seed: &[f64]) -> Tridiagonal {
        let mut m = Tridiagonal::new(n);
        for i in 0..n {
            let s = seed[i % seed.len()];
            m.a[i] = if i > 0 { -0.5 + 0.3 * s } else { 0.0 };
            m.c[i] = if i + 1 < n { -0.7 + 0.2 * s } else { 0.0 };
            m.b[i] = 2.5 + s;
        }
        m
    }

    #[test]
    fn thomas_solves_small_system() {
        let mut m = Tridiagonal::new(3);
        m.b = vec![2.0, 2.0, 2.0];
        m.a = vec![0.0, -1.0, -1.0];
        m.c = vec![-1.0, -1.0, 0.0];
        let mut d = vec![1.0, 0.0, 1.0];
        TridiagonalLu::factor(&m).unwrap().solve_in_place(&mut d);
        for v in d {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let h = 0.1;
        let v: Vec<f64> = (0..=10).map(|k| 3.0 * k as f64 * h + 1.0).collect();
        assert_abs_diff_eq!(trapezoid(&v, h), 1.5 + 1.0, epsilon = 1e-13);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -0.7 * v + 2.0).collect();
        let (s, i, r) = linear_fit(&x, &y);
        assert_abs_diff_eq!(s, -0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(i, 2.0, epsilon = 1e-12);
        assert!(r < 1e-12);
    }

    proptest! {
        #[test]
        fn thomas_residual_small(seed in proptest::collection::vec(0.0f64..1.0, 5..40)) {
            let n = seed.len();
            let m = random_diag_dominant(n, &seed);
            let rhs: Vec<f64> = seed.iter().map(|s| s * 3.0 - 1.0).collect();
            let mut x = rhs.clone();
            TridiagonalLu::factor(&m).unwrap().solve_in_place(&mut x);
            let mut back = vec![0.0; n];
            m.mul_vec(&x, &mut back);
            for (u, v) in back.iter().zip(&rhs) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn cyclic_residual_small(seed in proptest::collection::vec(0.0f64..1.0, 3..40), alpha in -0.8f64..0.8, beta in -0.8f64..0.8) {
            let n = seed.len();
            let m = random_diag_dominant(n, &seed);
            let rhs: Vec<f64> = seed.iter().map(|s| 1.0 - 2.0 * s).collect();
            let mut x = rhs.clone();
            CyclicLu::factor(&m, alpha, beta).unwrap().solve_in_place(&mut x);
            let mut back = vec![0.0; n];
            m.mul_vec(&x, &mut back);
            back[n - 1] += alpha * x[0];
            back[0] += beta * x[n - 1];
            for (u, v) in back.iter().zip(&rhs) {
                prop_assert!((u - v).abs() < 1e-11);
            }
        }
    }
}
