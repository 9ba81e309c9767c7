//! The excitable cosine nonlinearity `f(θ) = cos(θ + Θ0) + f0`.
//!
//! `Θ0 = arccos(-f0)` is derived from `f0` so that `f(0) = 0` with `f'(0) < 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNonlinearity", into = "RawNonlinearity")]
pub struct Nonlinearity {
    f0: f64,
    theta0: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNonlinearity {
    f0: f64,
}

impl TryFrom<RawNonlinearity> for Nonlinearity {
    type Error = crate::Error;
    fn try_from(raw: RawNonlinearity) -> Result<Self> {
        Nonlinearity::new(raw.f0)
    }
}

impl From<Nonlinearity> for RawNonlinearity {
    fn from(nl: Nonlinearity) -> Self {
        RawNonlinearity { f0: nl.f0 }
    }
}

/// Builds the nonlinearity for `f0 ∈ (0, 1)`.
pub fn make_nonlinearity(f0: f64) -> Result<Nonlinearity> {
    Nonlinearity::new(f0)
}

impl Nonlinearity {
    pub fn new(f0: f64) -> Result<Self> {
        if !(f0 > 0.0 && f0 < 1.0) {
            return Err(invalid(format!("f0 must lie in (0, 1), got {f0}")));
        }
        Ok(Self { f0, theta0: (-f0).acos() })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    #[inline]
    pub fn f(&self, theta: f64) -> f64 {
        (theta + self.theta0).cos() + self.f0
    }

    #[inline]
    pub fn f_prime(&self, theta: f64) -> f64 {
        -(theta + self.theta0).sin()
    }

    /// Primitive of `f`, normalized by `F(0) = 0`.
    #[inline]
    pub fn big_f(&self, theta: f64) -> f64 {
        (theta + self.theta0).sin() - self.theta0.sin() + self.f0 * theta
    }

    /// The unstable zero of `f` inside `(0, 2π)`.
    pub fn unstable_zero(&self) -> f64 {
        2.0 * PI - 2.0 * self.theta0
    }

    /// `sup |f'|`, which bounds the explicit reaction step.
    pub fn lipschitz(&self) -> f64 {
        1.0
    }
}

pub fn eval_f(nl: &Nonlinearity, theta: f64) -> f64 {
    nl.f(theta)
}

pub fn eval_f_prime(nl: &Nonlinearity, theta: f64) -> f64 {
    nl.f_prime(theta)
}

#[allow(non_snake_case)]
pub fn eval_F(nl: &Nonlinearity, theta: f64) -> f64 {
    nl.big_f(theta)
}
