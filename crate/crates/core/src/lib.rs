//! Kink and antikink dynamics for the excitable theta equation
//! `u_t = u_xx + f(u)` with `f(u) = cos(u + theta0) + f0`.
//!
//! The crate is split along the computational pipeline:
//!
//! * [`nonlinearity`]: the cosine reaction term and its primitive.
//! * [`front`]: single traveling kink (speed, profile, tails, interaction coefficients).
//! * [`pde`]: IMEX finite-difference evolution of the lifted phase.
//! * [`positions`]: level-crossing positions, tracks, collision events, analytic positions.
//! * [`reduced_ode`]: reduced kink-position and normalized distance systems.
//! * [`blowup`]: polar blow-up of the distance system, equilibria and their spectra.
//! * [`pbvp`]: periodic traveling waves on a bounded interval.
//! * [`ghca`]: Greenberg-Hastings automaton used as a discrete reference.
//!
//! [`ode`] and [`linalg`] hold the shared numerical kernels.

pub mod blowup;
pub mod error;
pub mod front;
pub mod ghca;
pub mod linalg;
pub mod nonlinearity;
pub mod ode;
pub mod pbvp;
pub mod pde;
pub mod positions;
pub mod reduced_ode;

pub use error::{Error, Result};
pub use nonlinearity::Nonlinearity;
