//! Stationary-action solver for second-order Hamiltonian systems.
//!
//! The stationary action J_T(t, x, u) over velocity trajectories is replaced
//! by an equivalent cost J̄_T(t, x, p) over initial momenta, evaluated by
//! integrating the characteristic system forward and its adjoint backward.
//! Stationary momenta are found by Gauss–Newton ([`stationary`]) and
//! cross-checked against the classical two-point boundary value problem and
//! the closed-form mass–spring solution ([`massspring`]).

// `!(x > 0.0)` is how tolerances reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod flow;
pub mod massspring;
pub mod model;
mod ode;
pub mod quadrature;
pub mod stationary;
pub mod variational;

pub use error::{Error, Result};
pub use flow::{integrate_cauchy, integrate_terminal, IntegratorConfig, PhasePoint, PhaseTrajectory};
pub use massspring::MassSpringParams;
pub use model::{InertiaOperator, PotentialField, ProblemSpec, TerminalCost};
pub use ode::SchemeKind;
pub use stationary::{solve_argstat_p, solve_tpbvp_shooting, Classification, NewtonConfig, StationaryResult};
pub use variational::{cost_gradient, integrate_fvp, propagate_tangent};
