//! The same stationary momentum from two directions: Gauss–Newton on the
//! gradient conditions of J̄, and shooting on p̄_T = ∇ψ(x̄_T).

use nalgebra::DVector;
use stataction::model::{FieldSpec, MatrixSpec, ProblemDoc};
use stataction::*;

fn main() -> Result<()> {
    let spec = ProblemSpec::from_doc(&ProblemDoc {
        dim: 1,
        potential: FieldSpec::DoubleWell { a: 0.3, b: 1.0 },
        inertia: MatrixSpec::Scalar(2.0),
        terminal: FieldSpec::Quadratic {
            stiffness: MatrixSpec::Scalar(0.4),
            linear: Some(vec![-0.5]),
            constant: 0.0,
        },
        t0: 0.0,
        t_final: 0.8,
        hessian_bound: None,
    })?;
    let cfg = NewtonConfig::default();
    let x = DVector::from_element(1, 0.6);
    let seed = DVector::zeros(1);

    let a = solve_argstat_p(&spec, 0.0, &x, &seed, &cfg)?;
    let s = solve_tpbvp_shooting(&spec, 0.0, spec.t_final, &x, &seed, &cfg)?;
    for r in [&a, &s] {
        println!(
            "{:?}: p* = {:.12}, J̄ = {:.12}, |∇_p J̄| = {:.1e}, |p − ∇_x J̄| = {:.1e}, terminal defect = {:.1e}, σ_min = {:.3}",
            r.method, r.p_star[0], r.value, r.residual_gradp, r.residual_fixedpoint, r.residual_terminal, r.jacobian_sigma_min
        );
    }
    println!(
        "Û²¹: σ_min = {:?}, condition = {:?}",
        s.u_hat_sigma_min, s.u_hat_condition
    );
    Ok(())
}
