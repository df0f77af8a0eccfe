//! ∇J̄ three ways on a double well: the backward adjoint, the forward
//! tangent flow, and central finite differences.

use nalgebra::DVector;
use stataction::model::{FieldSpec, MatrixSpec, ProblemDoc};
use stataction::variational::{fd_cost_gradient, grad_cost_full, second_order_check};
use stataction::*;

fn main() -> Result<()> {
    let spec = ProblemSpec::from_doc(&ProblemDoc {
        dim: 1,
        potential: FieldSpec::DoubleWell { a: 0.25, b: 1.0 },
        inertia: MatrixSpec::Scalar(1.0),
        terminal: FieldSpec::Quadratic {
            stiffness: MatrixSpec::Scalar(0.5),
            linear: Some(vec![0.3]),
            constant: 0.0,
        },
        t0: 0.0,
        t_final: 2.0,
        hessian_bound: None,
    })?;
    let cfg = IntegratorConfig::default();
    let (x, p) = (DVector::from_element(1, 0.4), DVector::from_element(1, -0.8));

    let traj = integrate_cauchy(&spec, 0.0, 2.0, &x, &p, &cfg)?;
    let adj = integrate_fvp(&spec, &traj)?;
    let adjoint = adj.initial_gradient(&traj);
    let tangent = grad_cost_full(&spec, &traj, &propagate_tangent(&spec, &traj)?)?;
    let fd = fd_cost_gradient(&spec, 0.0, &x, &p, &cfg)?;
    println!("{:>8} {:>22} {:>22} {:>22}", "", "adjoint", "tangent", "finite diff");
    println!(
        "{:>8} {:>22.15e} {:>22.15e} {:>22.15e}",
        "∇_x J̄", adjoint.grad_x[0], tangent.grad_x[0], fd.grad_x[0]
    );
    println!(
        "{:>8} {:>22.15e} {:>22.15e} {:>22.15e}",
        "∇_p J̄", adjoint.grad_p[0], tangent.grad_p[0], fd.grad_p[0]
    );

    // the gradient trajectory obeys its own ODEs
    let rep = second_order_check(&spec, &traj, &adj)?;
    println!("\ngradient-trajectory ODE residuals: {rep:?}");
    Ok(())
}
