//! Free particle with a linear terminal cost: every characteristic has
//! constant momentum, so the stationary momentum is p̄ = ∇ψ = −Mv.

use nalgebra::DVector;
use stataction::model::{FieldSpec, MatrixSpec, ProblemDoc};
use stataction::*;

fn main() -> Result<()> {
    let mass = [2.0, 0.5];
    let velocity = [1.0, -3.0];
    let spec = ProblemSpec::from_doc(&ProblemDoc {
        dim: 2,
        potential: FieldSpec::Zero,
        inertia: MatrixSpec::Diag(mass.to_vec()),
        terminal: FieldSpec::Linear {
            coeffs: mass.iter().zip(&velocity).map(|(m, v)| -m * v).collect(),
            constant: 0.0,
        },
        t0: 0.0,
        t_final: 4.0,
        hessian_bound: None,
    })?;
    let x = DVector::from_vec(vec![0.3, -0.7]);
    let cfg = NewtonConfig::default();

    let argstat = solve_argstat_p(&spec, 1.0, &x, &DVector::zeros(2), &cfg)?;
    let shooting = solve_tpbvp_shooting(&spec, 1.0, spec.t_final, &x, &DVector::from_vec(vec![5.0, 5.0]), &cfg)?;
    println!(
        "argstat  p* = {:?} ({}, {} iterations)",
        argstat.p_star.as_slice(),
        argstat.classification.label(),
        argstat.iterations
    );
    println!(
        "shooting p* = {:?} ({} iterations)",
        shooting.p_star.as_slice(),
        shooting.iterations
    );
    println!("expected    = [{}, {}]", -mass[0] * velocity[0], -mass[1] * velocity[1]);
    println!("x̄_T = {:?}", argstat.trajectory.last().x.as_slice());
    Ok(())
}
