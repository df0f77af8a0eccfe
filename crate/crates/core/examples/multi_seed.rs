//! Stationary points need not be unique: on a long horizon the double well
//! admits several stationary momenta, found by seeding in parallel.

use nalgebra::DVector;
use stataction::model::{FieldSpec, MatrixSpec, ProblemDoc};
use stataction::stationary::stationary_value;
use stataction::*;

fn main() -> Result<()> {
    let spec = ProblemSpec::from_doc(&ProblemDoc {
        dim: 1,
        potential: FieldSpec::DoubleWell { a: 0.5, b: 1.0 },
        inertia: MatrixSpec::Scalar(1.0),
        terminal: FieldSpec::Zero,
        t0: 0.0,
        t_final: 4.0,
        hessian_bound: None,
    })?;
    let seeds: Vec<DVector<f64>> = (-8..=8).map(|k| DVector::from_element(1, 0.5 * k as f64)).collect();
    let set = stationary_value(
        &spec,
        0.0,
        &DVector::from_element(1, 0.2),
        &seeds,
        &NewtonConfig::default(),
        1e-6,
    )?;
    println!(
        "{} distinct stationary momenta from {} seeds ({} nonexistent, {} inconclusive, {} failed)",
        set.solutions.len(),
        seeds.len(),
        set.nonexistent_seeds,
        set.inconclusive_seeds,
        set.failed_seeds
    );
    for r in &set.solutions {
        println!(
            "  p* = {:>12.8}  J̄ = {:>12.8}  x̄_T = {:>10.6}",
            r.p_star[0],
            r.value,
            r.trajectory.last().x[0]
        );
    }
    Ok(())
}
