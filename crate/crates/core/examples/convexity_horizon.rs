//! Second variation of the action J(u) against the coercivity bound:
//! positive below the convexity horizon, indefinite past a quarter period.

use std::f64::consts::PI;

use nalgebra::DVector;
use stataction::model::check_assumptions;
use stataction::stationary::{convexity_certificate, ControlGrid};
use stataction::*;

fn main() -> Result<()> {
    let base = MassSpringParams::reference(1.0);
    let x = DVector::from_element(1, 1.0);
    let report = check_assumptions(&base.problem(0.0)?, std::slice::from_ref(&x))?;
    let bound = report.horizon_bound.unwrap();
    println!(
        "m = {}, K = {}, convexity horizon = {bound:.6}",
        report.m_est, report.k_est
    );

    for tau in [0.5 * bound, 0.95 * bound, 0.9 * PI / base.omega()] {
        let spec = base.with_t_final(tau).problem(0.0)?;
        let grid: Vec<f64> = (0..=100).map(|k| tau * k as f64 / 100.0).collect();
        let u = ControlGrid::constant(grid.clone(), &DVector::zeros(1))?;
        let dirs: Vec<ControlGrid> = (1..=4)
            .map(|k| {
                let vals = grid
                    .iter()
                    .map(|s| DVector::from_element(1, (k as f64 * PI * s / (2.0 * tau)).cos()))
                    .collect();
                ControlGrid::new(grid.clone(), vals)
            })
            .collect::<Result<_>>()?;
        let rep = convexity_certificate(&spec, 0.0, &x, &u, &dirs, 1e-2)?;
        println!(
            "\nT − t = {tau:.4} (θ = {:.3}π), bound coefficient {:.4}",
            base.omega() * tau / PI,
            rep.coefficient
        );
        for (k, d) in rep.directions.iter().enumerate() {
            println!(
                "  cos({}πs/2τ): δ²J = {:>10.5}, lower bound = {:>10.5}, holds = {}",
                k + 1,
                d.quadratic_form,
                d.lower_bound,
                d.pass
            );
        }
    }
    Ok(())
}
