//! J̄ satisfies its Hamilton–Jacobi equation along the flow, and a solved
//! momentum stays stationary when the problem is restarted mid-trajectory.

use nalgebra::DVector;
use stataction::stationary::{hjb_residual, interior_samples, verify_stationarity};
use stataction::*;

fn main() -> Result<()> {
    let ms = MassSpringParams::reference(1.0);
    let spec = ms.with_t_final(ms.t_final_for_phase(0.0, 1.2)).problem(0.0)?;
    let cfg = NewtonConfig::default();
    let x = DVector::from_element(1, -0.5);

    let samples = interior_samples(0.0, spec.t_final, 5);
    let hjb = hjb_residual(
        &spec,
        0.0,
        &x,
        &DVector::from_element(1, 0.7),
        &samples,
        1e-4,
        &cfg.integrator,
    )?;
    println!("HJB residual at an arbitrary momentum: {hjb:?}");

    let r = solve_argstat_p(&spec, 0.0, &x, &DVector::zeros(1), &cfg)?;
    let samples = interior_samples(0.0, spec.t_final, 10);
    let rep = verify_stationarity(&spec, &r, &samples, 1e-6, &cfg.integrator)?;
    println!(
        "solved p* = {:.10}: stationary at all {} restarts = {}",
        r.p_star[0],
        samples.len(),
        rep.pass
    );
    for c in &rep.samples {
        println!(
            "  s = {:.4}: |∇_p J̄| = {:.1e}, |p̄_s − ∇_x J̄| = {:.1e}",
            c.s, c.gradp, c.fixedpoint
        );
    }

    let off = StationaryResult::evaluate(
        &spec,
        0.0,
        &x,
        &(&r.p_star + DVector::from_element(1, 0.1)),
        &cfg.integrator,
    )?;
    println!("perturbed momentum: |p − ∇_x J̄| = {:.3e}", off.residual_fixedpoint);
    Ok(())
}
