//! Forward characteristics of the mass–spring problem: energy conservation,
//! RK4 against adaptive Dormand–Prince, and the trajectory CSV.

use nalgebra::DVector;
use stataction::flow::{energy_drift, newton_residual, write_trajectory_csv};
use stataction::*;

fn main() -> Result<()> {
    let ms = MassSpringParams::reference(10.0);
    let spec = ms.problem(0.0)?;
    let (x, p) = (DVector::from_element(1, 1.0), DVector::from_element(1, 0.5));

    let w = ms.omega();
    let exact = |s: f64| (w * s).cos() - 0.5 / (ms.mass * w) * (w * s).sin();
    for cfg in [
        IntegratorConfig::rk4_steps(200),
        IntegratorConfig::rk4_steps(2000),
        IntegratorConfig::dopri(1e-10, 1e-12),
    ] {
        let traj = integrate_cauchy(&spec, 0.0, 10.0, &x, &p, &cfg)?;
        println!(
            "{:?} {:>5} nodes: |x_T − exact| = {:.2e}, energy drift = {:.2e}, Newton residual = {:.2e}",
            cfg.scheme,
            traj.len(),
            (traj.last().x[0] - exact(10.0)).abs(),
            energy_drift(&spec, &traj)?,
            newton_residual(&spec, &traj)?,
        );
    }

    let coarse = integrate_cauchy(&spec, 0.0, 10.0, &x, &p, &IntegratorConfig::rk4_steps(10))?;
    println!("\ntrajectory (10 steps):");
    write_trajectory_csv(&spec, &coarse, std::io::stdout())?;
    Ok(())
}
