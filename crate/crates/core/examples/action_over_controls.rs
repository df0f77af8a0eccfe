//! The original action J(u) over velocity trajectories: the control induced
//! by the stationary momentum makes its gradient vanish, and its value is J̄.

use nalgebra::DVector;
use stataction::stationary::{cost_j, grad_u_residual, ControlGrid};
use stataction::*;

fn main() -> Result<()> {
    let ms = MassSpringParams::reference(1.0);
    let spec = ms.with_t_final(ms.t_final_for_phase(0.0, 2.2)).problem(0.0)?;
    let x = DVector::from_element(1, 1.2);
    let r = solve_argstat_p(&spec, 0.0, &x, &DVector::zeros(1), &NewtonConfig::default())?;

    let u = ControlGrid::from_trajectory(&spec, &r.trajectory, 2)?;
    println!("J̄(p*) = {:.12}", r.value);
    println!("J(ū)  = {:.12}", cost_j(&spec, 0.0, &x, &u)?);
    println!("sup |Mū + p̄| = {:.2e}", grad_u_residual(&spec, 0.0, &x, &u)?.sup_norm());

    let bump = ControlGrid::new(
        u.times.clone(),
        u.times
            .iter()
            .map(|s| DVector::from_element(1, (s * 0.7).sin()))
            .collect(),
    )?;
    for eps in [1e-1, 1e-2, 1e-3] {
        let j = cost_j(&spec, 0.0, &x, &u.axpy(eps, &bump))?;
        println!("J(ū + {eps:e}·δ) − J(ū) = {:+.3e}", j - r.value);
    }
    Ok(())
}
