//! What happens at the special phases of the mass–spring problem: a unique
//! p̄ = (−1)^{n+1}mv at full periods, a family or nothing at quarter periods.

use std::f64::consts::PI;

use nalgebra::DVector;
use stataction::stationary::family_value_spread;
use stataction::variational::adjoint_family_blocks;
use stataction::*;

fn main() -> Result<()> {
    let base = MassSpringParams::reference(1.0);
    let ray = -base.v / base.omega();
    let cfg = NewtonConfig::default();
    for (theta, x) in [
        (PI, 1.0),
        (2.0 * PI, 1.0),
        (0.5 * PI, ray),
        (0.5 * PI, 1.0),
        (1.5 * PI, -ray),
    ] {
        let ms = base.with_t_final(base.t_final_for_phase(0.0, theta));
        let spec = ms.problem(0.0)?;
        let r = solve_argstat_p(&spec, 0.0, &DVector::from_element(1, x), &DVector::zeros(1), &cfg)?;
        let blocks = adjoint_family_blocks(&spec, &r.trajectory)?;
        print!(
            "θ = {:.2}π, x = {x:>8.4}: {:<12} p* = {:>9.5}, σ_min(J) = {:.1e}, σ_min(Û²¹) = {:.1e}",
            theta / PI,
            r.classification.label(),
            r.p_star[0],
            r.jacobian_sigma_min,
            blocks.sigma_min,
        );
        if let Classification::Family { .. } = r.classification {
            print!(
                ", J̄ spread over the family = {:.1e}",
                family_value_spread(&spec, &r, 5, &cfg.integrator)?
            );
        }
        println!();
    }
    Ok(())
}
