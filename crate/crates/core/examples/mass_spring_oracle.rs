//! Numerical stationary momenta of the mass–spring problem against the
//! closed form, across the phase θ = ω(T − t).

use std::f64::consts::PI;

use nalgebra::DVector;
use stataction::massspring::CaseKind;
use stataction::*;

fn main() -> Result<()> {
    let base = MassSpringParams::reference(1.0);
    let x = 1.0;
    let cfg = NewtonConfig::default();
    println!(
        "{:>8} {:>14} {:>14} {:>10} {:>12}  class",
        "θ/π", "numeric p*", "closed form", "|Δ|", "|J̄ − W̃|"
    );
    let phases = (1..=24).map(|k| k as f64 * PI / 8.0 + 0.01);
    for theta in phases.chain([PI, 2.0 * PI, 0.5 * PI]) {
        let ms = base.with_t_final(base.t_final_for_phase(0.0, theta));
        let spec = ms.problem(0.0)?;
        let label = ms.classify_pbar(0.0, x, 1e-9);
        let r = solve_argstat_p(&spec, 0.0, &DVector::from_element(1, x), &DVector::zeros(1), &cfg)?;
        let closed = label.p_bar.unwrap_or(f64::NAN);
        let kind = match label.kind {
            CaseKind::Generic => "generic".to_string(),
            other => format!("{other:?}"),
        };
        println!(
            "{:>8.4} {:>14.8} {:>14.8} {:>10.2e} {:>12.2e}  {} ({kind})",
            theta / PI,
            r.p_star[0],
            closed,
            (r.p_star[0] - closed).abs(),
            (r.value - ms.w_tilde(0.0, x, r.p_star[0])).abs(),
            r.classification.label(),
        );
    }
    Ok(())
}
