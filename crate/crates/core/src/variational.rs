//! Tangent and adjoint flows along a characteristic, and the gradients of
//! J̄_T(t, x, p) they produce.
//!
//! Two independent routes to the same gradient:
//!
//! * forward: the evolution family U_{s,t} generated by
//!   A_s = [[0, −M⁻¹], [∇²V(x̄_s), 0]] gives
//!   ∇_Y J̃ = U_{T,t}′ ∇Ψ(X̄_T) + ∫ U_{s,t}′ ∇l(X̄_s) ds;
//! * backward: the final value problem ξ̇ = −M⁻¹π, π̇ = ∇²V(x̄_s) ξ with
//!   ξ_T = 0, π_T = p̄_T − ∇ψ(x̄_T) gives ζ_s = (p̄_s − π_s, ξ_s), which is
//!   (∇_x J̄, ∇_p J̄) at every (s, x̄_s, p̄_s).

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{
    action_along, characteristic_rhs, fmt17, integrate_cauchy, Dense, IntegratorConfig, PhasePoint, PhaseTrajectory,
};
use crate::model::{running_cost_gradient, ProblemSpec};
use crate::ode;
use crate::quadrature::{simpson_weights, three_point};

/// Λ(X) = [[0, −M⁻¹], [∇²V(x), 0]].
pub fn generator_at(spec: &ProblemSpec, pt: &PhasePoint) -> Result<DMatrix<f64>> {
    spec.check_state("generator x", &pt.x)?;
    spec.check_state("generator p", &pt.p)?;
    Ok(generator(spec, &pt.x))
}

fn generator(spec: &ProblemSpec, x: &DVector<f64>) -> DMatrix<f64> {
    let n = spec.dim;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&(-spec.inertia.inverse()));
    a.view_mut((n, 0), (n, n)).copy_from(&spec.potential.hessian(x));
    a
}

#[derive(Debug, Clone)]
pub struct TangentFlow {
    pub times: Vec<f64>,
    /// U_{s,t} at each grid time.
    pub ops: Vec<DMatrix<f64>>,
    pub base: PhaseTrajectory,
}

impl TangentFlow {
    /// U_{s,t} h at grid node `i`.
    pub fn apply(&self, i: usize, h: &DVector<f64>) -> DVector<f64> {
        &self.ops[i] * h
    }

    pub fn last(&self) -> &DMatrix<f64> {
        self.ops.last().unwrap()
    }
}

/// Replays the base trajectory jointly with a 2n×2n linear flow whose
/// generator is `gen(x)`. Same tableau, same grid, so the base states are
/// reproduced exactly.
fn propagate_family<G>(spec: &ProblemSpec, traj: &PhaseTrajectory, gen: G) -> Result<Vec<DMatrix<f64>>>
where
    G: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = spec.dim;
    let m = 2 * n;
    if traj.len() == 1 {
        return Ok(vec![DMatrix::identity(m, m)]);
    }
    let rhs = |_s: f64, y: &DVector<f64>| {
        let base = y.rows(0, m).into_owned();
        let x = base.rows(0, n).into_owned();
        let u = DMatrix::from_column_slice(m, m, &y.as_slice()[m..]);
        let du = gen(&x) * u;
        let mut f = DVector::zeros(y.len());
        f.rows_mut(0, m).copy_from(&characteristic_rhs(spec, &base));
        f.rows_mut(m, m * m).copy_from_slice(du.as_slice());
        f
    };
    let mut y0 = DVector::zeros(m + m * m);
    y0.rows_mut(0, m).copy_from(&traj.first().stacked());
    y0.rows_mut(m, m * m)
        .copy_from_slice(DMatrix::<f64>::identity(m, m).as_slice());
    let states = ode::integrate_on_grid(traj.scheme.tableau(), &rhs, &traj.times, y0).map_err(|partial| {
        Error::IntegrationError {
            at: partial.times.last().copied().unwrap_or(f64::NAN),
            reason: format!("tangent flow: {}", partial.reason),
            partial: Box::new(traj.tail(0)),
        }
    })?;
    Ok(states
        .iter()
        .map(|y| DMatrix::from_column_slice(m, m, &y.as_slice()[m..]))
        .collect())
}

/// U_{s,t} on the trajectory grid (U_{t,t} = I).
pub fn propagate_tangent(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<TangentFlow> {
    let ops = propagate_family(spec, traj, |x| generator(spec, x))?;
    Ok(TangentFlow {
        times: traj.times.clone(),
        ops,
        base: traj.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub grad_x: DVector<f64>,
    pub grad_p: DVector<f64>,
    pub t: f64,
    pub point: PhasePoint,
}

/// ∇_Y J̃ by transposed-operator quadrature over the tangent flow.
pub fn grad_cost_full(spec: &ProblemSpec, traj: &PhaseTrajectory, flow: &TangentFlow) -> Result<CostGradient> {
    if flow.times != traj.times {
        return Err(Error::GridMismatch(format!(
            "tangent flow has {} nodes, trajectory {}",
            flow.times.len(),
            traj.len()
        )));
    }
    let n = spec.dim;
    let end = traj.last();
    let mut grad_psi = DVector::zeros(2 * n);
    grad_psi.rows_mut(0, n).copy_from(&spec.terminal.gradient(&end.x));
    let mut g = flow.last().transpose() * grad_psi;
    if traj.len() > 1 {
        let w = simpson_weights(&traj.times)?;
        for ((wi, op), pt) in w.iter().zip(&flow.ops).zip(&traj.points) {
            let dl = running_cost_gradient(spec, &pt.x, &pt.p)?;
            g += op.tr_mul(&dl) * *wi;
        }
    }
    Ok(CostGradient {
        grad_x: g.rows(0, n).into_owned(),
        grad_p: g.rows(n, n).into_owned(),
        t: traj.start_time(),
        point: traj.first().clone(),
    })
}

#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    pub xi: Vec<DVector<f64>>,
    pub pi: Vec<DVector<f64>>,
    /// ζ_s = (p̄_s − π_s, ξ_s).
    pub zeta: Vec<DVector<f64>>,
}

impl AdjointTrajectory {
    pub fn grad_x(&self, i: usize) -> DVector<f64> {
        let n = self.xi[i].len();
        self.zeta[i].rows(0, n).into_owned()
    }

    pub fn grad_p(&self, i: usize) -> DVector<f64> {
        self.xi[i].clone()
    }

    /// The gradient at the initial node.
    pub fn initial_gradient(&self, traj: &PhaseTrajectory) -> CostGradient {
        CostGradient {
            grad_x: self.grad_x(0),
            grad_p: self.grad_p(0),
            t: traj.start_time(),
            point: traj.first().clone(),
        }
    }
}

/// Backward integration of the final value problem on the trajectory grid,
/// with ∇²V rebuilt from dense output at the stage times.
pub fn integrate_fvp(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<AdjointTrajectory> {
    let n = spec.dim;
    let end = traj.last();
    let pi_t = &end.p - spec.terminal.gradient(&end.x);
    let mut state = DVector::zeros(2 * n);
    state.rows_mut(n, n).copy_from(&pi_t);

    let len = traj.len();
    let mut out = vec![DVector::zeros(0); len];
    out[len - 1] = state.clone();
    if len > 1 {
        let dense = Dense::new(spec, traj);
        let tab = traj.scheme.tableau();
        for i in (0..len - 1).rev() {
            let rhs = |s: f64, y: &DVector<f64>| {
                let xs = dense.eval_in(i, s).rows(0, n).into_owned();
                generator(spec, &xs) * y
            };
            let (next, _) = ode::step(tab, &rhs, traj.times[i + 1], traj.times[i], &out[i + 1]);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::IntegrationError {
                    at: traj.times[i],
                    reason: "adjoint state became non-finite".into(),
                    partial: Box::new(traj.tail(i + 1)),
                });
            }
            out[i] = next;
        }
    }
    let xi: Vec<_> = out.iter().map(|y| y.rows(0, n).into_owned()).collect();
    let pi: Vec<_> = out.iter().map(|y| y.rows(n, n).into_owned()).collect();
    let zeta = traj
        .points
        .iter()
        .zip(xi.iter().zip(&pi))
        .map(|(pt, (xi, pi))| {
            let mut z = DVector::zeros(2 * n);
            z.rows_mut(0, n).copy_from(&(&pt.p - pi));
            z.rows_mut(n, n).copy_from(xi);
            z
        })
        .collect();
    Ok(AdjointTrajectory {
        times: traj.times.clone(),
        xi,
        pi,
        zeta,
    })
}

/// Integrates from Cauchy data and returns (∇_x J̄_T, ∇_p J̄_T) at (t, x, p)
/// via the adjoint route.
pub fn cost_gradient(
    spec: &ProblemSpec,
    t: f64,
    x: &DVector<f64>,
    p: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<CostGradient> {
    let traj = integrate_cauchy(spec, t, spec.t_final, x, p, cfg)?;
    Ok(integrate_fvp(spec, &traj)?.initial_gradient(&traj))
}

/// Central finite differences of J̄_T in x and p, step 1e-5·(1 + ‖·‖).
/// The reference the two analytic routes are checked against.
pub fn fd_cost_gradient(
    spec: &ProblemSpec,
    t: f64,
    x: &DVector<f64>,
    p: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<CostGradient> {
    let cost = |x: &DVector<f64>, p: &DVector<f64>| -> Result<f64> {
        action_along(spec, &integrate_cauchy(spec, t, spec.t_final, x, p, cfg)?)
    };
    let n = spec.dim;
    let hx = 1e-5 * (1.0 + x.norm());
    let hp = 1e-5 * (1.0 + p.norm());
    let mut grad_x = DVector::zeros(n);
    let mut grad_p = DVector::zeros(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = hx;
        grad_x[i] = (cost(&(x + &e), p)? - cost(&(x - &e), p)?) / (2.0 * hx);
        e[i] = hp;
        grad_p[i] = (cost(x, &(p + &e))? - cost(x, &(p - &e))?) / (2.0 * hp);
    }
    Ok(CostGradient {
        grad_x,
        grad_p,
        t,
        point: PhasePoint::new(x.clone(), p.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderReport {
    /// ξ″ + M⁻¹∇²V ξ
    pub second_order: f64,
    /// ξ′ + M⁻¹(p̄ − ∇_x J̄)
    pub grad_p_derivative: f64,
    /// (∇_x J̄)′ − ∇V + ∇²V ξ
    pub grad_x_derivative: f64,
}

impl SecondOrderReport {
    pub fn max(&self) -> f64 {
        self.second_order
            .max(self.grad_p_derivative)
            .max(self.grad_x_derivative)
    }
}

/// Finite-difference residuals of the ODEs satisfied by the gradient
/// trajectory s ↦ (∇_x J̄, ∇_p J̄)(s, x̄_s, p̄_s), over interior nodes.
pub fn second_order_check(
    spec: &ProblemSpec,
    traj: &PhaseTrajectory,
    adj: &AdjointTrajectory,
) -> Result<SecondOrderReport> {
    if traj.len() < 5 {
        return Err(Error::GridTooCoarse {
            nodes: traj.len(),
            required: 5,
        });
    }
    if adj.times != traj.times {
        return Err(Error::GridMismatch("adjoint and trajectory grids differ".into()));
    }
    let minv = spec.inertia.inverse();
    let mut rep = SecondOrderReport {
        second_order: 0.0,
        grad_p_derivative: 0.0,
        grad_x_derivative: 0.0,
    };
    for i in 1..traj.len() - 1 {
        let (h0, h1) = (traj.times[i] - traj.times[i - 1], traj.times[i + 1] - traj.times[i]);
        let (d1, d2) = three_point(h0, h1);
        let comb = |w: &[f64; 3], f: &dyn Fn(usize) -> DVector<f64>| f(i - 1) * w[0] + f(i) * w[1] + f(i + 1) * w[2];
        let xi = |k: usize| adj.grad_p(k);
        let gx = |k: usize| adj.grad_x(k);
        let pt = &traj.points[i];
        let hess = spec.potential.hessian(&pt.x);

        let r2 = comb(&d2, &xi) + minv * (&hess * &adj.xi[i]);
        let r1 = comb(&d1, &xi) + minv * (&pt.p - adj.grad_x(i));
        let rx = comb(&d1, &gx) - spec.potential.gradient(&pt.x) + &hess * &adj.xi[i];
        rep.second_order = rep.second_order.max(r2.amax());
        rep.grad_p_derivative = rep.grad_p_derivative.max(r1.amax());
        rep.grad_x_derivative = rep.grad_x_derivative.max(rx.amax());
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct FamilyBlocks {
    /// Û_{T,t}, generated by −A_s′.
    pub u_hat: DMatrix<f64>,
    pub u21: DMatrix<f64>,
    pub sigma_min: f64,
    /// σ_max / σ_min of Û²¹ (infinite when singular).
    pub condition: f64,
    /// Spectral norm of Û_{T,t}.
    pub norm: f64,
}

/// The evolution family generated by −A_s′ over the trajectory, reduced to
/// the block Û²¹_{T,t} that maps terminal costate perturbations to the
/// initial ξ.
pub fn adjoint_family_blocks(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<FamilyBlocks> {
    let n = spec.dim;
    let ops = propagate_family(spec, traj, |x| -generator(spec, x).transpose())?;
    let u_hat = ops.last().unwrap().clone();
    let u21 = u_hat.view((n, 0), (n, n)).into_owned();
    let sv = u21.clone().singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    Ok(FamilyBlocks {
        norm: u_hat.clone().singular_values().max(),
        condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        sigma_min: smin,
        u21,
        u_hat,
    })
}

/// CSV dump of ζ_s: s, gradx[0..n), gradp[0..n).
pub fn write_zeta_csv<W: Write>(adj: &AdjointTrajectory, out: W) -> Result<()> {
    let n = adj.xi.first().map_or(0, |v| v.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["s".to_string()];
    header.extend((0..n).map(|i| format!("gradx{i}")));
    header.extend((0..n).map(|i| format!("gradp{i}")));
    w.write_record(&header)?;
    for (s, z) in adj.times.iter().zip(&adj.zeta) {
        let mut row = vec![fmt17(*s)];
        row.extend(z.iter().map(|v| fmt17(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
