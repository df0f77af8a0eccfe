//! Stationary momenta of J̄_T(t, x, ·), the equivalent two-point boundary
//! value problem, and numerical checks of the equivalence and verification
//! results that tie them to the action J_T(t, x, u).
//!
//! The root-finding problem solved by [`solve_argstat_p`] is the pair of
//! verification conditions
//!
//! ```text
//!   F(p) = ( ∇_p J̄_T(t, x, p),  p − ∇_x J̄_T(t, x, p) ) = 0
//! ```
//!
//! which on a stationary trajectory hold simultaneously. Solving both (rather
//! than ∇_p J̄ alone) pins down p̄ at full periods of a linear oscillator,
//! where ∇_p J̄ vanishes identically in p.

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{action_along, integrate_cauchy, Dense, IntegratorConfig, PhaseTrajectory};
use crate::model::{check_assumptions, extended_hamiltonian, ProblemSpec};
use crate::variational::{adjoint_family_blocks, integrate_fvp, propagate_tangent, CostGradient};

/// Piecewise-linear velocity trajectory on a grid over [t, T].
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    pub times: Vec<f64>,
    pub u: Vec<DVector<f64>>,
}

impl ControlGrid {
    pub fn new(times: Vec<f64>, u: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != u.len() {
            return Err(Error::GridMismatch(format!(
                "control grid needs ≥ 2 nodes with one value each (got {} times, {} values)",
                times.len(),
                u.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("control grid times must increase".into()));
        }
        Ok(Self { times, u })
    }

    pub fn constant(times: Vec<f64>, u: &DVector<f64>) -> Result<Self> {
        let values = vec![u.clone(); times.len()];
        Self::new(times, values)
    }

    /// ū_s = −M⁻¹p̄_s sampled on the trajectory grid, each interval split
    /// into `refine` pieces using dense output.
    pub fn from_trajectory(spec: &ProblemSpec, traj: &PhaseTrajectory, refine: usize) -> Result<Self> {
        let refine = refine.max(1);
        let dense = Dense::new(spec, traj);
        let mut times = Vec::with_capacity((traj.len() - 1) * refine + 1);
        for w in traj.times.windows(2) {
            for k in 0..refine {
                times.push(w[0] + (w[1] - w[0]) * k as f64 / refine as f64);
            }
        }
        times.push(traj.end_time());
        let u = times
            .iter()
            .map(|&s| -spec.inertia.apply_inverse(&dense.eval(s).p))
            .collect();
        Self::new(times, u)
    }

    /// self + a·other on the same grid.
    pub fn axpy(&self, a: f64, other: &ControlGrid) -> ControlGrid {
        ControlGrid {
            times: self.times.clone(),
            u: self.u.iter().zip(&other.u).map(|(u, d)| u + d * a).collect(),
        }
    }

    /// L² norm squared, exact for piecewise-linear controls.
    pub fn norm_sq(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.u.windows(2))
            .map(|(t, u)| (t[1] - t[0]) / 3.0 * (u[0].dot(&u[0]) + u[0].dot(&u[1]) + u[1].dot(&u[1])))
            .sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().map(|u| u.amax()).fold(0.0, f64::max)
    }

    fn check_span(&self, spec: &ProblemSpec, t: f64, x: &DVector<f64>) -> Result<()> {
        spec.check_state("control initial state", x)?;
        let scale = 1e-12 * (1.0 + spec.t_final.abs());
        let (a, b) = (self.times[0], *self.times.last().unwrap());
        if (a - t).abs() > scale || (b - spec.t_final).abs() > scale {
            return Err(Error::GridMismatch(format!(
                "control grid spans [{a}, {b}], expected [{t}, {}]",
                spec.t_final
            )));
        }
        for u in &self.u {
            spec.check_state("control value", u)?;
        }
        Ok(())
    }
}

/// x̄ at the nodes and interval midpoints for a piecewise-linear control
/// (x̄ is then piecewise quadratic, so both are exact).
struct ControlPath {
    nodes: Vec<DVector<f64>>,
    mids: Vec<DVector<f64>>,
}

fn control_path(x: &DVector<f64>, u: &ControlGrid) -> ControlPath {
    let mut nodes = vec![x.clone()];
    let mut mids = Vec::with_capacity(u.times.len() - 1);
    for (t, w) in u.times.windows(2).zip(u.u.windows(2)) {
        let h = t[1] - t[0];
        let last = nodes.last().unwrap();
        mids.push(last + (&w[0] * 3.0 + &w[1]) * (h / 8.0));
        nodes.push(last + (&w[0] + &w[1]) * (h / 2.0));
    }
    ControlPath { nodes, mids }
}

/// J_T(t, x, u) = ∫ ½⟨u, Mu⟩ − V(x̄) ds + ψ(x̄_T) with x̄_s = x + ∫ u.
pub fn cost_j(spec: &ProblemSpec, t: f64, x: &DVector<f64>, u: &ControlGrid) -> Result<f64> {
    u.check_span(spec, t, x)?;
    let path = control_path(x, u);
    let m = spec.inertia.matrix();
    let lag = |u: &DVector<f64>, x: &DVector<f64>| 0.5 * u.dot(&(m * u)) - spec.potential.value(x);
    let mut total = 0.0;
    for i in 0..u.times.len() - 1 {
        let h = u.times[i + 1] - u.times[i];
        let um = (&u.u[i] + &u.u[i + 1]) * 0.5;
        total += h / 6.0
            * (lag(&u.u[i], &path.nodes[i]) + 4.0 * lag(&um, &path.mids[i]) + lag(&u.u[i + 1], &path.nodes[i + 1]));
    }
    Ok(total + spec.terminal.value(path.nodes.last().unwrap()))
}

/// Nodewise r_s = M u_s + p̄_s, where p̄ solves ṗ = ∇V(x̄), p_T = ∇ψ(x̄_T)
/// along the state driven by `u`. Vanishes exactly for stationary controls.
pub fn grad_u_residual(spec: &ProblemSpec, t: f64, x: &DVector<f64>, u: &ControlGrid) -> Result<ControlGrid> {
    u.check_span(spec, t, x)?;
    let path = control_path(x, u);
    let len = u.times.len();
    let mut p = vec![DVector::zeros(spec.dim); len];
    p[len - 1] = spec.terminal.gradient(&path.nodes[len - 1]);
    for i in (0..len - 1).rev() {
        let h = u.times[i + 1] - u.times[i];
        let g = spec.potential.gradient(&path.nodes[i])
            + spec.potential.gradient(&path.mids[i]) * 4.0
            + spec.potential.gradient(&path.nodes[i + 1]);
        p[i] = &p[i + 1] - g * (h / 6.0);
    }
    let m = spec.inertia.matrix();
    let r = u.u.iter().zip(&p).map(|(u, p)| m * u + p).collect();
    ControlGrid::new(u.times.clone(), r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    /// Absolute residual tolerance; `None` means 1e-9·(1 + ‖p0‖).
    pub tol_residual: Option<f64>,
    pub max_iters: usize,
    /// Finite-difference step, relative to 1 + ‖p‖.
    pub fd_step: f64,
    /// Singular values below this multiple of max(‖J‖, 1) count as zero.
    pub singular_sigma_threshold: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub integrator: IntegratorConfig,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_residual: None,
            max_iters: 50,
            fd_step: 1e-6,
            singular_sigma_threshold: 1e-8,
            armijo: 1e-4,
            max_backtracks: 30,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl NewtonConfig {
    pub fn tolerance(&self, p0: &DVector<f64>) -> f64 {
        self.tol_residual.unwrap_or(1e-9 * (1.0 + p0.norm()))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_residual.is_none_or(|t| t > 0.0)
            && self.max_iters > 0
            && self.fd_step > 0.0
            && self.singular_sigma_threshold > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0;
        if ok {
            self.integrator.validate()
        } else {
            Err(Error::Config(format!("invalid Newton settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Unique,
    Family { dim: usize, basis: Vec<Vec<f64>> },
    Nonexistent,
    Inconclusive,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Unique => "unique",
            Classification::Family { .. } => "family",
            Classification::Nonexistent => "nonexistent",
            Classification::Inconclusive => "inconclusive",
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, Classification::Unique | Classification::Family { .. })
    }

    fn family_basis(&self) -> Vec<DVector<f64>> {
        match self {
            Classification::Family { basis, .. } => basis.iter().map(|b| DVector::from_column_slice(b)).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Argstat,
    Shooting,
    /// Evaluated at a given momentum, no solve.
    Evaluation,
}

#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub t: f64,
    pub x: DVector<f64>,
    pub p_star: DVector<f64>,
    pub trajectory: PhaseTrajectory,
    /// ‖∇_p J̄_T(t, x, p*)‖
    pub residual_gradp: f64,
    /// ‖p* − ∇_x J̄_T(t, x, p*)‖
    pub residual_fixedpoint: f64,
    /// J̄_T(t, x, p*)
    pub value: f64,
    pub classification: Classification,
    /// Smallest singular value of the solver's Jacobian.
    pub jacobian_sigma_min: f64,
    pub iterations: usize,
    pub method: SolveMethod,
    /// ‖p̄_T − ∇ψ(x̄_T)‖, the boundary-condition defect.
    pub residual_terminal: f64,
    pub u_hat_sigma_min: Option<f64>,
    pub u_hat_condition: Option<f64>,
}

/// JSON form of a [`StationaryResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub p_star: Vec<f64>,
    pub value: f64,
    pub residual_gradp: f64,
    pub residual_fixedpoint: f64,
    pub classification: String,
    pub jacobian_sigma_min: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub family_basis: Vec<Vec<f64>>,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<SolveMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hat_sigma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hat_condition: Option<f64>,
}

impl StationaryResult {
    /// Evaluates all residuals at a given momentum without solving.
    pub fn evaluate(
        spec: &ProblemSpec,
        t: f64,
        x: &DVector<f64>,
        p: &DVector<f64>,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        let ev = Evaluation::new(spec, t, x, p, cfg)?;
        Ok(ev.into_result(
            spec,
            t,
            x,
            Classification::Inconclusive,
            f64::NAN,
            0,
            SolveMethod::Evaluation,
        ))
    }

    pub fn report(&self) -> StationaryReport {
        StationaryReport {
            p_star: self.p_star.as_slice().to_vec(),
            value: self.value,
            residual_gradp: self.residual_gradp,
            residual_fixedpoint: self.residual_fixedpoint,
            classification: self.classification.label().into(),
            jacobian_sigma_min: self.jacobian_sigma_min,
            iterations: self.iterations,
            family_basis: match &self.classification {
                Classification::Family { basis, .. } => basis.clone(),
                _ => Vec::new(),
            },
            t: self.t,
            x: self.x.as_slice().to_vec(),
            method: Some(self.method),
            u_hat_sigma_min: self.u_hat_sigma_min,
            u_hat_condition: self.u_hat_condition,
        }
    }
}

/// Everything computed from one integration at momentum p.
struct Evaluation {
    p: DVector<f64>,
    traj: PhaseTrajectory,
    grad: CostGradient,
    value: f64,
}

impl Evaluation {
    fn new(spec: &ProblemSpec, t: f64, x: &DVector<f64>, p: &DVector<f64>, cfg: &IntegratorConfig) -> Result<Self> {
        let traj = integrate_cauchy(spec, t, spec.t_final, x, p, cfg)?;
        let grad = integrate_fvp(spec, &traj)?.initial_gradient(&traj);
        let value = action_along(spec, &traj)?;
        Ok(Self {
            p: p.clone(),
            traj,
            grad,
            value,
        })
    }

    /// F(p) = (∇_p J̄, p − ∇_x J̄).
    fn residual(&self) -> DVector<f64> {
        let n = self.p.len();
        let mut f = DVector::zeros(2 * n);
        f.rows_mut(0, n).copy_from(&self.grad.grad_p);
        f.rows_mut(n, n).copy_from(&(&self.p - &self.grad.grad_x));
        f
    }

    fn terminal_defect(&self, spec: &ProblemSpec) -> f64 {
        let end = self.traj.last();
        (&end.p - spec.terminal.gradient(&end.x)).norm()
    }

    #[allow(clippy::too_many_arguments)]
    fn into_result(
        self,
        spec: &ProblemSpec,
        t: f64,
        x: &DVector<f64>,
        classification: Classification,
        sigma_min: f64,
        iterations: usize,
        method: SolveMethod,
    ) -> StationaryResult {
        let residual_terminal = self.terminal_defect(spec);
        StationaryResult {
            t,
            x: x.clone(),
            residual_gradp: self.grad.grad_p.norm(),
            residual_fixedpoint: (&self.p - &self.grad.grad_x).norm(),
            p_star: self.p,
            trajectory: self.traj,
            value: self.value,
            classification,
            jacobian_sigma_min: sigma_min,
            iterations,
            method,
            residual_terminal,
            u_hat_sigma_min: None,
            u_hat_condition: None,
        }
    }
}

/// Central-difference Jacobian of `f` at `p`.
fn fd_jacobian<F>(f: &F, p: &DVector<f64>, rel_step: f64, rows: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = p.len();
    let h = rel_step * (1.0 + p.norm());
    let mut jac = DMatrix::zeros(rows, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = h;
        let col = (f(&(p + &e))? - f(&(p - &e))?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Accumulated roundoff in F, in units of machine epsilon.
const RESIDUAL_NOISE_ULPS: f64 = 1e3;

/// Smallest singular value a central-difference Jacobian can resolve:
/// the roundoff in F divided by the step.
fn fd_resolution(p: &DVector<f64>, f: &DVector<f64>, rel_step: f64) -> f64 {
    RESIDUAL_NOISE_ULPS * f64::EPSILON * (1.0 + f.norm()) / (rel_step * (1.0 + p.norm()))
}

struct Spectrum {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    threshold: f64,
    sigma_min: f64,
}

impl Spectrum {
    /// `floor` is the resolution of the Jacobian itself (zero when exact).
    fn new(jac: &DMatrix<f64>, rel: f64, floor: f64) -> Self {
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        // a tall Jacobian has min(rows, cols) singular values
        let sigma_min = svd.singular_values.min();
        Self {
            threshold: (rel * smax.max(1.0)).max(floor),
            sigma_min,
            svd,
        }
    }

    /// Truncated least-squares step δ minimising ‖J δ + F‖.
    fn step(&self, f: &DVector<f64>) -> DVector<f64> {
        -self.svd.solve(f, self.threshold).expect("svd computed with u and v")
    }

    /// Right singular vectors of (numerically) zero singular values.
    fn null_basis(&self, cols: usize) -> Vec<DVector<f64>> {
        let v_t = self.svd.v_t.as_ref().unwrap();
        let sv = &self.svd.singular_values;
        let mut basis: Vec<DVector<f64>> = (0..sv.len())
            .filter(|&i| sv[i] <= self.threshold)
            .map(|i| v_t.row(i).transpose())
            .collect();
        // columns beyond the row count are null directions as well
        for i in sv.len()..cols {
            basis.push(v_t.row(i).transpose());
        }
        basis
    }

    fn rank_deficient(&self) -> bool {
        self.sigma_min <= self.threshold
    }
}

enum Outcome {
    Converged,
    Stalled,
    Exhausted,
}

/// Damped Gauss–Newton on ‖F‖² with an SVD-truncated step and Armijo
/// backtracking. Returns the final iterate, its Jacobian spectrum and how
/// the loop ended.
fn gauss_newton<E, N, J>(
    p0: &DVector<f64>,
    cfg: &NewtonConfig,
    tol: f64,
    eval: E,
    floor: N,
    jacobian: J,
) -> Result<(DVector<f64>, Spectrum, Outcome, usize)>
where
    E: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    N: Fn(&DVector<f64>, &DVector<f64>) -> f64,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut p = p0.clone();
    let mut f = eval(&p)?;
    for iter in 0..cfg.max_iters {
        let jac = jacobian(&p)?;
        let spec = Spectrum::new(&jac, cfg.singular_sigma_threshold, floor(&p, &f));
        if f.norm() <= tol {
            return Ok((p, spec, Outcome::Converged, iter));
        }
        let delta = spec.step(&f);
        let f2 = f.norm_squared();
        let pred = f2 - (&f + &jac * &delta).norm_squared();
        if delta.norm() <= 1e-15 * (1.0 + p.norm()) || pred <= 1e-14 * f2 {
            return Ok((p, spec, Outcome::Stalled, iter));
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial = &p + &delta * alpha;
            if let Ok(ft) = eval(&trial) {
                if f2 - ft.norm_squared() >= cfg.armijo * alpha * pred {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, ft)) => {
                p = trial;
                f = ft;
            }
            None => return Ok((p, spec, Outcome::Stalled, iter)),
        }
        log::debug!("gauss-newton iter {iter}: |F| = {:.3e}", f.norm());
    }
    let jac = jacobian(&p)?;
    let spec = Spectrum::new(&jac, cfg.singular_sigma_threshold, floor(&p, &f));
    let outcome = if f.norm() <= tol {
        Outcome::Converged
    } else {
        Outcome::Exhausted
    };
    Ok((p, spec, outcome, cfg.max_iters))
}

/// Classifies a terminated solve. `g` evaluates the residual used to
/// validate a candidate family.
fn classify<G>(
    p: &DVector<f64>,
    f: &DVector<f64>,
    spectrum: &Spectrum,
    outcome: &Outcome,
    tol: f64,
    g: G,
) -> Classification
where
    G: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    match outcome {
        Outcome::Converged if !spectrum.rank_deficient() => Classification::Unique,
        Outcome::Converged => {
            let basis = spectrum.null_basis(p.len());
            let on_family = basis.iter().all(|b| {
                [0.1, -0.1]
                    .iter()
                    .all(|&a| g(&(p + b * a)).is_some_and(|r| r.norm() <= tol))
            });
            if on_family {
                Classification::Family {
                    dim: basis.len(),
                    basis: basis.iter().map(|b| b.as_slice().to_vec()).collect(),
                }
            } else {
                Classification::Inconclusive
            }
        }
        _ => {
            let delta = spectrum.step(f);
            let ls = (f + spectrum.svd.u.as_ref().unwrap()
                * (spectrum.svd.v_t.as_ref().unwrap() * &delta).component_mul(&spectrum.svd.singular_values))
            .norm();
            if spectrum.rank_deficient() && ls > tol {
                Classification::Nonexistent
            } else {
                Classification::Inconclusive
            }
        }
    }
}

/// Finds p̄ with ∇_p J̄_T(t, x, p̄) = 0 and p̄ = ∇_x J̄_T(t, x, p̄), starting
/// from `p0`, and classifies the solution set locally.
pub fn solve_argstat_p(
    spec: &ProblemSpec,
    t: f64,
    x: &DVector<f64>,
    p0: &DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<StationaryResult> {
    spec.check_state("argstat x", x)?;
    spec.check_state("argstat p0", p0)?;
    cfg.validate()?;
    let n = spec.dim;
    let tol = cfg.tolerance(p0);
    let f =
        |p: &DVector<f64>| -> Result<DVector<f64>> { Ok(Evaluation::new(spec, t, x, p, &cfg.integrator)?.residual()) };
    let (p, spectrum, outcome, iters) = gauss_newton(
        p0,
        cfg,
        tol,
        f,
        |p, fp| fd_resolution(p, fp, cfg.fd_step),
        |p| fd_jacobian(&f, p, cfg.fd_step, 2 * n),
    )?;
    let ev = Evaluation::new(spec, t, x, &p, &cfg.integrator)?;
    let fp = ev.residual();
    let class = classify(&p, &fp, &spectrum, &outcome, tol, |q| f(q).ok());
    let sigma = spectrum.sigma_min;
    let result = ev.into_result(spec, t, x, class, sigma, iters, SolveMethod::Argstat);
    match outcome {
        Outcome::Exhausted => Err(Error::NonConvergence {
            iterations: iters,
            residual: fp.norm(),
            best: Box::new(result),
        }),
        _ => Ok(result),
    }
}

/// Shooting on G(p) = p̄_T − ∇ψ(x̄_T) with the Jacobian
/// U²²_{T,t} − ∇²ψ(x̄_T) U¹²_{T,t} from the tangent flow.
pub fn solve_tpbvp_shooting(
    spec: &ProblemSpec,
    t: f64,
    t_final: f64,
    x: &DVector<f64>,
    p0: &DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<StationaryResult> {
    spec.check_state("shooting x", x)?;
    spec.check_state("shooting p0", p0)?;
    cfg.validate()?;
    let spec = &spec.with_horizon(spec.t0.min(t), t_final)?;
    let n = spec.dim;
    let tol = cfg.tolerance(p0);
    let shoot = |p: &DVector<f64>| -> Result<(DVector<f64>, PhaseTrajectory)> {
        let traj = integrate_cauchy(spec, t, t_final, x, p, &cfg.integrator)?;
        let end = traj.last();
        Ok((&end.p - spec.terminal.gradient(&end.x), traj))
    };
    let jacobian = |p: &DVector<f64>| -> Result<DMatrix<f64>> {
        let (_, traj) = shoot(p)?;
        let u = propagate_tangent(spec, &traj)?.last().clone();
        let hess = spec.terminal.hessian(&traj.last().x);
        let u12 = u.view((0, n), (n, n));
        let u22 = u.view((n, n), (n, n));
        Ok(u22 - hess * u12)
    };
    let (p, spectrum, outcome, iters) = gauss_newton(p0, cfg, tol, |p| Ok(shoot(p)?.0), |_, _| 0.0, jacobian)?;
    let (gp, traj) = shoot(&p)?;
    let class = classify(&p, &gp, &spectrum, &outcome, tol, |q| shoot(q).ok().map(|r| r.0));
    let blocks = adjoint_family_blocks(spec, &traj)?;
    let ev = Evaluation::new(spec, t, x, &p, &cfg.integrator)?;
    let mut result = ev.into_result(spec, t, x, class, spectrum.sigma_min, iters, SolveMethod::Shooting);
    result.u_hat_sigma_min = Some(blocks.sigma_min);
    result.u_hat_condition = Some(blocks.condition);
    match outcome {
        Outcome::Converged if result.classification.is_solved() => Ok(result),
        _ => Err(Error::NonConvergence {
            iterations: iters,
            residual: gp.norm(),
            best: Box::new(result),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub s: f64,
    pub gradp: f64,
    pub fixedpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub samples: Vec<SampleCheck>,
    pub max_gradp: f64,
    pub max_fixedpoint: f64,
    pub tol: f64,
    /// The result was classified as unique or family.
    pub precondition: bool,
    pub pass: bool,
}

/// `k` uniformly spaced interior times of (t, T).
pub fn interior_samples(t: f64, t_final: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|i| t + (t_final - t) * i as f64 / (k + 1) as f64).collect()
}

/// Restarts the gradient computation at (s, x̄_s, p̄_s) for each sample and
/// checks ∇_p J̄ = 0 and p̄_s = ∇_x J̄ there.
pub fn verify_stationarity(
    spec: &ProblemSpec,
    result: &StationaryResult,
    sample_times: &[f64],
    tol: f64,
    cfg: &IntegratorConfig,
) -> Result<StationarityReport> {
    let mut samples = Vec::with_capacity(sample_times.len());
    let dense = Dense::new(spec, &result.trajectory);
    for &s in sample_times {
        let pt = dense.eval(s);
        let traj = integrate_cauchy(spec, s, spec.t_final, &pt.x, &pt.p, cfg)?;
        let g = integrate_fvp(spec, &traj)?.initial_gradient(&traj);
        samples.push(SampleCheck {
            s,
            gradp: g.grad_p.norm(),
            fixedpoint: (&pt.p - &g.grad_x).norm(),
        });
    }
    let max_gradp = samples.iter().map(|c| c.gradp).fold(0.0, f64::max);
    let max_fixedpoint = samples.iter().map(|c| c.fixedpoint).fold(0.0, f64::max);
    let precondition = result.classification.is_solved();
    Ok(StationarityReport {
        pass: precondition && max_gradp <= tol && max_fixedpoint <= tol,
        samples,
        max_gradp,
        max_fixedpoint,
        tol,
        precondition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    /// max |d/ds J̄(s, x̄_s, p̄_s) − (V − ½⟨p̄, M⁻¹p̄⟩)| along the flow.
    pub total_derivative: f64,
    /// max |∂_s J̄ − H̄(x, p, ∇_x J̄, ∇_p J̄)| at the flow points.
    pub pde: f64,
}

impl HjbReport {
    pub fn max(&self) -> f64 {
        self.total_derivative.max(self.pde)
    }
}

/// Same number of intervals regardless of horizon, so costs evaluated on
/// nearby horizons differ smoothly.
fn fixed_count(cfg: &IntegratorConfig, span: f64) -> IntegratorConfig {
    match (cfg.scheme, cfg.step) {
        (crate::ode::SchemeKind::Rk4, Some(h)) => IntegratorConfig {
            step: None,
            steps: ((span / h).ceil() as usize).max(2),
            ..cfg.clone()
        },
        _ => cfg.clone(),
    }
}

/// Checks that J̄_T satisfies its Hamilton–Jacobi equation
/// ∂_s J̄ = H̄(x, p, ∇_x J̄, ∇_p J̄) along the Cauchy flow from (t, x, p),
/// with time derivatives by central differences of step `fd_step`.
pub fn hjb_residual(
    spec: &ProblemSpec,
    t: f64,
    x: &DVector<f64>,
    p: &DVector<f64>,
    sample_times: &[f64],
    fd_step: f64,
    cfg: &IntegratorConfig,
) -> Result<HjbReport> {
    let tf = spec.t_final;
    if !(t < tf) {
        return Err(Error::InvalidProblem(format!("need t < T, got t = {t}, T = {tf}")));
    }
    if tf - t < 4.0 * fd_step {
        return Err(Error::GridTooCoarse {
            nodes: ((tf - t) / fd_step) as usize,
            required: 4,
        });
    }
    let cfg = fixed_count(cfg, tf - t);
    let base = integrate_cauchy(spec, t, tf, x, p, &cfg)?;
    let dense = Dense::new(spec, &base);
    let cost = |s: f64, x: &DVector<f64>, p: &DVector<f64>| -> Result<f64> {
        action_along(spec, &integrate_cauchy(spec, s, tf, x, p, &cfg)?)
    };
    let mut rep = HjbReport {
        total_derivative: 0.0,
        pde: 0.0,
    };
    for &s in sample_times {
        let s = s.clamp(t + fd_step, tf - fd_step);
        let pt = dense.eval(s);
        let (a, b) = (dense.eval(s - fd_step), dense.eval(s + fd_step));
        let along = (cost(s + fd_step, &b.x, &b.p)? - cost(s - fd_step, &a.x, &a.p)?) / (2.0 * fd_step);
        let expect = spec.potential.value(&pt.x) - 0.5 * pt.p.dot(&spec.inertia.apply_inverse(&pt.p));
        rep.total_derivative = rep.total_derivative.max((along - expect).abs());

        let ds = (cost(s + fd_step, &pt.x, &pt.p)? - cost(s - fd_step, &pt.x, &pt.p)?) / (2.0 * fd_step);
        let traj = integrate_cauchy(spec, s, tf, &pt.x, &pt.p, &cfg)?;
        let g = integrate_fvp(spec, &traj)?.initial_gradient(&traj);
        let hbar = extended_hamiltonian(spec, &pt.x, &pt.p, &g.grad_x, &g.grad_p)?;
        rep.pde = rep.pde.max((ds - hbar).abs());
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub quadratic_form: f64,
    pub lower_bound: f64,
    pub norm_sq: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub m: f64,
    pub k: f64,
    pub horizon: f64,
    /// m − K·max(T − t, 1)·(T − t); the bound is informative only when positive.
    pub coefficient: f64,
    pub applicable: bool,
    pub directions: Vec<DirectionCheck>,
    pub all_pass: bool,
    pub any_negative: bool,
}

/// Second differences of J_T(t, x, ·) at `u` along each direction, against
/// the coercivity bound (m − K·max(T − t, 1)(T − t))‖δ‖².
pub fn convexity_certificate(
    spec: &ProblemSpec,
    t: f64,
    x: &DVector<f64>,
    u: &ControlGrid,
    directions: &[ControlGrid],
    eps: f64,
) -> Result<ConvexityReport> {
    let path = control_path(x, u);
    let mut samples = path.nodes.clone();
    samples.extend(path.mids);
    let assumptions = check_assumptions(spec, &samples)?;
    let k = spec.potential.hessian_bound.unwrap_or(assumptions.k_est);
    let m = assumptions.m_est;
    let tau = spec.t_final - t;
    let coefficient = m - k * tau.max(1.0) * tau;
    let j0 = cost_j(spec, t, x, u)?;
    let mut checks = Vec::with_capacity(directions.len());
    for d in directions {
        if d.times != u.times {
            return Err(Error::GridMismatch("direction and control grids differ".into()));
        }
        let norm_sq = d.norm_sq();
        let h = eps / d.sup_norm().max(f64::MIN_POSITIVE);
        let jp = cost_j(spec, t, x, &u.axpy(h, d))?;
        let jm = cost_j(spec, t, x, &u.axpy(-h, d))?;
        let q = (jp - 2.0 * j0 + jm) / (h * h);
        let lower_bound = coefficient * norm_sq;
        let slack = 1e-7 * (q.abs() + lower_bound.abs()) + 1e-9;
        checks.push(DirectionCheck {
            quadratic_form: q,
            lower_bound,
            norm_sq,
            pass: q >= lower_bound - slack,
        });
    }
    Ok(ConvexityReport {
        m,
        k,
        horizon: tau,
        coefficient,
        applicable: coefficient > 0.0,
        all_pass: checks.iter().all(|c| c.pass),
        any_negative: checks.iter().any(|c| c.quadratic_form < 0.0),
        directions: checks,
    })
}

/// The (possibly set-valued) stationary value at (t, x).
#[derive(Debug, Clone)]
pub struct StationarySet {
    /// Distinct solutions; a family contributes one representative.
    pub solutions: Vec<StationaryResult>,
    pub nonexistent_seeds: usize,
    pub inconclusive_seeds: usize,
    pub failed_seeds: usize,
}

impl StationarySet {
    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn has_family(&self) -> bool {
        self.solutions
            .iter()
            .any(|r| matches!(r.classification, Classification::Family { .. }))
    }

    pub fn values(&self) -> Vec<f64> {
        self.solutions.iter().map(|r| r.value).collect()
    }
}

/// Distance from `p` to the affine set through `r.p_star` spanned by the
/// family basis (plain distance for unique results).
fn distance_to(r: &StationaryResult, p: &DVector<f64>) -> f64 {
    let mut d = p - &r.p_star;
    for b in r.classification.family_basis() {
        let c = b.dot(&d);
        d -= b * c;
    }
    d.norm()
}

/// Runs [`solve_argstat_p`] from every seed (in parallel, merged in seed
/// order) and deduplicates solutions within `dedup_tol`.
pub fn stationary_value(
    spec: &ProblemSpec,
    t: f64,
    x: &DVector<f64>,
    seeds: &[DVector<f64>],
    cfg: &NewtonConfig,
    dedup_tol: f64,
) -> Result<StationarySet> {
    if seeds.is_empty() {
        return Err(Error::InvalidProblem("at least one seed is required".into()));
    }
    let runs: Vec<Result<StationaryResult>> = seeds
        .par_iter()
        .map(|p0| solve_argstat_p(spec, t, x, p0, cfg))
        .collect();
    let mut set = StationarySet {
        solutions: Vec::new(),
        nonexistent_seeds: 0,
        inconclusive_seeds: 0,
        failed_seeds: 0,
    };
    for run in runs {
        match run {
            Ok(r) if r.classification.is_solved() => {
                let dup = set
                    .solutions
                    .iter()
                    .any(|s| distance_to(s, &r.p_star) <= dedup_tol || distance_to(&r, &s.p_star) <= dedup_tol);
                if !dup {
                    set.solutions.push(r);
                }
            }
            Ok(r) if r.classification == Classification::Nonexistent => set.nonexistent_seeds += 1,
            Ok(_) => set.inconclusive_seeds += 1,
            Err(Error::NonConvergence { .. }) | Err(Error::IntegrationError { .. }) => set.failed_seeds += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(set)
}

/// Largest deviation of J̄ over `count` members p* + c·b of a family
/// (c ∈ [−1, 1]); zero for unique results.
pub fn family_value_spread(
    spec: &ProblemSpec,
    result: &StationaryResult,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for b in result.classification.family_basis() {
        for k in 0..count {
            let c = if count > 1 {
                -1.0 + 2.0 * k as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let p = &result.p_star + &b * c;
            let traj = integrate_cauchy(spec, result.t, spec.t_final, &result.x, &p, cfg)?;
            worst = worst.max((action_along(spec, &traj)? - result.value).abs());
        }
    }
    Ok(worst)
}
