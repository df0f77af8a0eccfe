//! Characteristic (Hamiltonian) flow
//!
//! ```text
//!   ẋ = −M⁻¹p,   ṗ = ∇V(x),   ż = V(x) − ½⟨p, M⁻¹p⟩
//! ```
//!
//! integrated forward from Cauchy data (x, p) at time t, or backward from
//! terminal data x_T = y, p_T = ∇ψ(y), z_T = ψ(y). Trajectories keep their
//! integration grid so quadrature, tangent and adjoint sweeps can share it.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hamiltonian, ProblemSpec};
use crate::ode::{self, AdaptiveSettings, SchemeKind};
use crate::quadrature::{simpson_weights, three_point};

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(x: DVector<f64>, p: DVector<f64>) -> Self {
        Self { x, p }
    }

    /// Stacked Y = (x, p).
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.x.len();
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(&self.x);
        y.rows_mut(n, n).copy_from(&self.p);
        y
    }

    pub fn from_stacked(y: &DVector<f64>, n: usize) -> Self {
        Self {
            x: y.rows(0, n).into_owned(),
            p: y.rows(n, n).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub scheme: SchemeKind,
    /// Number of RK4 intervals when `step` is unset.
    pub steps: usize,
    /// RK4 step size; overrides `steps`.
    pub step: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Rk4,
            steps: 2000,
            step: None,
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn rk4_step(step: f64) -> Self {
        Self {
            step: Some(step),
            ..Self::default()
        }
    }

    pub fn dopri(rtol: f64, atol: f64) -> Self {
        Self {
            scheme: SchemeKind::Dopri,
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.scheme {
            SchemeKind::Rk4 => self.step.map_or(self.steps > 0, |h| h > 0.0),
            SchemeKind::Dopri => self.rtol > 0.0 && self.atol > 0.0,
        };
        if ok && self.max_steps > 0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid integrator settings {self:?}")))
        }
    }

    /// Even interval count for a fixed-step run over `span`.
    fn intervals(&self, span: f64) -> usize {
        let n = match self.step {
            Some(h) => (span.abs() / h).ceil() as usize,
            None => self.steps,
        };
        let n = n.max(2);
        n + n % 2
    }
}

#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// Action accumulator z̄_s, present for terminal-data solutions.
    pub z: Option<Vec<f64>>,
    pub scheme: SchemeKind,
}

impl PhaseTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.x.len())
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn first(&self) -> &PhasePoint {
        &self.points[0]
    }

    pub fn last(&self) -> &PhasePoint {
        self.points.last().unwrap()
    }

    /// The sub-trajectory starting at node `from`.
    pub fn tail(&self, from: usize) -> PhaseTrajectory {
        PhaseTrajectory {
            times: self.times[from..].to_vec(),
            points: self.points[from..].to_vec(),
            z: self.z.as_ref().map(|z| z[from..].to_vec()),
            scheme: self.scheme,
        }
    }

    /// Index of the interval [tᵢ, tᵢ₊₁] containing `s` (clamped).
    fn interval(&self, s: f64) -> usize {
        let k = self.times.partition_point(|&t| t <= s);
        k.saturating_sub(1).min(self.times.len().saturating_sub(2))
    }

    /// Cubic Hermite dense output at any s ∈ [t, T].
    pub fn interpolate(&self, spec: &ProblemSpec, s: f64) -> PhasePoint {
        if self.len() == 1 {
            return self.points[0].clone();
        }
        let i = self.interval(s);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        let y = hermite(
            self.times[i],
            self.times[i + 1],
            &a.stacked(),
            &vector_field(spec, a),
            &b.stacked(),
            &vector_field(spec, b),
            s,
        );
        PhasePoint::from_stacked(&y, self.dim())
    }
}

fn hermite(
    t0: f64,
    t1: f64,
    ya: &DVector<f64>,
    da: &DVector<f64>,
    yb: &DVector<f64>,
    db: &DVector<f64>,
    s: f64,
) -> DVector<f64> {
    let h = t1 - t0;
    let u = (s - t0) / h;
    let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
    let h10 = u.powi(3) - 2.0 * u * u + u;
    let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
    let h11 = u.powi(3) - u * u;
    ya * h00 + da * (h * h10) + yb * h01 + db * (h * h11)
}

/// Dense output with node derivatives computed once, for sweeps that sample
/// many stage times along the same trajectory.
pub(crate) struct Dense<'a> {
    traj: &'a PhaseTrajectory,
    nodes: Vec<DVector<f64>>,
    derivs: Vec<DVector<f64>>,
}

impl<'a> Dense<'a> {
    pub fn new(spec: &ProblemSpec, traj: &'a PhaseTrajectory) -> Self {
        Self {
            traj,
            nodes: traj.points.iter().map(PhasePoint::stacked).collect(),
            derivs: traj.points.iter().map(|pt| vector_field(spec, pt)).collect(),
        }
    }

    /// Stacked (x, p) at `s`, interpolated on interval `i`.
    pub fn eval_in(&self, i: usize, s: f64) -> DVector<f64> {
        if self.traj.len() == 1 {
            return self.nodes[0].clone();
        }
        let t = &self.traj.times;
        hermite(
            t[i],
            t[i + 1],
            &self.nodes[i],
            &self.derivs[i],
            &self.nodes[i + 1],
            &self.derivs[i + 1],
            s,
        )
    }

    pub fn eval(&self, s: f64) -> PhasePoint {
        let i = if self.traj.len() == 1 { 0 } else { self.traj.interval(s) };
        PhasePoint::from_stacked(&self.eval_in(i, s), self.traj.dim())
    }
}

/// f(X) = (−M⁻¹p, ∇V(x)) for a phase point.
pub fn vector_field(spec: &ProblemSpec, pt: &PhasePoint) -> DVector<f64> {
    let n = spec.dim;
    let mut f = DVector::zeros(2 * n);
    f.rows_mut(0, n).copy_from(&(-spec.inertia.apply_inverse(&pt.p)));
    f.rows_mut(n, n).copy_from(&spec.potential.gradient(&pt.x));
    f
}

/// Right-hand side on stacked (x, p) or (x, p, z) vectors.
pub(crate) fn characteristic_rhs(spec: &ProblemSpec, y: &DVector<f64>) -> DVector<f64> {
    let n = spec.dim;
    let x = y.rows(0, n).into_owned();
    let p = y.rows(n, n).into_owned();
    let minv_p = spec.inertia.apply_inverse(&p);
    let mut f = DVector::zeros(y.len());
    f.rows_mut(0, n).copy_from(&(-&minv_p));
    f.rows_mut(n, n).copy_from(&spec.potential.gradient(&x));
    if y.len() > 2 * n {
        f[2 * n] = spec.potential.value(&x) - 0.5 * p.dot(&minv_p);
    }
    f
}

/// Grid used by a fixed-step run from `from` to `to` (either direction).
pub(crate) fn fixed_grid(cfg: &IntegratorConfig, from: f64, to: f64) -> Vec<f64> {
    ode::uniform_grid(from, to, cfg.intervals(to - from))
}

fn run(
    spec: &ProblemSpec,
    from: f64,
    to: f64,
    y0: DVector<f64>,
    cfg: &IntegratorConfig,
) -> std::result::Result<(Vec<f64>, Vec<DVector<f64>>), ode::Partial> {
    let rhs = |_s: f64, y: &DVector<f64>| characteristic_rhs(spec, y);
    if from == to {
        return Ok((vec![from], vec![y0]));
    }
    match cfg.scheme {
        SchemeKind::Rk4 => {
            let grid = fixed_grid(cfg, from, to);
            if grid.len() - 1 > cfg.max_steps {
                let mut partial_grid = grid;
                partial_grid.truncate(cfg.max_steps + 1);
                return match ode::integrate_on_grid(cfg.scheme.tableau(), &rhs, &partial_grid, y0) {
                    Ok(states) => Err(ode::Partial {
                        times: partial_grid,
                        states,
                        reason: format!("step budget of {} exhausted", cfg.max_steps),
                    }),
                    Err(p) => Err(p),
                };
            }
            let states = ode::integrate_on_grid(cfg.scheme.tableau(), &rhs, &grid, y0)?;
            Ok((grid, states))
        }
        SchemeKind::Dopri => ode::integrate_adaptive(
            &rhs,
            from,
            to,
            y0,
            &AdaptiveSettings {
                rtol: cfg.rtol,
                atol: cfg.atol,
                max_steps: cfg.max_steps,
                even_intervals: true,
            },
        ),
    }
}

fn assemble(
    n: usize,
    mut times: Vec<f64>,
    mut states: Vec<DVector<f64>>,
    with_z: bool,
    scheme: SchemeKind,
) -> PhaseTrajectory {
    if times.len() > 1 && times[0] > times[1] {
        times.reverse();
        states.reverse();
    }
    let z = with_z.then(|| states.iter().map(|y| y[2 * n]).collect());
    let points = states
        .iter()
        .map(|y| PhasePoint::new(y.rows(0, n).into_owned(), y.rows(n, n).into_owned()))
        .collect();
    PhaseTrajectory {
        times,
        points,
        z,
        scheme,
    }
}

fn integration_error(n: usize, partial: ode::Partial, with_z: bool, scheme: SchemeKind) -> Error {
    let at = partial.times.last().copied().unwrap_or(f64::NAN);
    Error::IntegrationError {
        at,
        reason: partial.reason,
        partial: Box::new(assemble(n, partial.times, partial.states, with_z, scheme)),
    }
}

fn check_horizon(t: f64, t_final: f64) -> Result<()> {
    if t <= t_final && t.is_finite() && t_final.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!(
            "expected t <= T, got t = {t}, T = {t_final}"
        )))
    }
}

/// Solves the Cauchy problem x̄_t = x0, p̄_t = p0 forward to `t_final`.
pub fn integrate_cauchy(
    spec: &ProblemSpec,
    t: f64,
    t_final: f64,
    x0: &DVector<f64>,
    p0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<PhaseTrajectory> {
    check_horizon(t, t_final)?;
    spec.check_state("initial state", x0)?;
    spec.check_state("initial costate", p0)?;
    cfg.validate()?;
    let y0 = PhasePoint::new(x0.clone(), p0.clone()).stacked();
    let n = spec.dim;
    match run(spec, t, t_final, y0, cfg) {
        Ok((times, states)) => Ok(assemble(n, times, states, false, cfg.scheme)),
        Err(partial) => Err(integration_error(n, partial, false, cfg.scheme)),
    }
}

/// Solves the characteristic system backward from terminal data at `t_final`
/// (x̄_T = y, p̄_T = ∇ψ(y), z̄_T = ψ(y)) down to `t`.
pub fn integrate_terminal(
    spec: &ProblemSpec,
    t: f64,
    t_final: f64,
    y: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<PhaseTrajectory> {
    check_horizon(t, t_final)?;
    spec.check_state("terminal state", y)?;
    cfg.validate()?;
    let n = spec.dim;
    let mut y0 = DVector::zeros(2 * n + 1);
    y0.rows_mut(0, n).copy_from(y);
    y0.rows_mut(n, n).copy_from(&spec.terminal.gradient(y));
    y0[2 * n] = spec.terminal.value(y);
    match run(spec, t_final, t, y0, cfg) {
        Ok((times, states)) => Ok(assemble(n, times, states, true, cfg.scheme)),
        Err(partial) => Err(integration_error(n, partial, true, cfg.scheme)),
    }
}

/// Integrates many Cauchy problems in parallel; output order follows input.
pub fn integrate_cauchy_batch(
    spec: &ProblemSpec,
    t: f64,
    t_final: f64,
    initial: &[PhasePoint],
    cfg: &IntegratorConfig,
) -> Vec<Result<PhaseTrajectory>> {
    initial
        .par_iter()
        .map(|pt| integrate_cauchy(spec, t, t_final, &pt.x, &pt.p, cfg))
        .collect()
}

/// ∫ ½⟨p̄, M⁻¹p̄⟩ − V(x̄) ds + ψ(x̄_T) by Simpson on the trajectory grid.
pub fn action_along(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<f64> {
    let terminal = spec.terminal.value(&traj.last().x);
    if traj.len() == 1 {
        return Ok(terminal);
    }
    let w = simpson_weights(&traj.times)?;
    let running: f64 = w
        .iter()
        .zip(&traj.points)
        .map(|(w, pt)| {
            let l = 0.5 * pt.p.dot(&spec.inertia.apply_inverse(&pt.p)) - spec.potential.value(&pt.x);
            w * l
        })
        .sum();
    Ok(running + terminal)
}

/// max over the grid of |H(x̄_s, p̄_s) − H(x̄_t, p̄_t)|.
pub fn energy_drift(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<f64> {
    let h0 = hamiltonian(spec, &traj.first().x, &traj.first().p)?;
    let mut drift: f64 = 0.0;
    for pt in &traj.points {
        drift = drift.max((hamiltonian(spec, &pt.x, &pt.p)? - h0).abs());
    }
    Ok(drift)
}

/// [`energy_drift`] divided by |H| at the first node (absolute when H = 0).
pub fn relative_energy_drift(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<f64> {
    let h0 = hamiltonian(spec, &traj.first().x, &traj.first().p)?.abs();
    let drift = energy_drift(spec, traj)?;
    Ok(if h0 > 0.0 { drift / h0 } else { drift })
}

/// Largest interior residual of ẍ + M⁻¹∇V(x̄) with ẍ from second differences.
pub fn newton_residual(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::GridTooCoarse {
            nodes: traj.len(),
            required: 3,
        });
    }
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let (h0, h1) = (traj.times[i] - traj.times[i - 1], traj.times[i + 1] - traj.times[i]);
        let (_, d2) = three_point(h0, h1);
        let xdd = &traj.points[i - 1].x * d2[0] + &traj.points[i].x * d2[1] + &traj.points[i + 1].x * d2[2];
        let r = xdd + spec.inertia.apply_inverse(&spec.potential.gradient(&traj.points[i].x));
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV dump: s, x[0..n), p[0..n), z (when present), H.
pub fn write_trajectory_csv<W: Write>(spec: &ProblemSpec, traj: &PhaseTrajectory, out: W) -> Result<()> {
    let n = traj.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["s".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..n).map(|i| format!("p{i}")));
    if traj.z.is_some() {
        header.push("z".into());
    }
    header.push("H".into());
    w.write_record(&header)?;
    for (k, (s, pt)) in traj.times.iter().zip(&traj.points).enumerate() {
        let mut row = vec![fmt17(*s)];
        row.extend(pt.x.iter().map(|v| fmt17(*v)));
        row.extend(pt.p.iter().map(|v| fmt17(*v)));
        if let Some(z) = &traj.z {
            row.push(fmt17(z[k]));
        }
        row.push(fmt17(hamiltonian(spec, &pt.x, &pt.p)?));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
