//! Explicit Runge–Kutta stepping shared by the characteristic, tangent and
//! adjoint integrations.
//!
//! Every step is taken between two recorded grid times with h = t_b − t_a, so
//! replaying a stored grid with the same tableau reproduces the stored nodes
//! bit for bit. The tangent flow relies on this.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Classical fixed-step RK4.
    #[default]
    Rk4,
    /// Dormand–Prince 5(4) with local extrapolation and step control.
    Dopri,
}

pub(crate) struct Tableau {
    c: &'static [f64],
    a: &'static [&'static [f64]],
    b: &'static [f64],
    /// b − b̂ for the embedded error estimate.
    e: Option<&'static [f64]>,
}

const RK4: Tableau = Tableau {
    c: &[0.0, 0.5, 0.5, 1.0],
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    e: None,
};

const DOPRI5: Tableau = Tableau {
    c: &[0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[0.2],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ],
    b: &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
    e: Some(&[
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ]),
};

impl SchemeKind {
    pub(crate) fn tableau(self) -> &'static Tableau {
        match self {
            SchemeKind::Rk4 => &RK4,
            SchemeKind::Dopri => &DOPRI5,
        }
    }
}

/// One step from `ta` to `tb`. Returns the new state and, for embedded
/// tableaux, the local error estimate.
pub(crate) fn step<F>(
    tab: &Tableau,
    rhs: &F,
    ta: f64,
    tb: f64,
    y: &DVector<f64>,
) -> (DVector<f64>, Option<DVector<f64>>)
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = tb - ta;
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(tab.c.len());
    for (i, &ci) in tab.c.iter().enumerate() {
        let mut yi = y.clone();
        for (j, &aij) in tab.a[i].iter().enumerate() {
            if aij != 0.0 {
                yi.axpy(h * aij, &k[j], 1.0);
            }
        }
        k.push(rhs(ta + ci * h, &yi));
    }
    let mut out = y.clone();
    for (bi, ki) in tab.b.iter().zip(&k) {
        if *bi != 0.0 {
            out.axpy(h * bi, ki, 1.0);
        }
    }
    let err = tab.e.map(|e| {
        let mut acc = DVector::zeros(y.len());
        for (ei, ki) in e.iter().zip(&k) {
            if *ei != 0.0 {
                acc.axpy(h * ei, ki, 1.0);
            }
        }
        acc
    });
    (out, err)
}

/// Failure of a grid or adaptive run: everything integrated so far.
pub(crate) struct Partial {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub reason: String,
}

/// Integrates over a prescribed grid (increasing or decreasing).
pub(crate) fn integrate_on_grid<F>(
    tab: &Tableau,
    rhs: &F,
    grid: &[f64],
    y0: DVector<f64>,
) -> Result<Vec<DVector<f64>>, Partial>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0);
    for w in grid.windows(2) {
        let (next, _) = step(tab, rhs, w[0], w[1], states.last().unwrap());
        if !next.iter().all(|v| v.is_finite()) {
            let n = states.len();
            return Err(Partial {
                times: grid[..n].to_vec(),
                states,
                reason: "non-finite state".into(),
            });
        }
        states.push(next);
    }
    Ok(states)
}

/// Uniform grid from `t_start` to `t_end` with `intervals` steps; the last
/// node is exactly `t_end`.
pub(crate) fn uniform_grid(t_start: f64, t_end: f64, intervals: usize) -> Vec<f64> {
    let h = (t_end - t_start) / intervals as f64;
    let mut g: Vec<f64> = (0..intervals).map(|i| t_start + i as f64 * h).collect();
    g.push(t_end);
    g
}

pub(crate) struct AdaptiveSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Force an even number of intervals (for Simpson quadrature).
    pub even_intervals: bool,
}

/// Adaptive Dormand–Prince from `t_start` to `t_end` (either direction).
pub(crate) fn integrate_adaptive<F>(
    rhs: &F,
    t_start: f64,
    t_end: f64,
    y0: DVector<f64>,
    settings: &AdaptiveSettings,
) -> Result<(Vec<f64>, Vec<DVector<f64>>), Partial>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let tab = SchemeKind::Dopri.tableau();
    let span = t_end - t_start;
    let dir = span.signum();
    let mut times = vec![t_start];
    let mut states = vec![y0];
    if span == 0.0 {
        return Ok((times, states));
    }
    let scale_of =
        |y: &DVector<f64>, yn: &DVector<f64>, i: usize| settings.atol + settings.rtol * y[i].abs().max(yn[i].abs());
    let mut h = span.abs() * 1e-3;
    let mut t = t_start;
    let mut steps = 0usize;
    while (t_end - t) * dir > 0.0 {
        if steps >= settings.max_steps {
            return Err(Partial {
                times,
                states,
                reason: format!("step budget of {} exhausted", settings.max_steps),
            });
        }
        steps += 1;
        let remaining = (t_end - t).abs();
        let mut tb = t + dir * h.min(remaining);
        if (t_end - tb) * dir < 1e-12 * span.abs() {
            tb = t_end;
        }
        let y = states.last().unwrap();
        let (yn, err) = step(tab, rhs, t, tb, y);
        let err = err.unwrap();
        let norm = (0..y.len())
            .map(|i| (err[i] / scale_of(y, &yn, i)).powi(2))
            .sum::<f64>()
            / y.len().max(1) as f64;
        let norm = norm.sqrt();
        if !norm.is_finite() || !yn.iter().all(|v| v.is_finite()) {
            h *= 0.25;
            if h < 1e-14 * span.abs() {
                return Err(Partial {
                    times,
                    states,
                    reason: "step size underflow".into(),
                });
            }
            continue;
        }
        if norm <= 1.0 {
            t = tb;
            times.push(t);
            states.push(yn);
        }
        let factor = if norm == 0.0 {
            5.0
        } else {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    if settings.even_intervals && (times.len() - 1) % 2 == 1 {
        // split the final interval in two
        let k = times.len() - 2;
        let (ta, tb) = (times[k], times[k + 1]);
        let mid = 0.5 * (ta + tb);
        let (ym, _) = step(tab, rhs, ta, mid, &states[k]);
        let (yb, _) = step(tab, rhs, mid, tb, &ym);
        times.insert(k + 1, mid);
        states.truncate(k + 1);
        states.push(ym);
        states.push(yb);
    }
    Ok((times, states))
}
