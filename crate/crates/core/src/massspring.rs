//! Closed-form oracle for the one-dimensional mass–spring problem
//! V(x) = ½κx², M = m, ψ(x) = −mvx.
//!
//! With Γ = [[0, −1/m], [κ, 0]] and Σ = diag(κ, −1/m) the cost is the
//! quadratic form W̃(s, Y) = ½⟨Y, P_s Y⟩ + ⟨Q_s, Y⟩, and the stationary
//! momentum has an explicit four-way case split in the phase θ = ω(T − t).

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InertiaOperator, PotentialField, ProblemSpec, Quadratic, TerminalCost};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSpringParams {
    pub mass: f64,
    pub stiffness: f64,
    /// Desired terminal velocity.
    pub v: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum CaseKind {
    Generic,
    Period(i64),
    QuarterFamily(i64),
    QuarterNonexistent(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub kind: CaseKind,
    pub p_bar: Option<f64>,
    pub family: bool,
}

impl MassSpringParams {
    pub fn new(mass: f64, stiffness: f64, v: f64, t_final: f64) -> Result<Self> {
        if !(mass > 0.0 && stiffness > 0.0 && v.is_finite() && t_final.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "mass–spring needs m > 0, κ > 0 and finite v, T (got m = {mass}, κ = {stiffness}, v = {v}, T = {t_final})"
            )));
        }
        Ok(Self {
            mass,
            stiffness,
            v,
            t_final,
        })
    }

    /// Reference parameters: m = 5, κ = 1, v = −2, so ω = √0.2.
    pub fn reference(t_final: f64) -> Self {
        Self {
            mass: 5.0,
            stiffness: 1.0,
            v: -2.0,
            t_final,
        }
    }

    pub fn omega(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }

    /// Final time giving phase θ = ω(T − t).
    pub fn t_final_for_phase(&self, t: f64, theta: f64) -> f64 {
        t + theta / self.omega()
    }

    pub fn with_t_final(&self, t_final: f64) -> Self {
        Self { t_final, ..*self }
    }

    pub fn gamma(&self) -> Matrix2<f64> {
        Matrix2::new(0.0, -1.0 / self.mass, self.stiffness, 0.0)
    }

    pub fn sigma(&self) -> Matrix2<f64> {
        Matrix2::new(self.stiffness, 0.0, 0.0, -1.0 / self.mass)
    }

    /// exp(Γτ), the characteristic flow over a time span τ.
    pub fn flow(&self, tau: f64) -> Matrix2<f64> {
        let w = self.omega();
        let (c, s) = ((w * tau).cos(), (w * tau).sin());
        Matrix2::new(c, -s / (self.mass * w), self.mass * w * s, c)
    }

    pub fn psi(&self, x: f64) -> f64 {
        -self.mass * self.v * x
    }

    pub fn p_matrix(&self, s: f64) -> Matrix2<f64> {
        let w = self.omega();
        let th2 = 2.0 * w * (self.t_final - s);
        let off = 1.0 - th2.cos();
        0.5 * Matrix2::new(-(self.stiffness / w) * th2.sin(), off, off, th2.sin() / (self.mass * w))
    }

    pub fn q_vector(&self, s: f64) -> Vector2<f64> {
        let w = self.omega();
        let th = w * (self.t_final - s);
        -self.mass * self.v * Vector2::new(th.cos(), -(w / self.stiffness) * th.sin())
    }

    pub fn w_tilde(&self, s: f64, x: f64, p: f64) -> f64 {
        let y = Vector2::new(x, p);
        0.5 * y.dot(&(self.p_matrix(s) * y)) + self.q_vector(s).dot(&y)
    }

    /// (∇_x W̃, ∇_p W̃) at (t, x, p).
    pub fn grad_w(&self, t: f64, x: f64, p: f64) -> (f64, f64) {
        let w = self.omega();
        let th = w * (self.t_final - t);
        let mv = self.mass * self.v;
        let gx =
            -(self.stiffness / (2.0 * w)) * (2.0 * th).sin() * x + 0.5 * (1.0 - (2.0 * th).cos()) * p - mv * th.cos();
        let gp = 0.5 * (1.0 - (2.0 * th).cos()) * x
            + (2.0 * th).sin() / (2.0 * self.mass * w) * p
            + mv * (w / self.stiffness) * th.sin();
        (gx, gp)
    }

    /// Ω_t and Θ_t of the linear system Ω (x√(κm), p̄)′ = Θ.
    pub fn omega_theta(&self, t: f64) -> (Matrix2<f64>, Vector2<f64>) {
        let th = self.omega() * (self.t_final - t);
        let (s, c) = th.sin_cos();
        let mv = self.mass * self.v;
        (Matrix2::new(s * s, s * c, s * c, c * c), -mv * Vector2::new(s, c))
    }

    /// σ₂/σ₁ of the augmented 2×3 matrix (Ω_t | Θ_t); zero when rank one.
    pub fn rank_one_defect(&self, t: f64) -> f64 {
        let (om, th) = self.omega_theta(t);
        let aug = DMatrix::from_row_slice(2, 3, &[om[(0, 0)], om[(0, 1)], th[0], om[(1, 0)], om[(1, 1)], th[1]]);
        let sv = aug.singular_values();
        if sv.max() == 0.0 {
            0.0
        } else {
            sv.min() / sv.max()
        }
    }

    /// The case split for p̄ at phase θ = ω(T − t), with degenerate phases
    /// recognised within `tol_phase`.
    pub fn classify_pbar(&self, t: f64, x: f64, tol_phase: f64) -> CaseLabel {
        debug_assert!(self.rank_one_defect(t) < 1e-12);
        let w = self.omega();
        let th = w * (self.t_final - t);
        let mv = self.mass * self.v;
        let sign = |n: i64| if (n + 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };

        let n = (th / PI).round();
        if (th - n * PI).abs() <= tol_phase {
            let n = n as i64;
            return CaseLabel {
                kind: CaseKind::Period(n),
                p_bar: Some(sign(n) * mv),
                family: false,
            };
        }
        let n = (th / PI - 0.5).round();
        if (th - (n * PI + FRAC_PI_2)).abs() <= tol_phase {
            let n = n as i64;
            let ray = sign(n) * self.v / w;
            let kind = if (x - ray).abs() <= tol_phase * (1.0 + x.abs()) {
                CaseKind::QuarterFamily(n)
            } else {
                CaseKind::QuarterNonexistent(n)
            };
            return CaseLabel {
                kind,
                p_bar: None,
                family: matches!(kind, CaseKind::QuarterFamily(_)),
            };
        }
        CaseLabel {
            kind: CaseKind::Generic,
            p_bar: Some(-(self.stiffness * self.mass).sqrt() * th.tan() * x - mv / th.cos()),
            family: false,
        }
    }

    /// Largest central-difference residual of Ṗ = Σ − Γ′P − PΓ and
    /// Q̇ = −Γ′Q over the interior of `grid`.
    pub fn riccati_residual(&self, grid: &[f64]) -> Result<f64> {
        if grid.len() < 3 {
            return Err(Error::GridTooCoarse {
                nodes: grid.len(),
                required: 3,
            });
        }
        let (g, sig) = (self.gamma(), self.sigma());
        let mut worst: f64 = 0.0;
        for k in 1..grid.len() - 1 {
            let (s0, s, s1) = (grid[k - 1], grid[k], grid[k + 1]);
            let (h0, h1) = (s - s0, s1 - s);
            let (d, _) = crate::quadrature::three_point(h0, h1);
            let pd = self.p_matrix(s0) * d[0] + self.p_matrix(s) * d[1] + self.p_matrix(s1) * d[2];
            let qd = self.q_vector(s0) * d[0] + self.q_vector(s) * d[1] + self.q_vector(s1) * d[2];
            let p = self.p_matrix(s);
            let rp = pd - (sig - g.transpose() * p - p * g);
            let rq = qd + g.transpose() * self.q_vector(s);
            worst = worst.max(rp.amax()).max(rq.amax());
        }
        Ok(worst)
    }

    /// The mass–spring instance as a general problem on [t0, T].
    pub fn problem(&self, t0: f64) -> Result<ProblemSpec> {
        let potential = PotentialField::new(Arc::new(Quadratic::new(
            DMatrix::from_element(1, 1, self.stiffness),
            DVector::zeros(1),
            0.0,
        )))
        .with_bound(2.0 * self.stiffness);
        let terminal = TerminalCost::new(Arc::new(Quadratic::new(
            DMatrix::zeros(1, 1),
            DVector::from_element(1, -self.mass * self.v),
            0.0,
        )));
        ProblemSpec::new(
            potential,
            InertiaOperator::scalar(1, self.mass)?,
            terminal,
            t0,
            self.t_final,
        )
    }
}

/// Whether θ lies within `tol` of a multiple of π/2.
pub fn near_degenerate_phase(theta: f64, tol: f64) -> bool {
    let r = theta.rem_euclid(FRAC_PI_2);
    r.min(FRAC_PI_2 - r) < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MassSpringParams {
        MassSpringParams::reference(10.0)
    }

    fn expm(m: Matrix2<f64>) -> Matrix2<f64> {
        m.exp()
    }

    #[test]
    fn omega_invariant() {
        let ms = params();
        assert!((ms.omega().powi(2) * ms.mass - ms.stiffness).abs() < 1e-12);
        assert!(MassSpringParams::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn p_matrix_examples() {
        let ms = params();
        assert_eq!(ms.p_matrix(ms.t_final), Matrix2::zeros());
        let s = ms.t_final - FRAC_PI_2 / ms.omega();
        assert!((ms.p_matrix(s) - Matrix2::new(0.0, 1.0, 1.0, 0.0)).amax() < 1e-12);
        for s in [0.0, 3.3, 9.9] {
            let p = ms.p_matrix(s);
            assert_eq!(p, p.transpose());
        }
    }

    #[test]
    fn p_matrix_matches_quadrature_of_its_integral() {
        let ms = params();
        let (g, sig) = (ms.gamma(), ms.sigma());
        for s in [0.0, 2.5, 7.0] {
            let grid: Vec<f64> = (0..=2000).map(|k| s + (ms.t_final - s) * k as f64 / 2000.0).collect();
            let mut p = Matrix2::zeros();
            for i in 0..2 {
                for j in 0..2 {
                    let vals: Vec<f64> = grid
                        .iter()
                        .map(|&sig_t| {
                            let e = expm(g * (sig_t - s));
                            (e.transpose() * sig * e)[(i, j)]
                        })
                        .collect();
                    p[(i, j)] = -simpson(&grid, &vals).unwrap();
                }
            }
            assert!((p - ms.p_matrix(s)).amax() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn q_vector_examples() {
        let ms = params();
        let mv = ms.mass * ms.v;
        assert_eq!(ms.q_vector(ms.t_final), Vector2::new(-mv, 0.0));
        let s = ms.t_final - PI / ms.omega();
        assert!((ms.q_vector(s) - Vector2::new(mv, 0.0)).amax() < 1e-12);
        for s in [0.0, 4.0, 8.5] {
            let q = expm(ms.gamma().transpose() * (ms.t_final - s)) * Vector2::new(-mv, 0.0);
            assert!((q - ms.q_vector(s)).amax() < 1e-12);
        }
    }

    #[test]
    fn flow_is_the_matrix_exponential() {
        let ms = params();
        for tau in [-3.0, 0.0, 1.7, 9.0] {
            assert!((ms.flow(tau) - expm(ms.gamma() * tau)).amax() < 1e-12);
        }
    }

    #[test]
    fn w_tilde_terminal_and_origin() {
        let ms = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (x, p) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            assert!((ms.w_tilde(ms.t_final, x, p) - ms.psi(x)).abs() < 1e-12);
        }
        assert_eq!(ms.w_tilde(1.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn grad_w_matches_finite_differences() {
        let ms = params();
        assert_eq!(ms.grad_w(ms.t_final, 1.3, -0.4), (-ms.mass * ms.v, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (t, x, p) = (
                rng.gen_range(0.0..10.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let h = 1e-5;
            let fx = (ms.w_tilde(t, x + h, p) - ms.w_tilde(t, x - h, p)) / (2.0 * h);
            let fp = (ms.w_tilde(t, x, p + h) - ms.w_tilde(t, x, p - h)) / (2.0 * h);
            let (gx, gp) = ms.grad_w(t, x, p);
            assert!((fx - gx).abs() < 1e-8 && (fp - gp).abs() < 1e-8);
        }
    }

    #[test]
    fn compact_pde_identity() {
        let ms = params();
        let (g, sig) = (ms.gamma(), ms.sigma());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let s = rng.gen_range(0.5..9.5);
            let y = Vector2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let h = 1e-5;
            let ds = (ms.w_tilde(s + h, y[0], y[1]) - ms.w_tilde(s - h, y[0], y[1])) / (2.0 * h);
            let grad = ms.p_matrix(s) * y + ms.q_vector(s);
            let r = -ds + 0.5 * y.dot(&(sig * y)) - grad.dot(&(g * y));
            assert!(r.abs() < 1e-8, "residual {r}");
        }
    }

    #[test]
    fn classification_examples() {
        let ms = params();
        let w = ms.omega();
        // quarter-family case of the figures: θ = 3.5π, x = (−1)⁴ v/ω
        let tf = ms.t_final_for_phase(0.0, 3.5 * PI);
        let fig = ms.with_t_final(tf);
        let x = ms.v / w;
        assert!((x + 4.472135955).abs() < 1e-8);
        let lab = fig.classify_pbar(0.0, x, 1e-9);
        assert_eq!(lab.kind, CaseKind::QuarterFamily(3));
        assert!(lab.family && lab.p_bar.is_none());
        let lab = fig.classify_pbar(0.0, x + 0.5, 1e-9);
        assert_eq!(lab.kind, CaseKind::QuarterNonexistent(3));
        assert!(!lab.family && lab.p_bar.is_none());

        let two_pi = ms.with_t_final(ms.t_final_for_phase(0.0, 2.0 * PI));
        let lab = two_pi.classify_pbar(0.0, 1.7, 1e-9);
        assert_eq!(lab.kind, CaseKind::Period(2));
        assert_eq!(lab.p_bar, Some(-ms.mass * ms.v));

        let quarter = ms.with_t_final(ms.t_final_for_phase(0.0, PI / 4.0));
        let lab = quarter.classify_pbar(0.0, 0.0, 1e-9);
        assert_eq!(lab.kind, CaseKind::Generic);
        assert!((lab.p_bar.unwrap() + ms.mass * ms.v * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn generic_pbar_satisfies_both_gradient_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let ms = params().with_t_final(rng.gen_range(0.1..30.0));
            let (t, x) = (rng.gen_range(0.0..ms.t_final), rng.gen_range(-5.0..5.0));
            let th = ms.omega() * (ms.t_final - t);
            if near_degenerate_phase(th, 1e-2) {
                continue;
            }
            let p = ms.classify_pbar(t, x, 1e-9).p_bar.unwrap();
            let (gx, gp) = ms.grad_w(t, x, p);
            let scale = 1.0 + p.abs();
            assert!(gp.abs() < 1e-9 * scale && (gx - p).abs() < 1e-9 * scale);
            assert!(ms.rank_one_defect(t) < 1e-12);
        }
    }

    #[test]
    fn riccati_checks() {
        let ms = params();
        let grid: Vec<f64> = (0..=10_000).map(|k| k as f64 * 1e-3).collect();
        assert!(ms.riccati_residual(&grid).unwrap() <= 1e-6);
        assert!(ms.riccati_residual(&grid[..2]).is_err());
        // Γ has eigenvalues ±iω
        let g = ms.gamma();
        assert!((g.trace()).abs() < 1e-15);
        assert!((g.determinant() - ms.omega().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_phase_detection() {
        assert!(near_degenerate_phase(PI, 1e-6));
        assert!(near_degenerate_phase(1.5 * PI + 1e-8, 1e-6));
        assert!(!near_degenerate_phase(0.3 * PI, 1e-6));
    }
}
