//! Mechanical problem definition: potential, inertia, terminal cost and horizon,
//! plus the Hamiltonians built from them.

mod field;

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use field::{derivative_consistency, DoubleWell, Field, FieldSpec, MatrixSpec, Pendulum, Polynomial, Quadratic};

/// Coercive, symmetric mass operator together with its inverse.
#[derive(Debug, Clone)]
pub struct InertiaOperator {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    coercivity: f64,
}

impl InertiaOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidInertia(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInertia("matrix is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let m = eig.eigenvalues.min();
        if !(m > 0.0) {
            return Err(Error::InvalidInertia(format!(
                "matrix is not positive definite (smallest eigenvalue {m})"
            )));
        }
        let inverse = matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInertia("Cholesky factorization failed".into()))?
            .inverse();
        let defect = (&matrix * &inverse - DMatrix::identity(n, n)).norm();
        if defect > 1e-12 * n as f64 {
            return Err(Error::InvalidInertia(format!(
                "inverse is inaccurate (|M M⁻¹ - I| = {defect:.3e})"
            )));
        }
        Ok(Self {
            matrix,
            inverse,
            coercivity: m,
        })
    }

    pub fn scalar(dim: usize, mass: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim) * mass)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Smallest eigenvalue m of M.
    pub fn coercivity(&self) -> f64 {
        self.coercivity
    }

    pub fn apply_inverse(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.inverse * p
    }
}

#[derive(Debug, Clone)]
pub struct PotentialField {
    pub field: Arc<dyn Field>,
    /// Declared global bound K with ‖∇²V‖ ≤ K/2, when known.
    pub hessian_bound: Option<f64>,
}

impl PotentialField {
    pub fn new(field: Arc<dyn Field>) -> Self {
        Self {
            field,
            hessian_bound: None,
        }
    }

    pub fn with_bound(mut self, k: f64) -> Self {
        self.hessian_bound = Some(k);
        self
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.field.value(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.field.gradient(x)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.field.hessian(x)
    }
}

#[derive(Debug, Clone)]
pub struct TerminalCost {
    pub field: Arc<dyn Field>,
}

impl TerminalCost {
    pub fn new(field: Arc<dyn Field>) -> Self {
        Self { field }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.field.value(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.field.gradient(x)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.field.hessian(x)
    }
}

/// The quintuple (V, M, ψ, t0, T) on 𝒳 = ℝⁿ.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub potential: PotentialField,
    pub inertia: InertiaOperator,
    pub terminal: TerminalCost,
    pub t0: f64,
    pub t_final: f64,
}

impl ProblemSpec {
    pub fn new(
        potential: PotentialField,
        inertia: InertiaOperator,
        terminal: TerminalCost,
        t0: f64,
        t_final: f64,
    ) -> Result<Self> {
        let dim = inertia.dim();
        check_dim("potential", dim, potential.field.dim())?;
        check_dim("terminal cost", dim, terminal.field.dim())?;
        if !(t0 >= 0.0 && t0 <= t_final && t_final.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "horizon must satisfy 0 <= t0 <= T, got t0 = {t0}, T = {t_final}"
            )));
        }
        Ok(Self {
            dim,
            potential,
            inertia,
            terminal,
            t0,
            t_final,
        })
    }

    /// Same problem with a different final time.
    pub fn with_horizon(&self, t0: f64, t_final: f64) -> Result<Self> {
        Self::new(
            self.potential.clone(),
            self.inertia.clone(),
            self.terminal.clone(),
            t0,
            t_final,
        )
    }

    pub fn from_doc(doc: &ProblemDoc) -> Result<Self> {
        let inertia = InertiaOperator::new(doc.inertia.build(doc.dim)?)?;
        let mut potential = PotentialField::new(doc.potential.build(doc.dim)?);
        potential.hessian_bound = doc.hessian_bound;
        let terminal = TerminalCost::new(doc.terminal.build(doc.dim)?);
        Self::new(potential, inertia, terminal, doc.t0, doc.t_final)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub(crate) fn check_state(&self, context: &'static str, v: &DVector<f64>) -> Result<()> {
        check_dim(context, self.dim, v.len())
    }
}

/// JSON form of a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub dim: usize,
    pub potential: FieldSpec,
    pub inertia: MatrixSpec,
    pub terminal: FieldSpec,
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_bound: Option<f64>,
}

/// H(x, p) = V(x) + ½⟨p, M⁻¹p⟩, the total energy.
pub fn hamiltonian(spec: &ProblemSpec, x: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    spec.check_state("hamiltonian x", x)?;
    spec.check_state("hamiltonian p", p)?;
    Ok(spec.potential.value(x) + 0.5 * p.dot(&spec.inertia.apply_inverse(p)))
}

/// H̄(x, p, π, ζ) = −½⟨p, M⁻¹p⟩ + V(x) + ⟨π, M⁻¹p⟩ − ⟨ζ, ∇V(x)⟩.
pub fn extended_hamiltonian(
    spec: &ProblemSpec,
    x: &DVector<f64>,
    p: &DVector<f64>,
    pi: &DVector<f64>,
    zeta: &DVector<f64>,
) -> Result<f64> {
    spec.check_state("extended hamiltonian x", x)?;
    spec.check_state("extended hamiltonian p", p)?;
    spec.check_state("extended hamiltonian pi", pi)?;
    spec.check_state("extended hamiltonian zeta", zeta)?;
    let minv_p = spec.inertia.apply_inverse(p);
    Ok(-0.5 * p.dot(&minv_p) + spec.potential.value(x) + pi.dot(&minv_p) - zeta.dot(&spec.potential.gradient(x)))
}

/// l(x, p) = ½⟨p, M⁻¹p⟩ − V(x).
pub fn running_cost_l(spec: &ProblemSpec, x: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    spec.check_state("running cost x", x)?;
    spec.check_state("running cost p", p)?;
    Ok(0.5 * p.dot(&spec.inertia.apply_inverse(p)) - spec.potential.value(x))
}

/// ∇l(x, p) = (−∇V(x), M⁻¹p) stacked as a 2n vector.
pub fn running_cost_gradient(spec: &ProblemSpec, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
    spec.check_state("running cost x", x)?;
    spec.check_state("running cost p", p)?;
    let n = spec.dim;
    let mut g = DVector::zeros(2 * n);
    g.rows_mut(0, n).copy_from(&(-spec.potential.gradient(x)));
    g.rows_mut(n, n).copy_from(&spec.inertia.apply_inverse(p));
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub m_est: f64,
    pub k_est: f64,
    /// Largest h with max(h, 1)·h ≤ m/K; `None` when K = 0 (no bound).
    pub horizon_bound: Option<f64>,
    pub holds_on_samples: bool,
    pub samples: usize,
}

impl AssumptionReport {
    pub fn is_unbounded(&self) -> bool {
        self.horizon_bound.is_none()
    }

    /// Whether T − t lies strictly inside the convexity horizon.
    pub fn covers(&self, horizon: f64) -> bool {
        self.horizon_bound.is_none_or(|h| horizon < h)
    }
}

/// Solves max(h, 1)·h = ratio for h ≥ 0 in closed form.
pub fn horizon_bound(ratio: f64) -> f64 {
    if ratio.is_infinite() {
        f64::INFINITY
    } else if ratio <= 1.0 {
        ratio
    } else {
        ratio.sqrt()
    }
}

/// Bisection on g(h) = max(h, 1)·h − ratio, the cross-check for [`horizon_bound`].
pub fn horizon_bound_bisect(ratio: f64) -> f64 {
    let g = |h: f64| h.max(1.0) * h - ratio;
    let (mut lo, mut hi) = (0.0, ratio.max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn spectral_norm(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.amax()
}

/// Estimates m and K from the inertia operator and sampled hessians, and the
/// convexity horizon they imply.
pub fn check_assumptions(spec: &ProblemSpec, samples: &[DVector<f64>]) -> Result<AssumptionReport> {
    if samples.is_empty() {
        return Err(Error::InvalidProblem("at least one sample state is required".into()));
    }
    let mut v_max: f64 = 0.0;
    let mut psi_max: f64 = 0.0;
    for x in samples {
        spec.check_state("assumption sample", x)?;
        v_max = v_max.max(spectral_norm(&spec.potential.hessian(x)));
        psi_max = psi_max.max(spectral_norm(&spec.terminal.hessian(x)));
    }
    let m_est = spec.inertia.coercivity();
    let k_est = 2.0 * v_max.max(psi_max);
    let bound = if k_est > 0.0 {
        let h = horizon_bound(m_est / k_est);
        debug_assert!((h - horizon_bound_bisect(m_est / k_est)).abs() <= 1e-9 * h.max(1.0));
        Some(h)
    } else {
        None
    };
    let holds = match spec.potential.hessian_bound {
        Some(k) => v_max <= 0.5 * k * (1.0 + 1e-12) && psi_max <= 0.5 * k * (1.0 + 1e-12),
        None => true,
    };
    Ok(AssumptionReport {
        m_est,
        k_est,
        horizon_bound: bound,
        holds_on_samples: holds,
        samples: samples.len(),
    })
}
