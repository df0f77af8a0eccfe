//! Scalar fields on ℝⁿ given as analytic (value, gradient, hessian) triples.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A twice-differentiable scalar field with analytic derivatives.
pub trait Field: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Matrix given in one of three shorthand forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpec {
    Matrix(Vec<Vec<f64>>),
    Diag(Vec<f64>),
    Scalar(f64),
}

impl MatrixSpec {
    pub fn build(&self, dim: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::DimensionError {
                        context: "matrix rows",
                        expected: dim,
                        got: rows.len(),
                    });
                }
                Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
            MatrixSpec::Diag(d) => {
                crate::error::check_dim("diagonal matrix", dim, d.len())?;
                Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
            }
            MatrixSpec::Scalar(s) => Ok(DMatrix::identity(dim, dim) * *s),
        }
    }
}

/// Serializable description of a built-in field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FieldSpec {
    Zero,
    /// ½⟨x, Kx⟩ + ⟨c, x⟩ + d
    Quadratic {
        stiffness: MatrixSpec,
        #[serde(default)]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        constant: f64,
    },
    /// ⟨c, x⟩ + d
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    /// Σᵢ a (xᵢ² − b)²
    DoubleWell {
        a: f64,
        b: f64,
    },
    /// Σᵢ κ (1 − cos xᵢ)
    Pendulum {
        kappa: f64,
    },
    /// Σᵢ Σₖ cₖ xᵢᵏ
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl FieldSpec {
    pub fn build(&self, dim: usize) -> Result<Arc<dyn Field>> {
        if dim == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        Ok(match self {
            FieldSpec::Zero => Arc::new(Quadratic::zero(dim)),
            FieldSpec::Quadratic {
                stiffness,
                linear,
                constant,
            } => {
                let k = stiffness.build(dim)?;
                let c = match linear {
                    Some(c) => {
                        crate::error::check_dim("quadratic linear term", dim, c.len())?;
                        DVector::from_column_slice(c)
                    }
                    None => DVector::zeros(dim),
                };
                Arc::new(Quadratic::new(k, c, *constant))
            }
            FieldSpec::Linear { coeffs, constant } => {
                crate::error::check_dim("linear coefficients", dim, coeffs.len())?;
                Arc::new(Quadratic::new(
                    DMatrix::zeros(dim, dim),
                    DVector::from_column_slice(coeffs),
                    *constant,
                ))
            }
            FieldSpec::DoubleWell { a, b } => Arc::new(DoubleWell { dim, a: *a, b: *b }),
            FieldSpec::Pendulum { kappa } => Arc::new(Pendulum { dim, kappa: *kappa }),
            FieldSpec::Polynomial { coeffs } => Arc::new(Polynomial {
                dim,
                coeffs: coeffs.clone(),
            }),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Quadratic {
    stiffness: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl Quadratic {
    /// The stiffness is symmetrized on construction.
    pub fn new(stiffness: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Self {
        let sym = (&stiffness + stiffness.transpose()) * 0.5;
        Self {
            stiffness: sym,
            linear,
            constant,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim), DVector::zeros(dim), 0.0)
    }
}

impl Field for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.stiffness * x)) + self.linear.dot(x) + self.constant
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.stiffness * x + &self.linear
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.stiffness.clone()
    }
}

#[derive(Debug, Clone)]
pub struct DoubleWell {
    pub dim: usize,
    pub a: f64,
    pub b: f64,
}

impl Field for DoubleWell {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|&xi| self.a * (xi * xi - self.b).powi(2)).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|xi| 4.0 * self.a * xi * (xi * xi - self.b))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.map(|xi| 12.0 * self.a * xi * xi - 4.0 * self.a * self.b))
    }
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    pub dim: usize,
    pub kappa: f64,
}

impl Field for Pendulum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|&xi| self.kappa * (1.0 - xi.cos())).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|xi| self.kappa * xi.sin())
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.map(|xi| self.kappa * xi.cos()))
    }
}

#[derive(Debug, Clone)]
pub struct Polynomial {
    pub dim: usize,
    /// coeffs[k] multiplies xᵢᵏ
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    fn eval(&self, xi: f64, order: usize) -> f64 {
        // Horner on the `order`-th derivative
        let mut acc = 0.0;
        for k in (order..self.coeffs.len()).rev() {
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            acc = acc * xi + self.coeffs[k] * falling;
        }
        acc
    }
}

impl Field for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|&xi| self.eval(xi, 0)).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|xi| self.eval(xi, 1))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.map(|xi| self.eval(xi, 2)))
    }
}

/// Worst relative mismatch between analytic derivatives and central finite
/// differences over `samples`: (gradient vs value, hessian vs gradient).
pub fn derivative_consistency(field: &dyn Field, samples: &[DVector<f64>]) -> (f64, f64) {
    let mut grad_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    for x in samples {
        let g = field.gradient(x);
        let h = field.hessian(x);
        let mut g_fd = DVector::zeros(x.len());
        let mut h_fd = DMatrix::zeros(x.len(), x.len());
        for i in 0..x.len() {
            let step = 1e-5 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            g_fd[i] = (field.value(&xp) - field.value(&xm)) / (2.0 * step);
            let col = (field.gradient(&xp) - field.gradient(&xm)) / (2.0 * step);
            h_fd.set_column(i, &col);
        }
        grad_err = grad_err.max((&g - &g_fd).norm() / (1.0 + g.norm()));
        hess_err = hess_err.max((&h - &h_fd).norm() / (1.0 + h.norm()));
    }
    (grad_err, hess_err)
}
