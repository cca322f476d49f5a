//! Linear matrix inequality problems and a primal-dual interior-point
//! solver for them.
//!
//! A problem is stated in the form
//!
//! ```text
//! minimize    cᵀ y
//! subject to  F_j(y) = F_j0 + Σ_i y_i F_ji ⪰ 0     (dense symmetric blocks)
//!             g_l(y) = g_l0 + Σ_i y_i g_li ≥ 0     (scalar rows)
//! ```
//!
//! which is the dual of a standard-form SDP. [`solve`] returns `y` together
//! with the primal multipliers and convergence diagnostics.

mod ipm;

use nalgebra::{DMatrix, DVector};

pub use ipm::solve;

/// Symmetric matrix that is affine in the decision vector.
#[derive(Debug, Clone)]
pub struct AffineMatrix {
    pub constant: DMatrix<f64>,
    /// Sparse list of `(variable index, coefficient)`; coefficients are symmetric.
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineMatrix {
    pub fn new(constant: DMatrix<f64>) -> Self {
        assert!(constant.is_square(), "affine matrix must be square");
        Self {
            constant,
            terms: Vec::new(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    /// Adds `y_var * coeff`. Repeated variables accumulate.
    pub fn add_term(&mut self, var: usize, coeff: DMatrix<f64>) {
        assert_eq!(coeff.shape(), self.constant.shape());
        if let Some((_, c)) = self.terms.iter_mut().find(|(v, _)| *v == var) {
            *c += coeff;
        } else {
            self.terms.push((var, coeff));
        }
    }

    pub fn eval(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (v, c) in &self.terms {
            m += c * y[*v];
        }
        m
    }

    /// Returns `-self`.
    pub fn negated(&self) -> Self {
        Self {
            constant: -&self.constant,
            terms: self.terms.iter().map(|(v, c)| (*v, -c)).collect(),
        }
    }

    /// Returns `self - shift * I`.
    pub fn shifted(mut self, shift: f64) -> Self {
        for i in 0..self.dim() {
            self.constant[(i, i)] -= shift;
        }
        self
    }
}

/// Scalar affine expression.
#[derive(Debug, Clone, Default)]
pub struct AffineScalar {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineScalar {
    pub fn var(var: usize) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(var, 1.0)],
        }
    }

    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * y[*v]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub n_vars: usize,
    pub objective: DVector<f64>,
    pub lmis: Vec<AffineMatrix>,
    pub nonneg: Vec<AffineScalar>,
}

impl LmiProblem {
    pub fn new(objective: DVector<f64>) -> Self {
        Self {
            n_vars: objective.len(),
            objective,
            lmis: Vec::new(),
            nonneg: Vec::new(),
        }
    }

    pub fn add_lmi(&mut self, lmi: AffineMatrix) {
        debug_assert!(lmi.terms.iter().all(|(v, _)| *v < self.n_vars));
        self.lmis.push(lmi);
    }

    pub fn add_nonneg(&mut self, row: AffineScalar) {
        self.nonneg.push(row);
    }

    /// Smallest eigenvalue of each LMI block at `y`.
    pub fn lmi_min_eigenvalues(&self, y: &DVector<f64>) -> Vec<f64> {
        self.lmis
            .iter()
            .map(|b| crate::linalg::min_eigenvalue(&b.eval(y)))
            .collect()
    }

    /// Largest violation `max(0, -g_l(y))` over the scalar rows.
    pub fn nonneg_violation(&self, y: &DVector<f64>) -> f64 {
        self.nonneg.iter().map(|r| (-r.eval(y)).max(0.0)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Relative duality gap and primal residual tolerance.
    pub tol: f64,
    /// Relative LMI residual required before the solver reports `Optimal`.
    pub tol_lmi: f64,
    /// Threshold for declaring infeasibility from a diverging multiplier.
    pub tol_infeasible: f64,
    /// Gap and residual accepted for `NearOptimal` when progress stops.
    pub tol_near: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            tol_lmi: 1e-12,
            tol_infeasible: 1e-8,
            tol_near: 1e-5,
            max_iter: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Progress stopped before `tol`, but the returned `y` satisfies the
    /// LMIs up to rounding and the gap is within `tol_near`. Typical when
    /// the infimum is not attained.
    NearOptimal,
    /// No `y` satisfies the constraints.
    Infeasible,
    /// The objective is unbounded below.
    Unbounded,
    /// Stopped before meeting tolerances.
    MaxIterations,
    NumericalFailure,
}

/// Primal iterates retained for warm starting a related problem.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub y: DVector<f64>,
    pub x_blocks: Vec<DMatrix<f64>>,
    pub z_blocks: Vec<DMatrix<f64>>,
    pub x_lin: DVector<f64>,
    pub z_lin: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Relative duality gap at exit.
    pub gap: f64,
    /// Relative residual of the multiplier equations at exit.
    pub multiplier_residual: f64,
    /// Relative residual of the LMI slack equations at exit.
    pub lmi_residual: f64,
    pub warm: Option<WarmStart>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}
