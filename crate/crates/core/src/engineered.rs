//! Score-engineered weighted least squares.
//!
//! Minimizes `(y − Xrβ)ᵀW(y − Xrβ) + (λ/n)·βᵀ Ir β` subject to the
//! constraint blocks of a [`ConstraintSet`]. `Ir` is the identity with the
//! intercept entry zeroed, so `S0` is never penalized. In quadratic-program
//! form:
//!
//! ```text
//! H   = 2 (XrᵀW Xr + (λ/n) Ir)      f   = −2 XrᵀW y
//! Aeq = [Air; Acr]                  beq = [IW; 0]
//! A   = Apr                         b   = 0
//! ```
//!
//! H and the constraint blocks depend only on the design, so a program built
//! once can be re-solved against a new target by swapping `f`.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{assemble_design, Coefficients, ConstraintSet, DesignMatrix, ObservationSet, PenaltySpec};
use crate::qp::{solve_qp, QpSolution, QpStatus, QuadraticProgram, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredProblem {
    obs: ObservationSet,
    design: DesignMatrix,
    constraints: ConstraintSet,
    penalty: PenaltySpec,
}

impl EngineeredProblem {
    pub fn new(obs: ObservationSet, constraints: ConstraintSet, penalty: PenaltySpec) -> Result<Self> {
        if constraints.p() != obs.p() {
            return Err(Error::dim("constraint columns", obs.p() + 1, constraints.p() + 1));
        }
        let design = assemble_design(&obs)?;
        Ok(Self {
            obs,
            design,
            constraints,
            penalty,
        })
    }

    /// No constraints and no penalty.
    pub fn unconstrained(obs: ObservationSet) -> Result<Self> {
        let p = obs.p();
        Self::new(obs, ConstraintSet::empty(p), PenaltySpec::none())
    }

    pub fn obs(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn penalty(&self) -> PenaltySpec {
        self.penalty
    }

    pub fn n(&self) -> usize {
        self.obs.n()
    }

    pub fn weights(&self) -> &DVector<f64> {
        self.obs.weights()
    }

    /// `f = −2·Xrᵀ(w ∘ y_target)`.
    pub fn linear_term(&self, y_target: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        if y_target.len() != n {
            return Err(Error::dim("target vector", n, y_target.len()));
        }
        if y_target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite target value".into()));
        }
        let wy = self.obs.weights().component_mul(y_target);
        Ok(self.design.matrix().tr_mul(&wy) * -2.0)
    }

    /// Weighted SSE plus `(λ/n)‖S‖²` at `beta`, with the constant `yᵀWy`
    /// that the quadratic program drops added back.
    pub fn objective_value(&self, beta: &Coefficients, y_target: &DVector<f64>) -> Result<f64> {
        let fitted = score(&self.design, beta)?;
        let sse = weighted_sse(&(y_target - fitted), self.obs.weights())?;
        let s_norm2: f64 = beta.scores().iter().map(|s| s * s).sum();
        Ok(sse + self.penalty.lambda() / self.n() as f64 * s_norm2)
    }
}

/// Assemble the quadratic program for fitting `y_target`.
pub fn build_engineered_qp(prob: &EngineeredProblem, y_target: &DVector<f64>) -> Result<QuadraticProgram> {
    let xr = prob.design.matrix();
    let cols = xr.ncols();
    let w = prob.obs.weights();

    let mut weighted = xr.clone();
    for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    let gram = xr.tr_mul(&weighted);
    let ridge = prob.penalty.lambda() / prob.n() as f64;
    let h = DMatrix::from_fn(cols, cols, |i, j| {
        let g = 0.5 * (gram[(i, j)] + gram[(j, i)]);
        let pen = if i == j && i > 0 { ridge } else { 0.0 };
        2.0 * (g + pen)
    });

    let c = &prob.constraints;
    let (mi, mc) = (c.air().nrows(), c.acr().nrows());
    let mut a_eq = DMatrix::zeros(mi + mc, cols);
    a_eq.view_mut((0, 0), (mi, cols)).copy_from(c.air());
    a_eq.view_mut((mi, 0), (mc, cols)).copy_from(c.acr());
    let mut b_eq = DVector::zeros(mi + mc);
    b_eq.rows_mut(0, mi).copy_from(c.iw());

    QuadraticProgram::new(h, prob.linear_term(y_target)?)?
        .with_equalities(a_eq, b_eq)?
        .with_inequalities(c.apr().clone(), DVector::zeros(c.apr().nrows()))
}

/// Fitted coefficients together with the solver's certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredFit {
    pub coefficients: Coefficients,
    pub solution: QpSolution,
}

/// Solve an already assembled program, mapping solver failures to errors.
/// A degenerate (shifted) solve is accepted.
pub fn solve_engineered(qp: &QuadraticProgram) -> Result<EngineeredFit> {
    let solution = solve_qp(qp, DEFAULT_TOL, qp.default_max_iter())?;
    match solution.status {
        QpStatus::Optimal => {}
        QpStatus::Degenerate => {
            warn!(
                "score-engineered program is degenerate (kkt residual {:.3e}); using regularized solution",
                solution.kkt_residual
            );
        }
        QpStatus::Infeasible => {
            return Err(Error::Infeasible {
                certificate: solution.certificate.expect("infeasible solutions carry a certificate"),
            });
        }
        QpStatus::MaxIterations => {
            return Err(Error::QpFailed {
                status: solution.status,
                iterations: solution.iterations,
            });
        }
    }
    Ok(EngineeredFit {
        coefficients: Coefficients::new(solution.beta.clone())?,
        solution,
    })
}

pub fn fit_engineered_ls_detailed(prob: &EngineeredProblem, y_target: &DVector<f64>) -> Result<EngineeredFit> {
    solve_engineered(&build_engineered_qp(prob, y_target)?)
}

pub fn fit_engineered_ls(prob: &EngineeredProblem, y_target: &DVector<f64>) -> Result<Coefficients> {
    Ok(fit_engineered_ls_detailed(prob, y_target)?.coefficients)
}

/// `Xr·β`.
pub fn score(design: &DesignMatrix, beta: &Coefficients) -> Result<DVector<f64>> {
    if beta.len() != design.ncols() {
        return Err(Error::dim("coefficients", design.ncols(), beta.len()));
    }
    Ok(design.matrix() * beta.as_vector())
}

/// `Σ wᵢ eᵢ²`.
pub fn weighted_sse(errors: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    if errors.len() != w.len() {
        return Err(Error::dim("weighted SSE", w.len(), errors.len()));
    }
    Ok(errors.iter().zip(w.iter()).map(|(e, w)| w * e * e).sum())
}
