//! Huber M-regression by iterative winsorization.
//!
//! Starting from the score-engineered least squares fit, each iteration
//! estimates the residual scale `σ = 1.483·wtmedian(|e|, w)`, clips the
//! residuals at `k = m·σ`, forms the pseudo-outcome `y* = Xrβ + e*` and
//! re-solves the same quadratic program against `y*`. Only the linear term
//! of the program changes between iterations; H and the constraint blocks
//! are built once.
//!
//! A fixed point of the iteration is a minimizer of `Σ wᵢ ρ(yᵢ − (Xrβ)ᵢ; k)`
//! under the score-engineering constraints, where `ρ` is the Huber loss.

use std::cmp::Ordering;

use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engineered::{build_engineered_qp, score, solve_engineered, EngineeredProblem};
use crate::error::{Error, Result};
use crate::model::Coefficients;
use crate::qp::QpStatus;

/// Multiplier turning the weighted median absolute residual into a standard
/// deviation estimate for normal errors.
pub const ROBUST_SCALE_FACTOR: f64 = 1.483;

pub const DEFAULT_WINSOR_MULTIPLE: f64 = 1.5;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

/// Scale below which winsorization is considered degenerate, relative to
/// `1 + Σ wᵢ|yᵢ|`.
const DEGENERATE_SCALE: f64 = 1e-12;

/// `ρ(e) = e²` for `|e| ≤ k`, `2k|e| − k²` beyond.
pub fn huber_loss(e: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Huber threshold must be positive, got {k}"
        )));
    }
    Ok(if e > k {
        2.0 * k * e - k * k
    } else if e < -k {
        -2.0 * k * e - k * k
    } else {
        e * e
    })
}

/// Lower weighted median: the smallest `x` (in sorted order) at which the
/// cumulative weight reaches half the total. Minimizes `Σ wᵢ|xᵢ − m|`.
pub fn weighted_median(x: &[f64], w: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidInput("weighted median of an empty vector".into()));
    }
    if x.len() != w.len() {
        return Err(Error::dim("weighted median", x.len(), w.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in weighted median".into()));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidWeights(
            "weighted median needs nonnegative weights".into(),
        ));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights("weighted median needs a positive weight".into()));
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let half = 0.5 * total - 1e-12 * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += w[i];
        if cum >= half && w[i] > 0.0 {
            return Ok(x[i]);
        }
    }
    Ok(x[*order.last().expect("non-empty")])
}

/// `σ = 1.483 · wtmedian(|e|, w)`.
pub fn robust_scale(abs_errors: &[f64], w: &[f64]) -> Result<f64> {
    if abs_errors.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidInput("robust scale needs absolute residuals".into()));
    }
    Ok(ROBUST_SCALE_FACTOR * weighted_median(abs_errors, w)?)
}

/// Clip residuals to `[−k, k]`.
pub fn winsorize_residuals(e: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "winsorization threshold must be positive, got {k}"
        )));
    }
    Ok(e.map(|v| v.clamp(-k, k)))
}

/// Winsorized residuals and outcomes for fitted values `fitted` and
/// threshold `k`. Observations inside the threshold keep their raw `y`
/// (bit for bit), so an iteration that clips nothing re-solves the exact
/// same program. `k = 0` collapses everything onto the fit; `k = ∞` is the
/// identity.
fn winsorize_outcome(y: &DVector<f64>, fitted: &DVector<f64>, k: f64) -> (DVector<f64>, DVector<f64>) {
    let n = y.len();
    let mut e_star = DVector::zeros(n);
    let mut y_star = DVector::zeros(n);
    for i in 0..n {
        let e = y[i] - fitted[i];
        if e.abs() <= k {
            e_star[i] = e;
            y_star[i] = y[i];
        } else {
            let clipped = k.copysign(e);
            e_star[i] = clipped;
            y_star[i] = fitted[i] + clipped;
        }
    }
    (e_star, y_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    /// `M`: the loop runs while the iteration counter is below this.
    pub max_iterations: usize,
    /// `ε`: convergence bound on `max|β_prev − β|`. `None` resolves to
    /// `1e-6·(1 + max|β_initial|)`.
    pub epsilon: Option<f64>,
    /// `m`: winsorization threshold in units of the robust scale.
    pub m: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            epsilon: None,
            m: DEFAULT_WINSOR_MULTIPLE,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
            }
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidInput(format!("m must be positive, got {}", self.m)));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sigma: f64,
    pub k: f64,
    pub max_change: f64,
    /// Largest score-engineering constraint violation at this iterate.
    pub max_violation: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustFitResult {
    pub beta: Coefficients,
    /// Iteration counter `c` at exit (1 means only the initial fit ran).
    pub iterations: usize,
    pub sigma: f64,
    /// Final threshold. Infinite for a plain least squares result.
    pub k: f64,
    pub e_star: DVector<f64>,
    pub y_star: DVector<f64>,
    pub converged: bool,
    /// σ collapsed to zero; see [`fit_robust`].
    pub degenerate_scale: bool,
    pub epsilon: f64,
    pub initial_beta: Coefficients,
    pub trace: Vec<IterationRecord>,
    pub qp_status: QpStatus,
}

impl RobustFitResult {
    /// Plain least squares viewed as a fit with no winsorization
    /// (`k = ∞`, `y* = y`).
    pub fn least_squares(prob: &EngineeredProblem) -> Result<Self> {
        let y = prob.obs().y();
        let fit = solve_engineered(&build_engineered_qp(prob, y)?)?;
        let fitted = score(prob.design(), &fit.coefficients)?;
        let abs_e: Vec<f64> = (y - &fitted).iter().map(|v| v.abs()).collect();
        let sigma = robust_scale(&abs_e, prob.weights().as_slice())?;
        let (e_star, y_star) = winsorize_outcome(y, &fitted, f64::INFINITY);
        Ok(Self {
            initial_beta: fit.coefficients.clone(),
            beta: fit.coefficients,
            iterations: 1,
            sigma,
            k: f64::INFINITY,
            e_star,
            y_star,
            converged: true,
            degenerate_scale: false,
            epsilon: 0.0,
            trace: Vec::new(),
            qp_status: fit.solution.status,
        })
    }

    /// Apply this fit's coefficients and threshold to another sample of the
    /// same design layout, recomputing `e*` and `y*` there.
    pub fn rescore(&self, prob: &EngineeredProblem) -> Result<Self> {
        let fitted = score(prob.design(), &self.beta)?;
        let (e_star, y_star) = winsorize_outcome(prob.obs().y(), &fitted, self.k);
        Ok(Self {
            e_star,
            y_star,
            ..self.clone()
        })
    }
}

/// Score-engineered robust least squares.
///
/// The loop runs while `max|β_prev − β| > ε` and `c < M`. Residuals are
/// always taken against the raw `y`. If the robust scale collapses (more
/// than half the weight on exactly fitted points) the loop stops with
/// `converged = true`, `k = 0`, `e* = 0` and `degenerate_scale` set.
///
/// The returned `e*`, `y*` are computed at the returned `β` with the final
/// `k`, so `y* = Xrβ + e*` holds for the reported coefficients.
pub fn fit_robust(prob: &EngineeredProblem, cfg: &RobustConfig) -> Result<RobustFitResult> {
    cfg.validate()?;
    let y = prob.obs().y();
    let w = prob.weights();
    let xr = prob.design().matrix();

    let mut qp = build_engineered_qp(prob, y)?;
    let initial = solve_engineered(&qp)?;
    let initial_beta = initial.coefficients;
    let mut qp_status = initial.solution.status;
    let mut beta = initial_beta.as_vector().clone();

    let epsilon = cfg.epsilon.unwrap_or(1e-6 * (1.0 + beta.amax()));
    let scale_floor = DEGENERATE_SCALE * (1.0 + w.dot(&y.abs()));

    let mut c = 1;
    let mut beta_old = beta.clone();
    beta_old[0] = beta[0] + 2.0 * epsilon;
    let mut sigma_k: Option<(f64, f64)> = None;
    let mut degenerate_scale = false;
    let mut trace = Vec::new();

    while (&beta_old - &beta).amax() > epsilon && c < cfg.max_iterations {
        beta_old = beta.clone();
        c += 1;
        let fitted = xr * &beta;
        let abs_e: Vec<f64> = (y - &fitted).iter().map(|v| v.abs()).collect();
        let sigma = robust_scale(&abs_e, w.as_slice())?;
        if sigma < scale_floor {
            warn!("robust scale collapsed to {sigma:.3e} at iteration {c}; stopping");
            degenerate_scale = true;
            sigma_k = Some((sigma, 0.0));
            break;
        }
        let k = cfg.m * sigma;
        sigma_k = Some((sigma, k));
        let (_, y_star) = winsorize_outcome(y, &fitted, k);
        let step = prob
            .linear_term(&y_star)
            .and_then(|f| qp.set_linear_term(f))
            .and_then(|_| solve_engineered(&qp))
            .map_err(|e| Error::RobustIteration {
                iteration: c,
                source: Box::new(e),
            })?;
        qp_status = step.solution.status;
        beta = step.coefficients.into_inner();
        let max_change = (&beta_old - &beta).amax();
        debug!("robust iteration {c}: sigma {sigma:.6e}, k {k:.6e}, max change {max_change:.3e}");
        trace.push(IterationRecord {
            iteration: c,
            sigma,
            k,
            max_change,
            max_violation: prob.constraints().max_violation(&beta),
            beta: beta.iter().copied().collect(),
        });
    }

    let converged = (&beta_old - &beta).amax() <= epsilon;
    let fitted = xr * &beta;
    let (sigma, k) = match sigma_k {
        Some(sk) => sk,
        None => {
            // No loop iteration ran (M = 1): report the scale at the
            // initial fit.
            let abs_e: Vec<f64> = (y - &fitted).iter().map(|v| v.abs()).collect();
            let sigma = robust_scale(&abs_e, w.as_slice())?;
            if sigma < scale_floor {
                degenerate_scale = true;
                (sigma, 0.0)
            } else {
                (sigma, cfg.m * sigma)
            }
        }
    };
    let (e_star, y_star) = winsorize_outcome(y, &fitted, k);

    Ok(RobustFitResult {
        beta: Coefficients::new(beta)?,
        iterations: c,
        sigma,
        k,
        e_star,
        y_star,
        converged,
        degenerate_scale,
        epsilon,
        initial_beta,
        trace,
        qp_status,
    })
}

/// `Σ wᵢ ρ(yᵢ − (Xrβ)ᵢ; k)`.
pub fn huber_objective(beta: &Coefficients, prob: &EngineeredProblem, k: f64) -> Result<f64> {
    let resid = prob.obs().y() - score(prob.design(), beta)?;
    resid
        .iter()
        .zip(prob.weights().iter())
        .try_fold(0.0, |acc, (e, w)| Ok(acc + w * huber_loss(*e, k)?))
}
