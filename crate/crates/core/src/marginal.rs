//! Marginal contributions on winsorized outcomes.
//!
//! Both heuristics measure squared error against the winsorized outcome
//! `y*` of a fit, normalized by `RLSV_y = Σ wᵢ (y*ᵢ − S0)²`:
//!
//! * Step I: zero one characteristic's score weights (no refit) and report
//!   the increase `MCI = SSEI/RLSV_y − OF`.
//! * Step II: refit `y*` on an intercept, a candidate characteristic's basis
//!   columns and the current score `s` with its coefficient pinned to 1, and
//!   report the decrease `MCII = OF − SSEII/RLSV_y`.
//!
//! `OF = SSE*/RLSV_y` with `SSE* = Σ wᵢ e*ᵢ²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{bspline_basis, SplineSpec};
use crate::engineered::{fit_engineered_ls, score, weighted_sse, EngineeredProblem};
use crate::error::{Error, Result};
use crate::model::{CharacteristicLayout, Coefficients, ConstraintSet, DesignMatrix, ObservationSet, PenaltySpec};
use crate::robust::RobustFitResult;

/// Columns whose weighted mean exceeds this are reported as uncentered.
pub const CENTERING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    Development,
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step1Objective {
    pub sse_star: f64,
    pub rlsv_y: f64,
    pub of: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub sample: SampleLabel,
    pub of: f64,
    pub rlsv_y: f64,
    pub sse_star: f64,
    pub step1: Vec<Contribution>,
    pub step2: Vec<Contribution>,
}

/// A Step II candidate: its raw values on the sample being evaluated and the
/// spline basis to expand them with.
#[derive(Debug, Clone, PartialEq)]
pub struct Step2Candidate {
    pub name: String,
    pub values: Vec<f64>,
    pub spec: SplineSpec,
}

pub fn step1_objective(fit: &RobustFitResult, w: &DVector<f64>) -> Result<Step1Objective> {
    let sse_star = weighted_sse(&fit.e_star, w)?;
    let centered = fit.y_star.add_scalar(-fit.beta.intercept());
    let rlsv_y = weighted_sse(&centered, w)?;
    let floor = 1e-24 * (1.0 + fit.beta.intercept().powi(2));
    if !(rlsv_y > floor) {
        return Err(Error::DegenerateVariance);
    }
    Ok(Step1Objective {
        sse_star,
        rlsv_y,
        of: sse_star / rlsv_y,
    })
}

/// Step I contribution of `char_name`.
pub fn step1_marginal(
    fit: &RobustFitResult,
    prob: &EngineeredProblem,
    layout: &CharacteristicLayout,
    char_name: &str,
) -> Result<f64> {
    let objective = step1_objective(fit, prob.weights())?;
    step1_with_objective(fit, prob, layout, char_name, &objective)
}

fn step1_with_objective(
    fit: &RobustFitResult,
    prob: &EngineeredProblem,
    layout: &CharacteristicLayout,
    char_name: &str,
    objective: &Step1Objective,
) -> Result<f64> {
    let group = layout
        .get(char_name)
        .ok_or_else(|| Error::UnknownCharacteristic(char_name.to_string()))?;
    let mut zeroed = fit.beta.as_vector().clone();
    for &c in &group.columns {
        if c >= zeroed.len() {
            return Err(Error::dim("characteristic column", zeroed.len(), c + 1));
        }
        zeroed[c] = 0.0;
    }
    let zeroed = Coefficients::new(zeroed)?;
    let e_i = &fit.y_star - score(prob.design(), &zeroed)?;
    let sse_i = weighted_sse(&e_i, prob.weights())?;
    Ok(sse_i / objective.rlsv_y - objective.of)
}

/// Step II contribution of a candidate whose basis columns on this sample
/// are `basis_cols`.
pub fn step2_marginal(
    fit: &RobustFitResult,
    prob: &EngineeredProblem,
    basis_cols: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    let objective = step1_objective(fit, w)?;
    step2_with_objective(fit, prob, basis_cols, w, &objective)
}

fn step2_with_objective(
    fit: &RobustFitResult,
    prob: &EngineeredProblem,
    basis_cols: &DMatrix<f64>,
    w: &DVector<f64>,
    objective: &Step1Objective,
) -> Result<f64> {
    let n = prob.n();
    if basis_cols.nrows() != n {
        return Err(Error::dim("step II basis rows", n, basis_cols.nrows()));
    }
    if w.len() != n {
        return Err(Error::dim("step II weights", n, w.len()));
    }
    let s = score(prob.design(), &fit.beta)?;
    // A partition-of-unity basis duplicates the intercept; one column fewer
    // spans the same space and keeps the auxiliary Hessian nonsingular.
    let partition = basis_cols.ncols() > 0 && basis_cols.row_iter().all(|r| (r.sum() - 1.0).abs() <= 1e-12);
    let q = basis_cols.ncols() - usize::from(partition);
    let basis_cols = basis_cols.columns(0, q);

    // Design [1 | basis | s] with the coefficient of s fixed at 1.
    let mut x_aux = DMatrix::zeros(n, q + 1);
    x_aux.view_mut((0, 0), (n, q)).copy_from(&basis_cols);
    x_aux.set_column(q, &s);
    let aux_obs = ObservationSet::new(
        fit.y_star.iter().copied().collect(),
        x_aux,
        Some(w.iter().copied().collect()),
    )?;
    let pin = ConstraintSet::empty(q + 1).with_equality(&[(q + 1, 1.0)], 1.0)?;
    let aux = EngineeredProblem::new(aux_obs, pin, PenaltySpec::none())?;
    let beta_aux = fit_engineered_ls(&aux, aux.obs().y())?;

    let s_ii = score(aux.design(), &beta_aux)?;
    let e_ii = &fit.y_star - s_ii;
    let sse_ii = weighted_sse(&e_ii, w)?;
    Ok(objective.of - sse_ii / objective.rlsv_y)
}

/// Full report for the sample `prob` was built from. `fit` must carry
/// `e*`/`y*` for that sample (see [`RobustFitResult::rescore`]).
pub fn marginal_report(
    fit: &RobustFitResult,
    prob: &EngineeredProblem,
    layout: &CharacteristicLayout,
    step2: &[Step2Candidate],
    sample: SampleLabel,
) -> Result<MarginalReport> {
    let w = prob.weights();
    if fit.y_star.len() != prob.n() {
        return Err(Error::dim("winsorized outcomes", prob.n(), fit.y_star.len()));
    }
    let objective = step1_objective(fit, w)?;
    let step1 = layout
        .groups()
        .iter()
        .map(|g| {
            Ok(Contribution {
                name: g.name.clone(),
                value: step1_with_objective(fit, prob, layout, &g.name, &objective)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let step2 = step2
        .iter()
        .map(|cand| {
            if cand.values.len() != prob.n() {
                return Err(Error::dim("step II candidate values", prob.n(), cand.values.len()));
            }
            let basis = bspline_basis(&cand.values, &cand.spec)?;
            Ok(Contribution {
                name: cand.name.clone(),
                value: step2_with_objective(fit, prob, &basis, w, &objective)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalReport {
        sample,
        of: objective.of,
        rlsv_y: objective.rlsv_y,
        sse_star: objective.sse_star,
        step1,
        step2,
    })
}

/// Evaluate a development fit on a validation sample: residuals against the
/// development coefficients, winsorized with the development `k`, and the
/// validation sample's own (independently normalized) weights.
pub fn evaluate_on_sample(
    dev_fit: &RobustFitResult,
    val_obs: &ObservationSet,
    layout: &CharacteristicLayout,
    step2: &[Step2Candidate],
) -> Result<MarginalReport> {
    if val_obs.p() + 1 != dev_fit.beta.len() {
        return Err(Error::dim("validation columns", dev_fit.beta.len(), val_obs.p() + 1));
    }
    let val_prob = EngineeredProblem::unconstrained(val_obs.clone())?;
    let val_fit = dev_fit.rescore(&val_prob)?;
    marginal_report(&val_fit, &val_prob, layout, step2, SampleLabel::Validation)
}

/// Non-intercept design columns whose weighted mean is not (numerically)
/// zero. The intercept is only a robust location estimate when every
/// characteristic is centered.
pub fn uncentered_columns(design: &DesignMatrix, w: &DVector<f64>) -> Vec<usize> {
    let means = design.matrix().tr_mul(w);
    (1..design.ncols())
        .filter(|&c| means[c].abs() > CENTERING_TOL)
        .collect()
}
