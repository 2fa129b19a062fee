//! `serls-model/1`: a JSON document holding the fitted coefficients, the
//! robust-loop summary and the fully resolved run config.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so coefficients survive a write/read cycle bit for bit. The payload has no
//! timestamps: identical inputs give byte-identical files.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::{CliError, CliResult};
use crate::engineered::EngineeredProblem;
use crate::model::Coefficients;
use crate::qp::QpStatus;
use crate::robust::{IterationRecord, RobustFitResult};

pub const MODEL_SCHEMA: &str = "serls-model/1";
pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub robust: bool,
    pub m: f64,
    pub epsilon: f64,
    pub sigma: f64,
    /// `None` when no winsorization was applied (`k = ∞`).
    pub k: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate_scale: bool,
    pub qp_status: QpStatus,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub coefficients: Vec<NamedValue>,
    pub lambda: f64,
    pub fit: FitSummary,
    pub config: RunConfig,
}

impl ModelFile {
    pub fn from_fit(cfg: &RunConfig, fit: &RobustFitResult) -> Self {
        let names = std::iter::once(INTERCEPT_NAME).chain(cfg.columns.iter().map(String::as_str));
        let coefficients = names
            .zip(fit.beta.as_vector().iter())
            .map(|(name, &value)| NamedValue {
                name: name.to_string(),
                value,
            })
            .collect();
        Self {
            schema: MODEL_SCHEMA.to_string(),
            coefficients,
            lambda: cfg.lambda,
            fit: FitSummary {
                robust: cfg.robust.enabled,
                m: cfg.robust.m,
                epsilon: fit.epsilon,
                sigma: fit.sigma,
                k: fit.k.is_finite().then_some(fit.k),
                converged: fit.converged,
                iterations: fit.iterations,
                degenerate_scale: fit.degenerate_scale,
                qp_status: fit.qp_status,
                trace: fit.trace.clone(),
            },
            config: cfg.clone(),
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Data(format!("cannot serialize model: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not a model file: {e}", path.display())))?;
        if model.schema != MODEL_SCHEMA {
            return Err(CliError::Data(format!(
                "{}: unsupported schema `{}` (expected `{MODEL_SCHEMA}`)",
                path.display(),
                model.schema
            )));
        }
        model.check_consistent()?;
        Ok(model)
    }

    fn check_consistent(&self) -> CliResult<()> {
        let expected: Vec<&str> = std::iter::once(INTERCEPT_NAME)
            .chain(self.config.columns.iter().map(String::as_str))
            .collect();
        let actual: Vec<&str> = self.coefficients.iter().map(|c| c.name.as_str()).collect();
        if expected != actual {
            return Err(CliError::Data(format!(
                "model coefficients {actual:?} do not match its design columns {expected:?}"
            )));
        }
        Ok(())
    }

    /// Design column names (excluding the intercept).
    pub fn columns(&self) -> &[String] {
        &self.config.columns
    }

    pub fn beta(&self) -> CliResult<Coefficients> {
        let v = DVector::from_iterator(self.coefficients.len(), self.coefficients.iter().map(|c| c.value));
        Ok(Coefficients::new(v)?)
    }

    pub fn k(&self) -> f64 {
        self.fit.k.unwrap_or(f64::INFINITY)
    }

    /// Rebuild the fit on `prob`'s sample: stored `β` and `k`, with `e*` and
    /// `y*` recomputed there.
    pub fn fit_on(&self, prob: &EngineeredProblem) -> CliResult<RobustFitResult> {
        let beta = self.beta()?;
        if beta.len() != prob.design().ncols() {
            return Err(CliError::Data(format!(
                "model has {} coefficients but the data design has {} columns",
                beta.len(),
                prob.design().ncols()
            )));
        }
        let stored = RobustFitResult {
            initial_beta: beta.clone(),
            beta,
            iterations: self.fit.iterations,
            sigma: self.fit.sigma,
            k: self.k(),
            e_star: DVector::zeros(0),
            y_star: DVector::zeros(0),
            converged: self.fit.converged,
            degenerate_scale: self.fit.degenerate_scale,
            epsilon: self.fit.epsilon,
            trace: self.fit.trace.clone(),
            qp_status: self.fit.qp_status,
        };
        Ok(stored.rescore(prob)?)
    }
}
