//! The `fit`, `mc` and `predict` verbs.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use super::config::RunConfig;
use super::data::Table;
use super::model_file::{ModelFile, NamedValue};
use super::report::{render_fit, render_mc, CharacteristicWeights, ConstraintResiduals, FitReport, McReport};
use super::{CliError, CliResult};
use crate::engineered::{score, EngineeredProblem};
use crate::marginal::{
    evaluate_on_sample, marginal_report, step1_objective, uncentered_columns, SampleLabel, Step2Candidate,
};
use crate::model::DesignMatrix;
use crate::robust::{fit_robust, RobustFitResult};

pub const MODEL_FILE: &str = "model.json";
pub const FIT_REPORT: &str = "fit_report";
pub const MC_REPORT: &str = "mc_report";
pub const SCORED_FILE: &str = "scored.csv";

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub config: PathBuf,
    /// Overrides the config's output directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: ModelFile,
    pub report: FitReport,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct McOptions {
    /// Supplies `step2` and `validation` (and the default model location).
    pub config: Option<PathBuf>,
    /// Defaults to `<output>/model.json` of the config.
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct McOutcome {
    pub report: McReport,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct PredictOptions {
    pub config: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Defaults to the config's development data.
    pub data: Option<PathBuf>,
    /// Output CSV path. Defaults to `scored.csv` in the output directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub scores: Vec<f64>,
    pub output: PathBuf,
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, &text)
}

fn build_problem(cfg: &RunConfig, table: &Table) -> CliResult<EngineeredProblem> {
    let obs = table.observations(cfg)?;
    Ok(EngineeredProblem::new(obs, cfg.constraint_set()?, cfg.penalty()?)?)
}

/// Fill missing Step II domains with the development range of the column.
fn resolve_step2_domains(cfg: &mut RunConfig, table: &Table) -> CliResult<()> {
    for spec in &mut cfg.step2 {
        if spec.domain.is_none() {
            let values = table.numeric_column(&spec.column)?;
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            spec.domain = Some([lo, hi]);
        }
        spec.spline()?;
    }
    Ok(())
}

fn step2_candidates(cfg: &RunConfig, table: &Table) -> CliResult<Vec<Step2Candidate>> {
    cfg.step2
        .iter()
        .map(|s| {
            Ok(Step2Candidate {
                name: s.name.clone(),
                values: table.numeric_column(&s.column)?,
                spec: s.spline()?,
            })
        })
        .collect()
}

fn constraint_residuals(prob: &EngineeredProblem, fit: &RobustFitResult) -> ConstraintResiduals {
    let c = prob.constraints();
    let beta = fit.beta.as_vector();
    let eq = c.air() * beta - c.iw();
    ConstraintResiduals {
        equality: eq.iter().copied().collect(),
        zero: (c.acr() * beta).iter().copied().collect(),
        inequality: (c.apr() * beta).iter().copied().collect(),
        max_violation: c.max_violation(beta),
    }
}

fn fit_report(cfg: &RunConfig, prob: &EngineeredProblem, fit: &RobustFitResult) -> CliResult<FitReport> {
    let beta = fit.beta.as_vector();
    let layout = cfg.layout()?;
    let characteristics = layout
        .groups()
        .iter()
        .map(|g| CharacteristicWeights {
            name: g.name.clone(),
            coefficients: g
                .columns
                .iter()
                .map(|&c| NamedValue {
                    name: cfg.columns[c - 1].clone(),
                    value: beta[c],
                })
                .collect(),
        })
        .collect();

    let mut warnings = Vec::new();
    let uncentered = uncentered_columns(prob.design(), prob.weights());
    if !uncentered.is_empty() {
        let names: Vec<&str> = uncentered.iter().map(|&c| cfg.columns[c - 1].as_str()).collect();
        let msg = format!(
            "columns with nonzero weighted mean (intercept is not a location estimate): {}",
            names.join(", ")
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    if fit.degenerate_scale {
        warnings.push("robust scale collapsed to zero; no winsorization applied".into());
    }
    if cfg.robust.enabled && !fit.converged {
        let msg = format!(
            "robust loop stopped after {} iterations without converging",
            fit.iterations
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let w = prob.weights();
    let (of, sse_star, rlsv_y) = match step1_objective(fit, w) {
        Ok(o) => (Some(o.of), o.sse_star, o.rlsv_y),
        Err(crate::Error::DegenerateVariance) => {
            warnings.push("winsorized outcome has zero variance about the intercept; OF undefined".into());
            (None, crate::engineered::weighted_sse(&fit.e_star, w)?, 0.0)
        }
        Err(e) => return Err(e.into()),
    };

    Ok(FitReport {
        n: prob.n(),
        intercept: fit.beta.intercept(),
        characteristics,
        of,
        sse_star,
        rlsv_y,
        robust: cfg.robust.enabled,
        sigma: fit.sigma,
        k: fit.k.is_finite().then_some(fit.k),
        converged: fit.converged,
        iterations: fit.iterations,
        degenerate_scale: fit.degenerate_scale,
        constraints: constraint_residuals(prob, fit),
        warnings,
        fitted_scores: score(prob.design(), &fit.beta)?.iter().copied().collect(),
    })
}

/// Fit the configured model and write `model.json`, `fit_report.txt` and
/// `fit_report.json` into the output directory.
pub fn fit(opts: &FitOptions) -> CliResult<FitOutcome> {
    let mut cfg = RunConfig::load(&opts.config)?;
    if let Some(out) = &opts.output {
        cfg.output = out.clone();
    }
    let table = Table::read(&cfg.data)?;
    table.require(&cfg.mc_columns())?;
    resolve_step2_domains(&mut cfg, &table)?;

    let prob = build_problem(&cfg, &table)?;
    let fit = if cfg.robust.enabled {
        fit_robust(&prob, &cfg.robust_config())?
    } else {
        RobustFitResult::least_squares(&prob)?
    };
    info!(
        "fit {} rows, {} columns: {} iteration(s), converged = {}",
        prob.n(),
        cfg.p(),
        fit.iterations,
        fit.converged
    );

    let model = ModelFile::from_fit(&cfg, &fit);
    let report = fit_report(&cfg, &prob, &fit)?;

    ensure_dir(&cfg.output)?;
    model.write(&cfg.output.join(MODEL_FILE))?;
    write_json(&cfg.output.join(format!("{FIT_REPORT}.json")), &report)?;
    write_file(&cfg.output.join(format!("{FIT_REPORT}.txt")), &render_fit(&report))?;
    Ok(FitOutcome {
        model,
        report,
        output_dir: cfg.output,
    })
}

fn locate_model(config: Option<&RunConfig>, model: Option<&PathBuf>) -> CliResult<PathBuf> {
    match (model, config) {
        (Some(m), _) => Ok(m.clone()),
        (None, Some(cfg)) => Ok(cfg.output.join(MODEL_FILE)),
        (None, None) => Err(CliError::Config("either --config or --model is required".into())),
    }
}

/// Marginal contributions on the development sample and, when configured,
/// the validation sample. Writes `mc_report.txt` and `mc_report.json`.
pub fn mc(opts: &McOptions) -> CliResult<McOutcome> {
    let given = opts.config.as_deref().map(RunConfig::load).transpose()?;
    let model = ModelFile::read(&locate_model(given.as_ref(), opts.model.as_ref())?)?;
    let mut cfg = model.config.clone();
    if let Some(given) = &given {
        if given.columns != cfg.columns {
            return Err(CliError::Data(format!(
                "config design columns {:?} do not match the model's {:?}",
                given.columns, cfg.columns
            )));
        }
        cfg.step2 = given.step2.clone();
        cfg.validation = given.validation.clone();
        cfg.output = given.output.clone();
    }
    if let Some(out) = &opts.output {
        cfg.output = out.clone();
    }

    let dev = Table::read(&cfg.data)?;
    dev.require(&cfg.mc_columns())?;
    resolve_step2_domains(&mut cfg, &dev)?;
    let layout = cfg.layout()?;
    let dev_prob = build_problem(&cfg, &dev)?;
    let dev_fit = model.fit_on(&dev_prob)?;
    let development = marginal_report(
        &dev_fit,
        &dev_prob,
        &layout,
        &step2_candidates(&cfg, &dev)?,
        SampleLabel::Development,
    )?;

    let validation = match &cfg.validation {
        None => None,
        Some(path) => {
            let val = Table::read(path)?;
            val.require(&cfg.mc_columns())?;
            let obs = val.observations(&cfg)?;
            Some(evaluate_on_sample(
                &dev_fit,
                &obs,
                &layout,
                &step2_candidates(&cfg, &val)?,
            )?)
        }
    };

    let report = McReport {
        development,
        validation,
    };
    ensure_dir(&cfg.output)?;
    write_json(&cfg.output.join(format!("{MC_REPORT}.json")), &report)?;
    write_file(&cfg.output.join(format!("{MC_REPORT}.txt")), &render_mc(&report))?;
    Ok(McOutcome {
        report,
        output_dir: cfg.output,
    })
}

/// Append a `score` column to every row of the input. Columns the model does
/// not use are passed through unchanged.
pub fn predict(opts: &PredictOptions) -> CliResult<PredictOutcome> {
    let given = opts.config.as_deref().map(RunConfig::load).transpose()?;
    let model_path = locate_model(given.as_ref(), opts.model.as_ref())?;
    let model = ModelFile::read(&model_path)?;
    let data = opts
        .data
        .clone()
        .or_else(|| given.as_ref().map(|c| c.data.clone()))
        .ok_or_else(|| CliError::Config("--data is required without --config".into()))?;
    let output = match (&opts.output, &given) {
        (Some(o), _) => o.clone(),
        (None, Some(cfg)) => cfg.output.join(SCORED_FILE),
        (None, None) => model_path.with_file_name(SCORED_FILE),
    };

    let table = Table::read(&data)?;
    let needed: Vec<&str> = model.columns().iter().map(String::as_str).collect();
    let missing = table.missing(&needed);
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "{}: missing model column(s): {}",
            data.display(),
            missing.join(", ")
        )));
    }
    let unused: Vec<&str> = table
        .headers()
        .iter()
        .map(String::as_str)
        .filter(|h| !needed.contains(h))
        .collect();
    if !unused.is_empty() {
        warn!("ignoring column(s) not used by the model: {}", unused.join(", "));
    }

    let scores: Vec<f64> = if table.nrows() == 0 {
        Vec::new()
    } else {
        let x = table.numeric_matrix(model.columns())?;
        let design = DesignMatrix::from_raw(&x)?;
        score(&design, &model.beta()?)?.iter().copied().collect()
    };

    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let mut writer =
        csv::Writer::from_path(&output).map_err(|e| CliError::Data(format!("{}: {e}", output.display())))?;
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", output.display()));
    let mut header: Vec<&str> = table.headers().iter().map(String::as_str).collect();
    header.push("score");
    writer.write_record(&header).map_err(csv_err)?;
    for (rec, s) in table.records().iter().zip(&scores) {
        let value = s.to_string();
        writer
            .write_record(rec.iter().chain(std::iter::once(value.as_str())))
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| CliError::io(&output, e))?;
    Ok(PredictOutcome { scores, output })
}
