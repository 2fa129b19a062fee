//! Fit and marginal-contribution reports. The JSON form is the machine
//! surface; the text form is an aligned rendering of the same numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::model_file::NamedValue;
use crate::marginal::{Contribution, MarginalReport, SampleLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicWeights {
    pub name: String,
    pub coefficients: Vec<NamedValue>,
}

/// Constraint values at the fitted coefficients: `Airβ − IW`, `Acrβ` and
/// `Aprβ` row by row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub equality: Vec<f64>,
    pub zero: Vec<f64>,
    pub inequality: Vec<f64>,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub intercept: f64,
    pub characteristics: Vec<CharacteristicWeights>,
    /// `SSE*/RLSV_y`; `None` when the winsorized outcome has no variance.
    pub of: Option<f64>,
    pub sse_star: f64,
    pub rlsv_y: f64,
    pub robust: bool,
    pub sigma: f64,
    pub k: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate_scale: bool,
    pub constraints: ConstraintResiduals,
    pub warnings: Vec<String>,
    pub fitted_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub development: MarginalReport,
    pub validation: Option<MarginalReport>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

pub fn render_fit(r: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "serls fit report");
    let _ = writeln!(s, "observations      {}", r.n);
    let _ = writeln!(
        s,
        "mode              {}",
        if r.robust { "robust (Huber)" } else { "least squares" }
    );
    let _ = writeln!(
        s,
        "converged         {} after {} iteration(s)",
        r.converged, r.iterations
    );
    let _ = writeln!(s, "sigma             {:.6}", r.sigma);
    let _ = writeln!(
        s,
        "k                 {}",
        r.k.map_or("inf".to_string(), |k| format!("{k:.6}"))
    );
    let _ = writeln!(s, "OF                {}", fmt_opt(r.of));
    let _ = writeln!(s, "SSE*              {:.6}", r.sse_star);
    let _ = writeln!(s, "RLSV_y            {:.6}", r.rlsv_y);
    s.push('\n');

    let width = r
        .characteristics
        .iter()
        .flat_map(|c| c.coefficients.iter().map(|v| v.name.len()).chain([c.name.len()]))
        .chain(["(intercept)".len(), "characteristic".len()])
        .max()
        .unwrap_or(0);
    let _ = writeln!(
        s,
        "{:<width$}  {:<width$}  {:>16}",
        "characteristic", "column", "weight"
    );
    let _ = writeln!(s, "{:<width$}  {:<width$}  {:>16.8}", "", "(intercept)", r.intercept);
    for ch in &r.characteristics {
        for (i, c) in ch.coefficients.iter().enumerate() {
            let label = if i == 0 { ch.name.as_str() } else { "" };
            let _ = writeln!(s, "{label:<width$}  {:<width$}  {:>16.8}", c.name, c.value);
        }
    }
    s.push('\n');

    let c = &r.constraints;
    let _ = writeln!(
        s,
        "constraints       {} equality, {} zero-sum, {} inequality; max violation {:.3e}",
        c.equality.len(),
        c.zero.len(),
        c.inequality.len(),
        c.max_violation
    );
    for (kind, rows) in [
        ("equality", &c.equality),
        ("zero", &c.zero),
        ("inequality", &c.inequality),
    ] {
        for (i, v) in rows.iter().enumerate() {
            let _ = writeln!(s, "  {kind:<10} row {i:<4} {v:>14.6e}");
        }
    }
    if !r.warnings.is_empty() {
        s.push('\n');
        for w in &r.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
    }
    s
}

fn render_section(s: &mut String, title: &str, rows: &[Contribution], width: usize) {
    let _ = writeln!(s, "  {title}");
    if rows.is_empty() {
        let _ = writeln!(s, "    (none)");
        return;
    }
    for c in rows {
        let _ = writeln!(s, "    {:<width$}  {:>14.8}", c.name, c.value);
    }
}

fn render_marginal(s: &mut String, r: &MarginalReport) {
    let label = match r.sample {
        SampleLabel::Development => "development",
        SampleLabel::Validation => "validation",
    };
    let _ = writeln!(s, "[{label}]");
    let _ = writeln!(s, "  OF       {:.8}", r.of);
    let _ = writeln!(s, "  SSE*     {:.6}", r.sse_star);
    let _ = writeln!(s, "  RLSV_y   {:.6}", r.rlsv_y);
    let width = r
        .step1
        .iter()
        .chain(&r.step2)
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0)
        .max(4);
    render_section(s, "step I (MCI: increase in OF when removed)", &r.step1, width);
    render_section(s, "step II (MCII: decrease in OF when added)", &r.step2, width);
}

pub fn render_mc(r: &McReport) -> String {
    let mut s = String::from("serls marginal contributions\n\n");
    render_marginal(&mut s, &r.development);
    if let Some(v) = &r.validation {
        s.push('\n');
        render_marginal(&mut s, v);
    }
    s
}
