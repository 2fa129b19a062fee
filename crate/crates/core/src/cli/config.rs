//! Run configuration (TOML on disk, embedded as JSON in model files).
//!
//! ```toml
//! data = "dev.csv"
//! y_column = "y"
//! weight_column = "w"        # optional, uniform weights otherwise
//! lambda = 0.0
//! output = "out"
//! validation = "val.csv"     # optional
//!
//! [robust]
//! enabled = true
//! m = 1.5
//! max_iterations = 50
//!
//! [[characteristics]]
//! name = "age"
//! columns = ["age_1", "age_2", "age_3"]
//!
//! [[constraints.inequality]]  # age_2 - age_1 <= 0
//! terms = { age_2 = 1.0, age_1 = -1.0 }
//!
//! [[step2]]
//! name = "income"
//! column = "income"
//! knots = [20.0, 40.0]
//! degree = 1
//! ```
//!
//! Constraint kinds: `equality` (`Σ coef·S = target`), `zero`
//! (`Σ coef·S = 0`) and `inequality` (`Σ coef·S ≤ 0`). Relative paths are
//! resolved against the directory of the config file.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, CliResult};
use crate::basis::{SplineSpec, MAX_DEGREE};
use crate::model::{Characteristic, CharacteristicLayout, ConstraintSet, PenaltySpec};
use crate::robust::{RobustConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_WINSOR_MULTIPLE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub y_column: String,
    #[serde(default)]
    pub weight_column: Option<String>,
    /// Design columns in order. Defaults to the characteristic columns
    /// concatenated in declaration order.
    #[serde(default)]
    pub columns: Vec<String>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub validation: Option<PathBuf>,
    #[serde(default)]
    pub robust: RobustSection,
    /// When empty, every column becomes its own characteristic.
    #[serde(default)]
    pub characteristics: Vec<CharacteristicSpec>,
    #[serde(default)]
    pub constraints: ConstraintsSection,
    #[serde(default)]
    pub step2: Vec<Step2Spec>,
}

fn default_output() -> PathBuf {
    PathBuf::from("serls-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_true() -> bool {
    true
}

fn default_m() -> f64 {
    DEFAULT_WINSOR_MULTIPLE
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl Default for RobustSection {
    fn default() -> Self {
        Self {
            enabled: true,
            m: DEFAULT_WINSOR_MULTIPLE,
            epsilon: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicSpec {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    #[serde(default)]
    pub equality: Vec<EqualityRow>,
    #[serde(default)]
    pub zero: Vec<TermsRow>,
    #[serde(default)]
    pub inequality: Vec<TermsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualityRow {
    pub terms: BTreeMap<String, f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermsRow {
    pub terms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step2Spec {
    pub name: String,
    pub column: String,
    #[serde(default)]
    pub knots: Vec<f64>,
    #[serde(default)]
    pub degree: usize,
    /// Defaults to the development sample's range of `column`.
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
}

impl Step2Spec {
    pub fn spline(&self) -> CliResult<SplineSpec> {
        let [lo, hi] = self
            .domain
            .ok_or_else(|| CliError::Config(format!("step2 `{}` has no resolved domain", self.name)))?;
        SplineSpec::new(self.knots.clone(), self.degree, (lo, hi))
            .map_err(|e| CliError::Config(format!("step2 `{}`: {e}", self.name)))
    }
}

impl RunConfig {
    /// Read, resolve and validate a config file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        self.data = join(&self.data);
        self.output = join(&self.output);
        self.validation = self.validation.as_deref().map(join);
    }

    fn fill_defaults(&mut self) {
        if self.columns.is_empty() {
            self.columns = self
                .characteristics
                .iter()
                .flat_map(|c| c.columns.iter().cloned())
                .collect();
        }
        if self.characteristics.is_empty() {
            self.characteristics = self
                .columns
                .iter()
                .map(|c| CharacteristicSpec {
                    name: c.clone(),
                    columns: vec![c.clone()],
                })
                .collect();
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.y_column.is_empty() {
            return bad("y_column must be set".into());
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.as_str()) {
                return bad(format!("column `{c}` listed twice"));
            }
        }
        if seen.contains(self.y_column.as_str()) {
            return bad(format!("y_column `{}` is also a design column", self.y_column));
        }
        if let Some(w) = &self.weight_column {
            if seen.contains(w.as_str()) || *w == self.y_column {
                return bad(format!("weight_column `{w}` is also used as y or a design column"));
            }
        }
        for ch in &self.characteristics {
            for c in &ch.columns {
                if !seen.contains(c.as_str()) {
                    return bad(format!("characteristic `{}` uses unknown column `{c}`", ch.name));
                }
            }
        }
        let rows = self
            .constraints
            .equality
            .iter()
            .map(|r| &r.terms)
            .chain(self.constraints.zero.iter().map(|r| &r.terms))
            .chain(self.constraints.inequality.iter().map(|r| &r.terms));
        for terms in rows {
            for c in terms.keys() {
                if !seen.contains(c.as_str()) {
                    return bad(format!("constraint references unknown column `{c}`"));
                }
            }
        }
        let mut names = HashSet::new();
        for s in &self.step2 {
            if !names.insert(s.name.as_str()) {
                return bad(format!("step2 name `{}` listed twice", s.name));
            }
            if s.degree > MAX_DEGREE {
                return bad(format!("step2 `{}`: degree {} exceeds {MAX_DEGREE}", s.name, s.degree));
            }
            if s.domain.is_some() {
                s.spline()?;
            }
        }
        PenaltySpec::new(self.lambda).map_err(|e| CliError::Config(e.to_string()))?;
        self.robust_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        // surfaces overlapping groups and duplicate names
        self.layout()?;
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// Design index (1-based; 0 is the intercept) of a named column.
    pub fn design_index(&self, column: &str) -> CliResult<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .map(|i| i + 1)
            .ok_or_else(|| CliError::Config(format!("unknown column `{column}`")))
    }

    /// Data columns needed to fit: y, weights and the design columns.
    pub fn fit_columns(&self) -> Vec<&str> {
        std::iter::once(self.y_column.as_str())
            .chain(self.weight_column.as_deref())
            .chain(self.columns.iter().map(String::as_str))
            .collect()
    }

    /// Columns needed for marginal contributions: the fit columns plus every
    /// Step II candidate column.
    pub fn mc_columns(&self) -> Vec<&str> {
        let mut cols = self.fit_columns();
        for s in &self.step2 {
            if !cols.contains(&s.column.as_str()) {
                cols.push(&s.column);
            }
        }
        cols
    }

    pub fn layout(&self) -> CliResult<CharacteristicLayout> {
        let groups = self
            .characteristics
            .iter()
            .map(|ch| {
                Ok(Characteristic {
                    name: ch.name.clone(),
                    columns: ch
                        .columns
                        .iter()
                        .map(|c| self.design_index(c))
                        .collect::<CliResult<_>>()?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        CharacteristicLayout::new(groups, self.p() + 1).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn constraint_set(&self) -> CliResult<ConstraintSet> {
        let terms = |t: &BTreeMap<String, f64>| -> CliResult<Vec<(usize, f64)>> {
            t.iter().map(|(c, v)| Ok((self.design_index(c)?, *v))).collect()
        };
        let wrap = |e: crate::Error| CliError::Config(e.to_string());
        let mut set = ConstraintSet::empty(self.p());
        for row in &self.constraints.equality {
            set = set.with_equality(&terms(&row.terms)?, row.target).map_err(wrap)?;
        }
        for row in &self.constraints.zero {
            set = set.with_zero_sum(&terms(&row.terms)?).map_err(wrap)?;
        }
        for row in &self.constraints.inequality {
            set = set.with_nonpositive(&terms(&row.terms)?).map_err(wrap)?;
        }
        Ok(set)
    }

    pub fn penalty(&self) -> CliResult<PenaltySpec> {
        PenaltySpec::new(self.lambda).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn robust_config(&self) -> RobustConfig {
        RobustConfig {
            max_iterations: self.robust.max_iterations,
            epsilon: self.robust.epsilon,
            m: self.robust.m,
        }
    }
}
