//! Problem data: observations, the intercept-augmented design matrix, the
//! ridge penalty, score-engineering constraints and characteristic layout.
//!
//! Everything here is immutable once constructed.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Rescale nonnegative weights so they sum to one.
pub fn normalize_weights(w_raw: &[f64]) -> Result<Vec<f64>> {
    if w_raw.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    if let Some(bad) = w_raw.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeights(format!(
            "weights must be finite and nonnegative, found {bad}"
        )));
    }
    let total: f64 = w_raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    if (total - 1.0).abs() <= WEIGHT_SUM_TOL {
        return Ok(w_raw.to_vec());
    }
    Ok(w_raw.iter().map(|w| w / total).collect())
}

/// Dependent variable, raw independent variables and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    y: DVector<f64>,
    x_raw: DMatrix<f64>,
    w: DVector<f64>,
}

impl ObservationSet {
    /// `weights = None` means uniform weights `1/n`. Weights that do not sum
    /// to one are rescaled with a warning.
    pub fn new(y: Vec<f64>, x_raw: DMatrix<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("no observations".into()));
        }
        if x_raw.nrows() != n {
            return Err(Error::dim("observation rows", n, x_raw.nrows()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite dependent variable".into()));
        }
        if x_raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite independent variable".into()));
        }
        let w = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => {
                if w.len() != n {
                    return Err(Error::dim("weights", n, w.len()));
                }
                let normalized = normalize_weights(&w)?;
                if normalized != w {
                    warn!("sample weights do not sum to 1; rescaling");
                }
                normalized
            }
        };
        Ok(Self {
            y: DVector::from_vec(y),
            x_raw,
            w: DVector::from_vec(w),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of non-intercept columns.
    pub fn p(&self) -> usize {
        self.x_raw.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x_raw(&self) -> &DMatrix<f64> {
        &self.x_raw
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }
}

/// `Xr`: the raw design with a leading column of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    xr: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn from_raw(x_raw: &DMatrix<f64>) -> Result<Self> {
        let n = x_raw.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        let p = x_raw.ncols();
        let mut xr = DMatrix::from_element(n, p + 1, 1.0);
        xr.view_mut((0, 1), (n, p)).copy_from(x_raw);
        Ok(Self { xr })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.xr
    }

    pub fn nrows(&self) -> usize {
        self.xr.nrows()
    }

    /// `p + 1`.
    pub fn ncols(&self) -> usize {
        self.xr.ncols()
    }
}

pub fn assemble_design(obs: &ObservationSet) -> Result<DesignMatrix> {
    DesignMatrix::from_raw(obs.x_raw())
}

/// Ridge penalty `λ`; the objective uses `λ/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    lambda: f64,
}

impl PenaltySpec {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidInput(format!(
                "penalty must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn none() -> Self {
        Self { lambda: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// One nonzero of a constraint row: (row, design column in `1..=p`, value).
pub type Triplet = (usize, usize, f64);

/// Score-engineering constraints on `β`:
///
/// * `Air β = IW` (targeted equalities),
/// * `Acr β = 0` (homogeneous equalities),
/// * `Apr β ≤ 0` (sign / pattern constraints).
///
/// Column 0 of every block is the intercept and is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    p: usize,
    air: DMatrix<f64>,
    iw: DVector<f64>,
    acr: DMatrix<f64>,
    apr: DMatrix<f64>,
}

impl ConstraintSet {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            air: DMatrix::zeros(0, p + 1),
            iw: DVector::zeros(0),
            acr: DMatrix::zeros(0, p + 1),
            apr: DMatrix::zeros(0, p + 1),
        }
    }

    /// Build from full `(p+1)`-column matrices. Any nonzero in column 0 is
    /// rejected.
    pub fn from_matrices(air: DMatrix<f64>, iw: DVector<f64>, acr: DMatrix<f64>, apr: DMatrix<f64>) -> Result<Self> {
        let cols = air.ncols();
        if cols == 0 {
            return Err(Error::InvalidInput("constraint blocks need p+1 columns".into()));
        }
        for (name, block) in [("Acr", &acr), ("Apr", &apr)] {
            if block.ncols() != cols {
                return Err(Error::InvalidInput(format!(
                    "{name} has {} columns, expected {cols}",
                    block.ncols()
                )));
            }
        }
        if air.nrows() != iw.len() {
            return Err(Error::dim("equality targets", air.nrows(), iw.len()));
        }
        let mut offset = 0;
        for block in [&air, &acr, &apr] {
            for r in 0..block.nrows() {
                if block[(r, 0)] != 0.0 {
                    return Err(Error::ConstrainedIntercept { row: offset + r });
                }
            }
            offset += block.nrows();
        }
        if [&air, &acr, &apr].iter().any(|b| b.iter().any(|v| !v.is_finite())) || iw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite constraint entry".into()));
        }
        Ok(Self {
            p: cols - 1,
            air,
            iw,
            acr,
            apr,
        })
    }

    /// Build from sparse triplets whose column indices refer to score columns
    /// `1..=p`; the zero intercept column is implicit.
    pub fn from_triplets(p: usize, ai: &[Triplet], iw: &[f64], ac: &[Triplet], ap: &[Triplet]) -> Result<Self> {
        let block = |triplets: &[Triplet], rows: usize| -> Result<DMatrix<f64>> {
            let mut m = DMatrix::zeros(rows, p + 1);
            for &(r, c, v) in triplets {
                if c == 0 {
                    return Err(Error::ConstrainedIntercept { row: r });
                }
                if c > p || r >= rows {
                    return Err(Error::InvalidInput(format!(
                        "triplet ({r}, {c}) outside a {rows}x{p} score block"
                    )));
                }
                m[(r, c)] += v;
            }
            Ok(m)
        };
        let rows = |t: &[Triplet]| t.iter().map(|&(r, _, _)| r + 1).max().unwrap_or(0);
        let air = block(ai, iw.len().max(rows(ai)))?;
        let acr = block(ac, rows(ac))?;
        let apr = block(ap, rows(ap))?;
        Self::from_matrices(air, DVector::from_row_slice(iw), acr, apr)
    }

    /// Append `Σ coef·S_col = target`.
    pub fn with_equality(mut self, terms: &[(usize, f64)], target: f64) -> Result<Self> {
        let row = self.row_from_terms(terms)?;
        self.air = append_row(&self.air, &row);
        self.iw = self.iw.push(target);
        Ok(self)
    }

    /// Append `Σ coef·S_col = 0`.
    pub fn with_zero_sum(mut self, terms: &[(usize, f64)]) -> Result<Self> {
        let row = self.row_from_terms(terms)?;
        self.acr = append_row(&self.acr, &row);
        Ok(self)
    }

    /// Append `Σ coef·S_col ≤ 0`.
    pub fn with_nonpositive(mut self, terms: &[(usize, f64)]) -> Result<Self> {
        let row = self.row_from_terms(terms)?;
        self.apr = append_row(&self.apr, &row);
        Ok(self)
    }

    fn row_from_terms(&self, terms: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.p + 1];
        for &(c, v) in terms {
            if c == 0 {
                return Err(Error::ConstrainedIntercept {
                    row: self.air.nrows() + self.acr.nrows() + self.apr.nrows(),
                });
            }
            if c > self.p {
                return Err(Error::InvalidInput(format!("column {c} exceeds p = {}", self.p)));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite constraint coefficient".into()));
            }
            row[c] += v;
        }
        Ok(row)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn air(&self) -> &DMatrix<f64> {
        &self.air
    }

    pub fn iw(&self) -> &DVector<f64> {
        &self.iw
    }

    pub fn acr(&self) -> &DMatrix<f64> {
        &self.acr
    }

    pub fn apr(&self) -> &DMatrix<f64> {
        &self.apr
    }

    pub fn is_empty(&self) -> bool {
        self.air.nrows() + self.acr.nrows() + self.apr.nrows() == 0
    }

    /// Largest violation over all three blocks at `beta`.
    pub fn max_violation(&self, beta: &DVector<f64>) -> f64 {
        let eq = (&self.air * beta - &self.iw).amax();
        let homog = (&self.acr * beta).amax();
        let ineq = (&self.apr * beta).iter().fold(0.0_f64, |m, v| m.max(*v));
        eq.max(homog).max(ineq)
    }
}

fn append_row(m: &DMatrix<f64>, row: &[f64]) -> DMatrix<f64> {
    let r = m.nrows();
    let mut out = m.clone().insert_row(r, 0.0);
    for (c, v) in row.iter().enumerate() {
        out[(r, c)] = *v;
    }
    out
}

/// A named group of design columns whose weights together form one
/// characteristic.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Characteristic {
    pub name: String,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharacteristicLayout {
    groups: Vec<Characteristic>,
}

impl CharacteristicLayout {
    /// `ncols` is the design width `p + 1`.
    pub fn new(groups: Vec<Characteristic>, ncols: usize) -> Result<Self> {
        let mut seen_cols = BTreeSet::new();
        let mut seen_names = BTreeSet::new();
        for g in &groups {
            if !seen_names.insert(g.name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate characteristic `{}`", g.name)));
            }
            for &c in &g.columns {
                if c == 0 {
                    return Err(Error::InvalidInput(format!(
                        "characteristic `{}` contains the intercept column",
                        g.name
                    )));
                }
                if c >= ncols {
                    return Err(Error::InvalidInput(format!(
                        "characteristic `{}` references column {c} of {ncols}",
                        g.name
                    )));
                }
                if !seen_cols.insert(c) {
                    return Err(Error::InvalidInput(format!(
                        "column {c} belongs to more than one characteristic"
                    )));
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Characteristic] {
        &self.groups
    }

    pub fn get(&self, name: &str) -> Option<&Characteristic> {
        self.groups.iter().find(|g| g.name == name)
    }
}

/// `β = [S0, S1, ..., Sp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(DVector<f64>);

impl Coefficients {
    pub fn new(beta: DVector<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidInput("coefficient vector is empty".into()));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite coefficient".into()));
        }
        Ok(Self(beta))
    }

    pub fn intercept(&self) -> f64 {
        self.0[0]
    }

    pub fn scores(&self) -> &[f64] {
        &self.0.as_slice()[1..]
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_weights(&[1.0; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(normalize_weights(&[0.2, 0.3, 0.5]).unwrap(), vec![0.2, 0.3, 0.5]);
        assert_eq!(normalize_weights(&[2.0, 0.0, 6.0]).unwrap(), vec![0.25, 0.0, 0.75]);
    }

    #[test]
    fn normalize_rejects_bad_weights() {
        assert!(matches!(normalize_weights(&[0.0, 0.0]), Err(Error::InvalidWeights(_))));
        assert!(matches!(
            normalize_weights(&[1.0, -1.0, 2.0]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(normalize_weights(&[]).is_err());
    }

    #[test]
    fn design_prepends_ones() {
        let d = DesignMatrix::from_raw(&DMatrix::from_row_slice(1, 1, &[5.0])).unwrap();
        assert_eq!(d.matrix(), &DMatrix::from_row_slice(1, 2, &[1.0, 5.0]));
        let d = DesignMatrix::from_raw(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(
            d.matrix(),
            &DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 2.0, 1.0, 3.0, 4.0])
        );
        assert!(DesignMatrix::from_raw(&DMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn intercept_only_design() {
        let obs = ObservationSet::new(vec![1.0, 2.0], DMatrix::zeros(2, 0), None).unwrap();
        let d = assemble_design(&obs).unwrap();
        assert_eq!(d.ncols(), 1);
        assert_eq!(obs.weights().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn observation_weights_are_rescaled() {
        let obs = ObservationSet::new(vec![1.0, 2.0, 3.0], DMatrix::zeros(3, 1), Some(vec![2.0, 0.0, 6.0])).unwrap();
        assert_eq!(obs.weights().as_slice(), &[0.25, 0.0, 0.75]);
        assert!(ObservationSet::new(vec![1.0], DMatrix::zeros(2, 1), None).is_err());
        assert!(ObservationSet::new(vec![f64::NAN], DMatrix::zeros(1, 1), None).is_err());
    }

    #[test]
    fn constraints_reject_intercept() {
        let air = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
        let err = ConstraintSet::from_matrices(
            air,
            DVector::from_element(1, 0.0),
            DMatrix::zeros(0, 3),
            DMatrix::zeros(0, 3),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConstrainedIntercept { row: 0 }));

        let apr = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 2.0, 0.0, 0.0]);
        let err = ConstraintSet::from_matrices(DMatrix::zeros(0, 3), DVector::zeros(0), DMatrix::zeros(0, 3), apr)
            .unwrap_err();
        assert!(matches!(err, Error::ConstrainedIntercept { row: 1 }));

        assert!(ConstraintSet::from_triplets(2, &[(0, 0, 1.0)], &[1.0], &[], &[]).is_err());
        assert!(ConstraintSet::empty(2).with_nonpositive(&[(0, 1.0)]).is_err());
    }

    #[test]
    fn triplets_prepend_zero_intercept() {
        let cs = ConstraintSet::from_triplets(
            3,
            &[(0, 1, 1.0), (0, 2, 1.0)],
            &[2.0],
            &[(0, 3, 1.0)],
            &[(0, 1, 1.0), (0, 2, -1.0), (1, 2, 1.0), (1, 3, -1.0)],
        )
        .unwrap();
        assert_eq!(cs.air(), &DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(cs.acr(), &DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(cs.apr().nrows(), 2);
        assert_eq!(cs.apr().column(0).amax(), 0.0);

        let built = ConstraintSet::empty(3)
            .with_equality(&[(1, 1.0), (2, 1.0)], 2.0)
            .unwrap()
            .with_zero_sum(&[(3, 1.0)])
            .unwrap()
            .with_nonpositive(&[(1, 1.0), (2, -1.0)])
            .unwrap()
            .with_nonpositive(&[(2, 1.0), (3, -1.0)])
            .unwrap();
        assert_eq!(built, cs);
    }

    #[test]
    fn layout_validation() {
        let g = |name: &str, cols: &[usize]| Characteristic {
            name: name.into(),
            columns: cols.to_vec(),
        };
        assert!(CharacteristicLayout::new(vec![g("a", &[1, 2]), g("b", &[3])], 4).is_ok());
        assert!(CharacteristicLayout::new(vec![g("a", &[0])], 4).is_err());
        assert!(CharacteristicLayout::new(vec![g("a", &[1]), g("b", &[1])], 4).is_err());
        assert!(CharacteristicLayout::new(vec![g("a", &[4])], 4).is_err());
        assert!(CharacteristicLayout::new(vec![g("a", &[1]), g("a", &[2])], 4).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_is_idempotent(w in prop::collection::vec(0.0f64..10.0, 1..20)) {
                prop_assume!(w.iter().any(|v| *v > 0.0));
                let once = normalize_weights(&w).unwrap();
                let sum: f64 = once.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                let twice = normalize_weights(&once).unwrap();
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn design_round_trips_raw(
                rows in 1usize..8,
                cols in 0usize..5,
                seed in prop::collection::vec(-100.0f64..100.0, 40),
            ) {
                let x = DMatrix::from_fn(rows, cols, |r, c| seed[(r * 5 + c) % 40]);
                let d = DesignMatrix::from_raw(&x).unwrap();
                prop_assert!(d.matrix().column(0).iter().all(|v| *v == 1.0));
                prop_assert_eq!(d.matrix().columns(1, cols).into_owned(), x);
            }
        }
    }
}
