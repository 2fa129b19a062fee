//! B-spline basis columns for candidate characteristics.
//!
//! Uses a clamped knot vector (each domain boundary repeated `degree + 1`
//! times) so the basis forms a partition of unity over the whole domain.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    knots: Vec<f64>,
    degree: usize,
    domain: (f64, f64),
}

impl SplineSpec {
    /// `knots` are interior knots, strictly increasing and strictly inside
    /// `domain`.
    pub fn new(knots: Vec<f64>, degree: usize, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidSpline(format!("bad domain [{lo}, {hi}]")));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidSpline(format!("degree {degree} exceeds {MAX_DEGREE}")));
        }
        if knots.iter().any(|k| !k.is_finite() || *k <= lo || *k >= hi) {
            return Err(Error::InvalidSpline(format!(
                "interior knots must lie strictly inside ({lo}, {hi})"
            )));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpline("knots must be strictly increasing".into()));
        }
        Ok(Self { knots, degree, domain })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Number of basis functions.
    pub fn num_basis(&self) -> usize {
        self.knots.len() + self.degree + 1
    }

    fn full_knots(&self) -> Vec<f64> {
        let (lo, hi) = self.domain;
        let reps = self.degree + 1;
        std::iter::repeat_n(lo, reps)
            .chain(self.knots.iter().copied())
            .chain(std::iter::repeat_n(hi, reps))
            .collect()
    }
}

/// Index `s` of the knot interval `[t_s, t_{s+1})` containing `u`, with the
/// right domain end assigned to the last nonempty interval.
fn find_span(t: &[f64], degree: usize, q: usize, u: f64) -> usize {
    if u >= t[q] {
        return q - 1;
    }
    let (mut lo, mut hi) = (degree, q);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if u < t[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Cox–de Boor triangle for the `degree + 1` functions nonzero on span `s`.
fn nonzero_basis(t: &[f64], degree: usize, s: usize, u: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - t[s + 1 - j];
        right[j] = t[s + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Evaluate every basis function at each `x` (clamped into the domain).
/// Returns an `n × num_basis` matrix whose rows sum to one.
pub fn bspline_basis(x: &[f64], spec: &SplineSpec) -> Result<DMatrix<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite spline argument".into()));
    }
    let t = spec.full_knots();
    let q = spec.num_basis();
    let d = spec.degree;
    let (lo, hi) = spec.domain;
    let mut out = DMatrix::zeros(x.len(), q);
    for (row, &xi) in x.iter().enumerate() {
        let u = xi.clamp(lo, hi);
        let s = find_span(&t, d, q, u);
        for (j, v) in nonzero_basis(&t, d, s, u).into_iter().enumerate() {
            out[(row, s - d + j)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_zero_is_bin_indicators() {
        let spec = SplineSpec::new(vec![0.5], 0, (0.0, 1.0)).unwrap();
        let b = bspline_basis(&[0.25, 0.75], &spec).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let b = bspline_basis(&[0.0, 0.5, 1.0], &spec).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]));
    }

    #[test]
    fn hat_function_peaks_at_knot() {
        let spec = SplineSpec::new(vec![0.5], 1, (0.0, 1.0)).unwrap();
        let b = bspline_basis(&[0.5], &spec).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]));
        // linear interpolation between knots: at 0.25, halfway between 0 and 0.5
        let b = bspline_basis(&[0.25], &spec).unwrap();
        assert!((b - DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn cubic_matches_bernstein_without_interior_knots() {
        // No interior knots: the clamped cubic basis is the Bernstein basis.
        let spec = SplineSpec::new(vec![], 3, (0.0, 1.0)).unwrap();
        let u = 0.3;
        let b = bspline_basis(&[u], &spec).unwrap();
        let bern = [
            (1.0 - u).powi(3),
            3.0 * u * (1.0 - u).powi(2),
            3.0 * u * u * (1.0 - u),
            u.powi(3),
        ];
        for (j, want) in bern.iter().enumerate() {
            assert!((b[(0, j)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_domain_values_are_clamped() {
        let spec = SplineSpec::new(vec![1.0, 2.0], 2, (0.0, 3.0)).unwrap();
        let b = bspline_basis(&[-5.0, 0.0, 3.0, 10.0], &spec).unwrap();
        assert_eq!(b.row(0), b.row(1));
        assert_eq!(b.row(2), b.row(3));
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(3, spec.num_basis() - 1)], 1.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(SplineSpec::new(vec![0.5], 6, (0.0, 1.0)).is_err());
        assert!(SplineSpec::new(vec![0.0], 1, (0.0, 1.0)).is_err());
        assert!(SplineSpec::new(vec![0.6, 0.4], 1, (0.0, 1.0)).is_err());
        assert!(SplineSpec::new(vec![0.5, 0.5], 1, (0.0, 1.0)).is_err());
        assert!(SplineSpec::new(vec![], 1, (1.0, 1.0)).is_err());
    }

    fn spec_strategy() -> impl Strategy<Value = SplineSpec> {
        (
            0usize..=MAX_DEGREE,
            prop::collection::vec(0.01f64..0.99, 0..8),
            -5.0f64..5.0,
            0.5f64..20.0,
        )
            .prop_map(|(degree, mut fracs, lo, width)| {
                fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                fracs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
                let knots = fracs.iter().map(|f| lo + f * width).collect();
                SplineSpec::new(knots, degree, (lo, lo + width)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn basis_rows_are_partitions_of_unity(
            spec in spec_strategy(),
            xs in prop::collection::vec(-30.0f64..30.0, 1..20),
        ) {
            let b = bspline_basis(&xs, &spec).unwrap();
            prop_assert_eq!(b.ncols(), spec.num_basis());
            for row in b.row_iter() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|v| *v >= 0.0));
                prop_assert!(row.iter().filter(|v| **v != 0.0).count() <= spec.degree() + 1);
            }
        }
    }
}
