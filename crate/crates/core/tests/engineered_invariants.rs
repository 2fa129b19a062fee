mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serls::{assemble_design, fit_engineered_ls, score, ConstraintSet, EngineeredProblem, ObservationSet, PenaltySpec};

fn random_obs(r: &mut ChaCha8Rng, center: bool) -> ObservationSet {
    let p = r.random_range(1..=6);
    let n = r.random_range(p + 5..=80);
    let mut x = normal_matrix(r, n, p);
    let w_raw: Vec<f64> = (0..n).map(|_| r.random_range(0.2..2.0)).collect();
    if center {
        let total: f64 = w_raw.iter().sum();
        for j in 0..p {
            let mean = (0..n).map(|i| w_raw[i] * x[(i, j)]).sum::<f64>() / total;
            x.column_mut(j).add_scalar_mut(-mean);
        }
    }
    let coef = normal_vector(r, p);
    let y = (&x * coef + normal_vector(r, n)).add_scalar(2.0);
    ObservationSet::new(y.iter().copied().collect(), x, Some(w_raw)).unwrap()
}

/// Constraints all satisfied by some random point, so the set is feasible.
fn random_constraints(r: &mut ChaCha8Rng, p: usize) -> ConstraintSet {
    let anchor = normal_vector(r, p);
    let mut set = ConstraintSet::empty(p);
    let terms =
        |row: &DVector<f64>| -> Vec<(usize, f64)> { row.iter().enumerate().map(|(j, v)| (j + 1, *v)).collect() };
    for _ in 0..r.random_range(0..p.min(2) + 1) {
        let row = normal_vector(r, p);
        set = set.with_equality(&terms(&row), row.dot(&anchor)).unwrap();
    }
    if p >= 2 && r.random_bool(0.5) {
        let mut row = normal_vector(r, p);
        row -= &anchor * (row.dot(&anchor) / anchor.norm_squared());
        set = set.with_zero_sum(&terms(&row)).unwrap();
    }
    for _ in 0..r.random_range(0..=3) {
        let mut row = normal_vector(r, p);
        if row.dot(&anchor) > 0.0 {
            row = -row;
        }
        set = set.with_nonpositive(&terms(&row)).unwrap();
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unconstrained_matches_normal_equations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs(&mut r, false);
        let want = wls_oracle(&with_intercept(obs.x_raw()), obs.y(), obs.weights());
        let prob = EngineeredProblem::unconstrained(obs).unwrap();
        let got = fit_engineered_ls(&prob, prob.obs().y()).unwrap();
        prop_assert!((got.as_vector() - &want).amax() <= 1e-8 * want.amax().max(1.0));
    }

    #[test]
    fn engineered_constraints_hold(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs(&mut r, false);
        let set = random_constraints(&mut r, obs.p());
        let lambda = if r.random_bool(0.5) { 0.0 } else { r.random_range(0.0..5.0) };
        let prob = EngineeredProblem::new(obs, set, PenaltySpec::new(lambda).unwrap()).unwrap();
        let beta = fit_engineered_ls(&prob, prob.obs().y()).unwrap();
        let b = beta.as_vector();
        let c = prob.constraints();
        prop_assert!((c.air() * b - c.iw()).amax() <= 1e-8);
        prop_assert!((c.acr() * b).amax() <= 1e-8);
        prop_assert!((c.apr() * b).iter().all(|v| *v <= 1e-8));
    }

    #[test]
    fn penalty_shrinks_score_norm(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs(&mut r, false);
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let prob = EngineeredProblem::new(obs.clone(), ConstraintSet::empty(obs.p()), PenaltySpec::new(lambda).unwrap()).unwrap();
            let beta = fit_engineered_ls(&prob, obs.y()).unwrap();
            let norm = DVector::from_column_slice(beta.scores()).norm();
            prop_assert!(norm <= last * (1.0 + 1e-10) + 1e-12, "lambda {}: {} > {}", lambda, norm, last);
            last = norm;
        }
    }

    #[test]
    fn intercept_ignores_penalty_on_centered_designs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let obs = random_obs(&mut r, true);
        let mean = obs.y().dot(obs.weights());
        for lambda in [0.0, 0.5, 5.0, 500.0] {
            let prob = EngineeredProblem::new(obs.clone(), ConstraintSet::empty(obs.p()), PenaltySpec::new(lambda).unwrap()).unwrap();
            let beta = fit_engineered_ls(&prob, obs.y()).unwrap();
            prop_assert!((beta.intercept() - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        }
    }
}

#[test]
fn exact_fit_scores_reproduce_outcome() {
    let mut r = rng(21);
    let x = normal_matrix(&mut r, 30, 3);
    let truth = DVector::from_vec(vec![0.5, -1.0, 2.0, 3.0]);
    let y = with_intercept(&x) * &truth;
    let obs = ObservationSet::new(y.iter().copied().collect(), x, None).unwrap();
    let design = assemble_design(&obs).unwrap();
    let prob = EngineeredProblem::unconstrained(obs).unwrap();
    let beta = fit_engineered_ls(&prob, &y).unwrap();
    assert!((score(&design, &beta).unwrap() - &y).amax() <= 1e-8);
    assert!((beta.as_vector() - truth).amax() <= 1e-8);
}

#[test]
fn sign_constraint_oracle_by_grid_search() {
    // S1 ≤ 0 binds for upward-sloping data; the intercept becomes the mean.
    let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
    let y = vec![1.0, 2.5, 2.0, 4.0];
    let obs = ObservationSet::new(y.clone(), x, None).unwrap();
    let set = ConstraintSet::empty(1).with_nonpositive(&[(1, 1.0)]).unwrap();
    let prob = EngineeredProblem::new(obs, set, PenaltySpec::none()).unwrap();
    let beta = fit_engineered_ls(&prob, prob.obs().y()).unwrap();
    let sse = |b0: f64, b1: f64| -> f64 { (0..4).map(|i| 0.25 * (y[i] - b0 - b1 * (i + 1) as f64).powi(2)).sum() };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        for j in 0..=200 {
            let b0 = i as f64 * 0.01;
            let b1 = -(j as f64) * 0.005;
            let v = sse(b0, b1);
            if v < best.0 {
                best = (v, b0, b1);
            }
        }
    }
    assert!((beta.intercept() - best.1).abs() <= 0.01);
    assert!((beta.scores()[0] - best.2).abs() <= 0.005);
    assert!(beta.scores()[0].abs() < 1e-12);
    assert!((beta.intercept() - 2.375).abs() < 1e-12);
}
