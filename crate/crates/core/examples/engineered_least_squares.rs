//! Score engineering: a binned characteristic whose fitted weights would
//! dip is forced to be monotone, and one bin is pinned to a business value.
//!
//!     cargo run --example engineered_least_squares

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serls::{fit_engineered_ls, ConstraintSet, EngineeredProblem, ObservationSet, PenaltySpec};

fn main() -> Result<(), serls::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let bins = 4;
    let n = 400;
    // true effect per bin is non-monotone: 0, 1.0, 0.8, 2.0
    let effect = [0.0, 1.0, 0.8, 2.0];

    let mut x = DMatrix::zeros(n, bins);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let b = i % bins;
        x[(i, b)] = 1.0;
        y.push(3.0 + effect[b] + noise.sample(&mut rng));
    }
    // Center each indicator so the intercept is the mean outcome.
    for j in 0..bins {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let obs = ObservationSet::new(y, x, None)?;
    let y = obs.y().clone();

    let free = EngineeredProblem::new(obs.clone(), ConstraintSet::empty(bins), PenaltySpec::none())?;
    // S1 ≤ S2 ≤ S3 ≤ S4 written as S_j − S_{j+1} ≤ 0, plus S1 = 0.
    let mut rules = ConstraintSet::empty(bins).with_equality(&[(1, 1.0)], 0.0)?;
    for j in 1..bins {
        rules = rules.with_nonpositive(&[(j, 1.0), (j + 1, -1.0)])?;
    }
    let engineered = EngineeredProblem::new(obs, rules, PenaltySpec::new(1.0)?)?;

    let b_free = fit_engineered_ls(&free, &y)?;
    let b_eng = fit_engineered_ls(&engineered, &y)?;
    println!("bin   unconstrained   engineered (S1 = 0, monotone, lambda = 1)");
    for j in 0..bins {
        println!(
            "{:>3}   {:>13.4}   {:>10.4}",
            j + 1,
            b_free.scores()[j],
            b_eng.scores()[j]
        );
    }
    println!(
        "max constraint violation {:.2e}",
        engineered.constraints().max_violation(b_eng.as_vector())
    );
    Ok(())
}
