//! Least squares versus Huber M-regression on a line with one gross outlier.
//!
//!     cargo run --example robust_outlier

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serls::{fit_robust, EngineeredProblem, ObservationSet, RobustConfig, RobustFitResult};

fn main() -> Result<(), serls::Error> {
    let n = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let x: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
    let mut y: Vec<f64> = x.iter().map(|x| 2.0 + 3.0 * x + noise.sample(&mut rng)).collect();
    y[n - 1] += 1000.0;

    let obs = ObservationSet::new(y, DMatrix::from_column_slice(n, 1, &x), None)?;
    let prob = EngineeredProblem::unconstrained(obs)?;
    let ls = RobustFitResult::least_squares(&prob)?;
    let robust = fit_robust(&prob, &RobustConfig::default())?;

    println!("truth          intercept 2.0000  slope 3.0000");
    println!(
        "least squares  intercept {:.4}  slope {:.4}",
        ls.beta.intercept(),
        ls.beta.scores()[0]
    );
    println!(
        "huber (m=1.5)  intercept {:.4}  slope {:.4}",
        robust.beta.intercept(),
        robust.beta.scores()[0]
    );
    println!(
        "\nconverged {} after {} iterations; sigma {:.4}, k {:.4}",
        robust.converged, robust.iterations, robust.sigma, robust.k
    );
    println!("iter      sigma          k     max|dβ|");
    for rec in &robust.trace {
        println!(
            "{:>4} {:>10.5} {:>10.5} {:>11.3e}",
            rec.iteration, rec.sigma, rec.k, rec.max_change
        );
    }
    println!(
        "outlier: y = {:.1}, winsorized y* = {:.4}",
        prob.obs().y()[n - 1],
        robust.y_star[n - 1]
    );
    Ok(())
}
