//! Weighted median, the robust scale estimate and the Huber loss.
//!
//!     cargo run --example scale_estimation

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serls::{huber_loss, robust_scale, weighted_median};

fn main() -> Result<(), serls::Error> {
    println!(
        "median of [1, 2, 3, 10], uniform weights: {}",
        weighted_median(&[1.0, 2.0, 3.0, 10.0], &[0.25; 4])?
    );
    println!(
        "median of [1, 2, 3, 10], weights [.1 .1 .1 .7]: {}",
        weighted_median(&[1.0, 2.0, 3.0, 10.0], &[0.1, 0.1, 0.1, 0.7])?
    );

    // 1.483 × median|e| estimates the standard deviation of normal residuals.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    let w = vec![1.0 / n as f64; n];
    for sd in [0.5, 1.0, 4.0] {
        let dist = Normal::new(0.0, sd).unwrap();
        let abs_e: Vec<f64> = (0..n).map(|_| f64::abs(dist.sample(&mut rng))).collect();
        println!("sd {sd:>4}: robust scale {:.4}", robust_scale(&abs_e, &w)?);
    }

    // A gross outlier moves the mean absolute error but not the scale.
    let mut abs_e: Vec<f64> = (0..n)
        .map(|_| f64::abs(Normal::new(0.0, 1.0).unwrap().sample(&mut rng)))
        .collect();
    abs_e[0] = 1e6;
    let mean: f64 = abs_e.iter().sum::<f64>() / n as f64;
    println!(
        "with a 1e6 outlier: mean |e| {mean:.2}, robust scale {:.4}",
        robust_scale(&abs_e, &w)?
    );

    let k = 1.5;
    println!("\n   e   rho(e, k={k})");
    for e in [0.0, 0.5, 1.0, 1.5, 2.0, 4.0, -4.0] {
        println!("{e:>4}   {:.4}", huber_loss(e, k)?);
    }
    Ok(())
}
