//! Step I and Step II marginal contributions on development and validation
//! samples.
//!
//!     cargo run --example marginal_contributions

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serls::{
    evaluate_on_sample, fit_robust, marginal_report, Characteristic, CharacteristicLayout, EngineeredProblem,
    MarginalReport, ObservationSet, RobustConfig, SampleLabel, SplineSpec, Step2Candidate,
};

/// y = 1 + 2·a + 0·b + g(v) + noise, where the model fits a and b (b is
/// pure noise) and v is offered as a Step II candidate.
fn sample(rng: &mut ChaCha8Rng, n: usize) -> (ObservationSet, Vec<f64>) {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = DMatrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let a: f64 = noise.sample(rng);
        let b: f64 = noise.sample(rng);
        let vi: f64 = rng.random_range(0.0..10.0);
        x[(i, 0)] = a;
        x[(i, 1)] = b;
        v.push(vi);
        let g = if vi > 6.0 { 1.5 } else { 0.0 };
        y.push(1.0 + 2.0 * a + g + 0.5 * noise.sample(rng));
    }
    (ObservationSet::new(y, x, None).unwrap(), v)
}

fn print(report: &MarginalReport) {
    println!("{:?}: OF = {:.4}", report.sample, report.of);
    for c in &report.step1 {
        println!("  MCI  {:<4} {:>9.5}", c.name, c.value);
    }
    for c in &report.step2 {
        println!("  MCII {:<4} {:>9.5}", c.name, c.value);
    }
}

fn main() -> Result<(), serls::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (dev_obs, dev_v) = sample(&mut rng, 2000);
    let (val_obs, val_v) = sample(&mut rng, 1000);

    let layout = CharacteristicLayout::new(
        vec![
            Characteristic {
                name: "a".into(),
                columns: vec![1],
            },
            Characteristic {
                name: "b".into(),
                columns: vec![2],
            },
        ],
        3,
    )?;
    let spec = SplineSpec::new(vec![2.0, 4.0, 6.0, 8.0], 0, (0.0, 10.0))?;

    let prob = EngineeredProblem::unconstrained(dev_obs)?;
    let fit = fit_robust(&prob, &RobustConfig::default())?;
    println!("beta = {:.4?}\n", fit.beta.as_vector().as_slice());

    let dev = marginal_report(
        &fit,
        &prob,
        &layout,
        &[Step2Candidate {
            name: "v".into(),
            values: dev_v,
            spec: spec.clone(),
        }],
        SampleLabel::Development,
    )?;
    let val = evaluate_on_sample(
        &fit,
        &val_obs,
        &layout,
        &[Step2Candidate {
            name: "v".into(),
            values: val_v,
            spec,
        }],
    )?;
    print(&dev);
    print(&val);
    Ok(())
}
