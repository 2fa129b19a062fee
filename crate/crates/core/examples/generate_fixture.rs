//! Write a seeded synthetic development/validation pair plus a run config
//! for the `serls` binary.
//!
//!     cargo run --example generate_fixture -- --seed 42 --out fixture
//!     cargo run --bin serls -- fit --config fixture/config.toml
//!     cargo run --bin serls -- mc --config fixture/config.toml
//!     cargo run --bin serls -- predict --config fixture/config.toml --data fixture/val.csv

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "fixture")]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    /// Number of development rows given a +50 outcome shock.
    #[arg(long, default_value_t = 10)]
    outliers: usize,
}

struct Row {
    income: f64,
    utilization: f64,
    tenure: f64,
    weight: f64,
    y: f64,
}

fn draw(rng: &mut ChaCha8Rng, n: usize) -> Vec<Row> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let income: f64 = normal.sample(rng);
            let utilization: f64 = rng.random_range(0.0..1.0);
            let tenure: f64 = rng.random_range(0.0..20.0);
            let tenure_effect = if tenure > 10.0 { 1.0 } else { 0.0 };
            let y = 5.0 + 1.2 * income - 2.0 * utilization + tenure_effect + 0.5 * normal.sample(rng);
            Row {
                income,
                utilization,
                tenure,
                weight: rng.random_range(0.5..1.5),
                y,
            }
        })
        .collect()
}

fn write_csv(path: &PathBuf, rows: &[Row], centers: (f64, f64)) -> std::io::Result<()> {
    let mut s = String::from("id,y,weight,income,utilization,tenure\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{}",
            r.y,
            r.weight,
            r.income - centers.0,
            r.utilization - centers.1,
            r.tenure
        );
    }
    std::fs::write(path, s)
}

fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut dev = draw(&mut rng, args.rows);
    let val = draw(&mut rng, args.rows / 2);
    for r in dev.iter_mut().take(args.outliers) {
        r.y += 50.0;
    }

    // Center on the weighted development means so the intercept is a
    // location estimate.
    let total: f64 = dev.iter().map(|r| r.weight).sum();
    let centers = (
        dev.iter().map(|r| r.weight * r.income).sum::<f64>() / total,
        dev.iter().map(|r| r.weight * r.utilization).sum::<f64>() / total,
    );

    std::fs::create_dir_all(&args.out)?;
    write_csv(&args.out.join("dev.csv"), &dev, centers)?;
    write_csv(&args.out.join("val.csv"), &val, centers)?;
    std::fs::write(
        args.out.join("config.toml"),
        r#"data = "dev.csv"
validation = "val.csv"
y_column = "y"
weight_column = "weight"
lambda = 0.0
output = "out"

[robust]
enabled = true
m = 1.5
max_iterations = 50

[[characteristics]]
name = "income"
columns = ["income"]

[[characteristics]]
name = "utilization"
columns = ["utilization"]

# higher income never lowers the score
[[constraints.inequality]]
terms = { income = -1.0 }

[[step2]]
name = "tenure"
column = "tenure"
knots = [5.0, 10.0, 15.0]
degree = 0
"#,
    )?;
    println!(
        "wrote {}/{{dev.csv, val.csv, config.toml}} (seed {})",
        args.out.display(),
        args.seed
    );
    Ok(())
}
