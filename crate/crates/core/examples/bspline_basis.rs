//! B-spline basis columns for a Step II candidate.
//!
//!     cargo run --example bspline_basis

use serls::{bspline_basis, SplineSpec};

fn main() -> Result<(), serls::Error> {
    let xs: Vec<f64> = (0..=10).map(|i| i as f64).collect();
    for degree in 0..=3 {
        let spec = SplineSpec::new(vec![3.0, 6.0], degree, (0.0, 10.0))?;
        let b = bspline_basis(&xs, &spec)?;
        println!("degree {degree}: {} basis functions", spec.num_basis());
        for (x, row) in xs.iter().zip(b.row_iter()) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            println!("  x = {x:>4}  [{}]  sum {:.3}", cells.join(" "), row.sum());
        }
    }
    // Values outside the domain take the boundary row.
    let spec = SplineSpec::new(vec![5.0], 1, (0.0, 10.0))?;
    println!(
        "\nclamped: {:?}",
        bspline_basis(&[-3.0, 12.0], &spec)?
            .row_iter()
            .map(|r| r.iter().copied().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    );
    Ok(())
}
