//! Dense convex QP with equalities, inequalities and bounds.
//!
//!     cargo run --example qp_active_set

use nalgebra::{dmatrix, dvector, DVector};
use serls::{kkt_residual, solve_qp_default, QuadraticProgram};

fn fmt(v: &DVector<f64>) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", cells.join(", "))
}

fn main() -> Result<(), serls::Error> {
    // min ½βᵀHβ + fᵀβ
    let h = dmatrix![
        4.0, 1.0, 0.0;
        1.0, 2.0, 0.0;
        0.0, 0.0, 1.0
    ];
    let f = dvector![-1.0, -1.0, -3.0];

    // β0 + β1 + β2 = 1,  β2 − β0 ≤ 0.5,  0 ≤ β ≤ 0.8
    let qp = QuadraticProgram::new(h, f)?
        .with_equalities(dmatrix![1.0, 1.0, 1.0], dvector![1.0])?
        .with_inequalities(dmatrix![-1.0, 0.0, 1.0], dvector![0.5])?
        .with_bounds(Some(dvector![0.0, 0.0, 0.0]), Some(dvector![0.8, 0.8, 0.8]))?;

    let sol = solve_qp_default(&qp)?;
    println!("status          {:?} ({} iterations)", sol.status, sol.iterations);
    println!("beta            {}", fmt(&sol.beta));
    println!("objective       {:.6}", qp.objective(&sol.beta));
    println!("eq multipliers  {}", fmt(&sol.eq_multipliers));
    println!("ineq multiplier {}", fmt(&sol.ineq_multipliers));
    println!("lower bound mu  {}", fmt(&sol.lower_multipliers));
    println!("KKT residual    {:.3e}", kkt_residual(&qp, &sol)?);

    // Contradictory constraints come back with a certificate instead of a β.
    let infeasible = QuadraticProgram::new(dmatrix![1.0, 0.0; 0.0, 1.0], dvector![0.0, 0.0])?
        .with_inequalities(dmatrix![1.0, 1.0; -1.0, -1.0], dvector![1.0, -3.0])?;
    let sol = solve_qp_default(&infeasible)?;
    println!("\ninfeasible QP   {:?}, certificate {:?}", sol.status, sol.certificate);
    Ok(())
}
