//! Independent reference computations and fixtures shared by the
//! integration and acceptance tests. Nothing here calls into the solver.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Random symmetric positive definite matrix with eigenvalues bounded away
/// from zero.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = normal_matrix(rng, n, n);
    m.transpose() * &m + DMatrix::identity(n, n) * 0.5
}

/// Null-space method for `min ½xᵀHx + fᵀx s.t. Ax = b` (A full row rank):
/// a particular solution from the pseudo-inverse, a null-space basis from
/// the SVD, then a Cholesky solve of the reduced system.
pub fn equality_qp_oracle(h: &DMatrix<f64>, f: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = h.nrows();
    let m = a.nrows();
    if m == 0 {
        return h.clone().cholesky().expect("spd").solve(&(-f));
    }
    let svd = nalgebra::linalg::SVD::new(a.clone(), true, true);
    let x0 = svd.solve(b, 1e-12).expect("pseudo-inverse solve");
    // Rows m.. of Vᵀ from a full SVD of Aᵀ-padded matrix span null(A).
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let full = nalgebra::linalg::SVD::new(padded, false, true);
    let v_t = full.v_t.expect("v_t");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| full.singular_values[j].partial_cmp(&full.singular_values[i]).unwrap());
    let z_cols: Vec<DVector<f64>> = order[m..].iter().map(|&i| v_t.row(i).transpose()).collect();
    if z_cols.is_empty() {
        return x0;
    }
    let z = DMatrix::from_columns(&z_cols);
    let reduced_h = z.transpose() * h * &z;
    let rhs = -(z.transpose() * (f + h * &x0));
    let u = reduced_h.cholesky().expect("reduced spd").solve(&rhs);
    x0 + z * u
}

/// Weighted least squares via Householder QR of `√W·X`.
pub fn wls_oracle(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let sw = w.map(f64::sqrt);
    let xs = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| sw[i] * x[(i, j)]);
    let ys = y.component_mul(&sw);
    let qr = xs.qr();
    let qty = qr.q().transpose() * ys;
    qr.r().solve_upper_triangular(&qty).expect("full rank")
}

/// Weighted least squares fitted values of `y` on `x`, allowing
/// rank-deficient designs: project `√W·y` onto the column space of `√W·X`
/// found by column-pivoted QR with numerical rank detection.
pub fn wls_fitted_lstsq(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let sw = w.map(f64::sqrt);
    let xs = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| sw[i] * x[(i, j)]);
    let ys = y.component_mul(&sw);
    let qr = xs.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > 1e-10 * lead)
        .count();
    let q = qr.q();
    let q_r = q.columns(0, rank);
    let proj = q_r * (q_r.transpose() * &ys);
    proj.component_div(&sw)
}

pub fn rho(e: f64, k: f64) -> f64 {
    if e.abs() <= k {
        e * e
    } else {
        2.0 * k * e.abs() - k * k
    }
}

pub fn huber_sum(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, k: f64, beta: &DVector<f64>) -> f64 {
    let e = y - x * beta;
    e.iter().zip(w.iter()).map(|(e, w)| w * rho(*e, k)).sum()
}

/// Direct minimization of `Σ wᵢ ρ(yᵢ − xᵢβ)` for fixed `k` by Nelder–Mead
/// simplex search, restarted until the simplex stops improving.
pub fn huber_nelder_mead(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    k: f64,
    start: &DVector<f64>,
) -> DVector<f64> {
    let obj = |b: &DVector<f64>| huber_sum(x, y, w, k, b);
    let n = start.len();
    let mut best = start.clone();
    let mut scale = 1.0;
    for _restart in 0..60 {
        let mut simplex: Vec<DVector<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += scale * (1.0 + best[i].abs()) * 0.05;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(&obj).collect();
        for _ in 0..20_000 {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            let spread = (1..=n).map(|i| (&simplex[i] - &simplex[0]).amax()).fold(0.0, f64::max);
            if spread < 1e-13 * (1.0 + simplex[0].amax()) {
                break;
            }
            let centroid = simplex[..n].iter().fold(DVector::zeros(n), |acc, v| acc + v) / n as f64;
            let worst = simplex[n].clone();
            let reflect = &centroid + (&centroid - &worst);
            let fr = obj(&reflect);
            if fr < vals[0] {
                let expand = &centroid + 2.0 * (&centroid - &worst);
                let fe = obj(&expand);
                if fe < fr {
                    simplex[n] = expand;
                    vals[n] = fe;
                } else {
                    simplex[n] = reflect;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                simplex[n] = reflect;
                vals[n] = fr;
            } else {
                let contract = if fr < vals[n] {
                    &centroid + 0.5 * (&reflect - &centroid)
                } else {
                    &centroid + 0.5 * (&worst - &centroid)
                };
                let fc = obj(&contract);
                if fc < vals[n].min(fr) {
                    simplex[n] = contract;
                    vals[n] = fc;
                } else {
                    let x0 = simplex[0].clone();
                    for i in 1..=n {
                        simplex[i] = &x0 + 0.5 * (&simplex[i] - &x0);
                        vals[i] = obj(&simplex[i]);
                    }
                }
            }
        }
        let (i_min, _) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let moved = (&simplex[i_min] - &best).amax();
        if obj(&simplex[i_min]) < obj(&best) {
            best = simplex[i_min].clone();
        }
        if moved < 1e-12 * (1.0 + best.amax()) {
            break;
        }
        scale *= 0.5;
    }
    best
}

/// Append an intercept column.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

pub fn weighted_var(y: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let mean: f64 = y.dot(w) / w.sum();
    y.iter().zip(w.iter()).map(|(y, w)| w * (y - mean).powi(2)).sum::<f64>() / w.sum()
}

/// Write a CSV file from named numeric columns (shortest round-trip floats).
pub fn write_csv(path: &Path, headers: &[&str], columns: &[Vec<f64>]) {
    let n = columns.first().map_or(0, Vec::len);
    let mut s = headers.join(",");
    s.push('\n');
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    std::fs::write(path, s).unwrap();
}

/// Clean linear fixture: two weighted-centered regressors and noise of
/// magnitude in [0.15, 0.2], so the median absolute residual is close to the
/// largest one and every initial residual stays inside the 1.5σ threshold.
pub struct CleanFixture {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub extra: Vec<f64>,
}

pub fn clean_fixture(seed: u64, n: usize) -> CleanFixture {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.5..1.5)).collect();
    let mut a: Vec<f64> = (0..n).map(|_| normal.sample(&mut r)).collect();
    let mut b: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
    let total: f64 = w.iter().sum();
    for v in [&mut a, &mut b] {
        let mean = v.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
        v.iter_mut().for_each(|x| *x -= mean);
    }
    let y = (0..n)
        .map(|i| {
            let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            3.0 + 1.5 * a[i] - 2.0 * b[i] + sign * r.random_range(0.15..0.2)
        })
        .collect();
    let extra = (0..n).map(|_| r.random_range(0.0..100.0)).collect();
    CleanFixture { y, w, a, b, extra }
}

pub fn write_clean_fixture(dir: &Path, seed: u64, n: usize, robust: bool) -> std::path::PathBuf {
    let fx = clean_fixture(seed, n);
    write_csv(
        &dir.join("dev.csv"),
        &["y", "w", "a", "b", "extra"],
        &[fx.y, fx.w, fx.a, fx.b, fx.extra],
    );
    let cfg = dir.join(if robust { "robust.toml" } else { "ls.toml" });
    std::fs::write(
        &cfg,
        format!(
            "data = \"dev.csv\"\ny_column = \"y\"\nweight_column = \"w\"\ncolumns = [\"a\", \"b\"]\noutput = \"{}\"\n\n[robust]\nenabled = {robust}\n",
            if robust { "out_robust" } else { "out_ls" }
        ),
    )
    .unwrap();
    cfg
}
