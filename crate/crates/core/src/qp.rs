//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! minimize    ½ βᵀHβ + fᵀβ
//! subject to  A_eq β = b_eq
//!             A_ineq β ≤ b_ineq
//!             l ≤ β ≤ u
//! ```
//!
//! with a primal active-set method. Each iteration solves the
//! equality-constrained subproblem on the current working set through its
//! KKT system. A feasible starting point comes from the least-norm solution
//! of the equalities, repaired by a phase-1 pass when inequalities are
//! violated. Bounds are folded into inequality rows.
//!
//! Every returned solution carries its KKT residual so callers can check the
//! certificate independently with [`kkt_residual`].

use log::debug;
use nalgebra::{DMatrix, DVector, FullPivLU, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-10;
const PD_MARGIN: f64 = 1e-10;
const SHIFT_FACTOR: f64 = 1e-10;
const ROW_DEPENDENCE_TOL: f64 = 1e-10;
const PHASE1_MAX_PASSES: usize = 20;
const PROX_MAX_PASSES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    /// H was not positive definite on the equality null space (or the
    /// certificate could not be tightened to tolerance); a diagonal shift was
    /// applied and the returned point is a minimizer of the original problem
    /// up to that regularization.
    Degenerate,
}

/// Identifies one constraint row of a [`QuadraticProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintRef {
    Equality(usize),
    Inequality(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    h: DMatrix<f64>,
    f: DVector<f64>,
    a_ineq: DMatrix<f64>,
    b_ineq: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    lower: Option<DVector<f64>>,
    upper: Option<DVector<f64>>,
}

impl QuadraticProgram {
    /// Unconstrained program; add constraint blocks with the `with_*` methods.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::InvalidQp("empty program".into()));
        }
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::InvalidQp(format!(
                "H is {}x{}, f has length {n}",
                h.nrows(),
                h.ncols()
            )));
        }
        if h.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidQp("non-finite entry in H or f".into()));
        }
        let scale = h.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (h[(i, j)] - h[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidQp(format!("H is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            h,
            f,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lower: None,
            upper: None,
        })
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        self.check_block("equality", &a, &b)?;
        self.a_eq = a;
        self.b_eq = b;
        Ok(self)
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        self.check_block("inequality", &a, &b)?;
        self.a_ineq = a;
        self.b_ineq = b;
        Ok(self)
    }

    /// Infinite entries mean "no bound" for that coordinate.
    pub fn with_bounds(mut self, lower: Option<DVector<f64>>, upper: Option<DVector<f64>>) -> Result<Self> {
        let n = self.dim();
        for (name, bound) in [("lower", &lower), ("upper", &upper)] {
            if let Some(b) = bound {
                if b.len() != n {
                    return Err(Error::InvalidQp(format!("{name} bound has length {}", b.len())));
                }
                if b.iter().any(|v| v.is_nan()) {
                    return Err(Error::InvalidQp(format!("NaN in {name} bound")));
                }
            }
        }
        if let (Some(l), Some(u)) = (&lower, &upper) {
            if l.iter().zip(u.iter()).any(|(l, u)| l > u) {
                return Err(Error::InvalidQp("lower bound exceeds upper bound".into()));
            }
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    fn check_block(&self, name: &str, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
        if a.ncols() != self.dim() || a.nrows() != b.len() {
            return Err(Error::InvalidQp(format!(
                "{name} block is {}x{} with {} right-hand sides, program has {} variables",
                a.nrows(),
                a.ncols(),
                b.len(),
                self.dim()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidQp(format!("non-finite entry in {name} block")));
        }
        Ok(())
    }

    /// Replace the linear term, keeping H and every constraint block.
    pub fn set_linear_term(&mut self, f: DVector<f64>) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::dim("linear term", self.dim(), f.len()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidQp("non-finite linear term".into()));
        }
        self.f = f;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn a_eq(&self) -> &DMatrix<f64> {
        &self.a_eq
    }

    pub fn b_eq(&self) -> &DVector<f64> {
        &self.b_eq
    }

    pub fn a_ineq(&self) -> &DMatrix<f64> {
        &self.a_ineq
    }

    pub fn b_ineq(&self) -> &DVector<f64> {
        &self.b_ineq
    }

    pub fn lower(&self) -> Option<&DVector<f64>> {
        self.lower.as_ref()
    }

    pub fn upper(&self) -> Option<&DVector<f64>> {
        self.upper.as_ref()
    }

    /// `½ βᵀHβ + fᵀβ`.
    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(&(&self.h * beta)) + self.f.dot(beta)
    }

    /// Default iteration budget `50·(n + m_ineq)`, bounds included.
    pub fn default_max_iter(&self) -> usize {
        50 * (self.dim() + self.a_ineq.nrows() + self.finite_bounds())
    }

    fn finite_bounds(&self) -> usize {
        let count = |b: &Option<DVector<f64>>| b.as_ref().map_or(0, |b| b.iter().filter(|v| v.is_finite()).count());
        count(&self.lower) + count(&self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub beta: DVector<f64>,
    pub status: QpStatus,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    /// Length n; zero where the bound is absent or inactive.
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// For `Infeasible`, the constraint found inconsistent.
    pub certificate: Option<ConstraintRef>,
}

impl QpSolution {
    pub fn is_usable(&self) -> bool {
        matches!(self.status, QpStatus::Optimal | QpStatus::Degenerate)
    }
}

/// Largest of the stationarity, primal feasibility, dual feasibility and
/// complementary slackness residuals of `sol` on `qp`.
pub fn kkt_residual(qp: &QuadraticProgram, sol: &QpSolution) -> Result<f64> {
    let n = qp.dim();
    if sol.beta.len() != n {
        return Err(Error::dim("solution", n, sol.beta.len()));
    }
    if sol.eq_multipliers.len() != qp.a_eq.nrows() {
        return Err(Error::dim(
            "equality multipliers",
            qp.a_eq.nrows(),
            sol.eq_multipliers.len(),
        ));
    }
    if sol.ineq_multipliers.len() != qp.a_ineq.nrows() {
        return Err(Error::dim(
            "inequality multipliers",
            qp.a_ineq.nrows(),
            sol.ineq_multipliers.len(),
        ));
    }
    if sol.lower_multipliers.len() != n || sol.upper_multipliers.len() != n {
        return Err(Error::dim("bound multipliers", n, sol.lower_multipliers.len()));
    }
    let beta = &sol.beta;

    let grad = &qp.h * beta
        + &qp.f
        + qp.a_eq.transpose() * &sol.eq_multipliers
        + qp.a_ineq.transpose() * &sol.ineq_multipliers
        + &sol.upper_multipliers
        - &sol.lower_multipliers;
    let mut worst = grad.amax();

    if qp.a_eq.nrows() > 0 {
        worst = worst.max((&qp.a_eq * beta - &qp.b_eq).amax());
    }

    // slack = a'β − b must be ≤ 0, μ ≥ 0, μ·slack = 0
    let ineq_residual = |slack: f64, mu: f64| slack.max(0.0).max((-mu).max(0.0)).max((mu * slack).abs());
    let ax = &qp.a_ineq * beta;
    for j in 0..qp.a_ineq.nrows() {
        worst = worst.max(ineq_residual(ax[j] - qp.b_ineq[j], sol.ineq_multipliers[j]));
    }
    for i in 0..n {
        let (mu_u, mu_l) = (sol.upper_multipliers[i], sol.lower_multipliers[i]);
        match qp.upper.as_ref().map(|u| u[i]).filter(|u| u.is_finite()) {
            Some(u) => worst = worst.max(ineq_residual(beta[i] - u, mu_u)),
            None => worst = worst.max(mu_u.abs()),
        }
        match qp.lower.as_ref().map(|l| l[i]).filter(|l| l.is_finite()) {
            Some(l) => worst = worst.max(ineq_residual(l - beta[i], mu_l)),
            None => worst = worst.max(mu_l.abs()),
        }
    }
    Ok(worst)
}

/// Solve `qp` with stationarity/feasibility tolerance `tol`.
///
/// Input errors are returned as `Err`; numerical outcomes (infeasible,
/// iteration limit) are reported through [`QpSolution::status`].
pub fn solve_qp(qp: &QuadraticProgram, tol: f64, max_iter: usize) -> Result<QpSolution> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidQp(format!("tolerance must be positive, got {tol}")));
    }
    let n = qp.dim();
    let rows = InequalityRows::fold(qp);
    let eq = EqualityRows::select(qp);
    let feas_tol = tol * (1.0 + qp.b_eq.amax().max(rows.b.amax()));

    // Least-norm point on the equality manifold.
    let start = if eq.a.nrows() == 0 {
        DVector::zeros(n)
    } else {
        least_norm(&eq.a, &eq.b)?
    };
    for &(row, ref a_row) in &eq.dropped {
        let r = a_row.dot(&start) - qp.b_eq[row];
        if r.abs() > feas_tol * (1.0 + a_row.norm() * start.amax()) {
            debug!("equality row {row} is inconsistent with earlier rows");
            return Ok(infeasible(qp, start, ConstraintRef::Equality(row), 0));
        }
    }

    let (h, shift) = regularized_hessian(&qp.h, &eq.a)?;
    let core = Core {
        h: &h,
        aeq: &eq.a,
        beq: &eq.b,
        ain: &rows.a,
        bin: &rows.b,
        max_iter,
        mult_tol: 1e-12 * (1.0 + qp.f.amax() + qp.h.amax()),
    };

    let mut iterations = 0;
    let (start, phase1_iters) = match phase_one(&core, start, feas_tol)? {
        PhaseOne::Feasible(beta, its) => (beta, its),
        PhaseOne::Infeasible(beta, row, its) => {
            return Ok(infeasible(qp, beta, rows.origin[row], its));
        }
    };
    iterations += phase1_iters;

    let mut run = core.run(&qp.f, start.clone(), Vec::new())?;
    iterations += run.iterations;
    if shift > 0.0 && !run.hit_limit {
        // Proximal refinement: minimize the original objective plus
        // shift/2·‖β − β_k‖², recentred each pass.
        let mut center = run.beta.clone();
        for _ in 0..PROX_MAX_PASSES {
            let f_k = &qp.f - &center * shift;
            let next = core.run(&f_k, center.clone(), run.working.clone())?;
            iterations += next.iterations;
            let change = (&next.beta - &center).amax();
            let hit = next.hit_limit;
            run = next;
            center = run.beta.clone();
            if hit || change <= 1e-14 * (1.0 + center.amax()) {
                break;
            }
        }
    }

    let mut eq_multipliers = DVector::zeros(qp.a_eq.nrows());
    for (k, &row) in eq.kept.iter().enumerate() {
        eq_multipliers[row] = run.eq_mult[k];
    }
    let mut ineq_multipliers = DVector::zeros(qp.a_ineq.nrows());
    let mut lower_multipliers = DVector::zeros(n);
    let mut upper_multipliers = DVector::zeros(n);
    for (j, mu) in run.ineq_mult.iter().enumerate() {
        match rows.origin[j] {
            ConstraintRef::Inequality(r) => ineq_multipliers[r] = *mu,
            ConstraintRef::Upper(i) => upper_multipliers[i] = *mu,
            ConstraintRef::Lower(i) => lower_multipliers[i] = *mu,
            ConstraintRef::Equality(_) => unreachable!("equalities are not folded"),
        }
    }

    let mut sol = QpSolution {
        beta: run.beta,
        status: QpStatus::Optimal,
        eq_multipliers,
        ineq_multipliers,
        lower_multipliers,
        upper_multipliers,
        kkt_residual: 0.0,
        iterations,
        certificate: None,
    };
    sol.kkt_residual = kkt_residual(qp, &sol)?;
    let accept = tol * (1.0 + qp.h.amax() * sol.beta.amax() + qp.f.amax());
    sol.status = if run.hit_limit {
        QpStatus::MaxIterations
    } else if shift > 0.0 || sol.kkt_residual > accept {
        QpStatus::Degenerate
    } else {
        QpStatus::Optimal
    };
    debug!(
        "qp solved: status {:?}, {} iterations, kkt residual {:.3e}",
        sol.status, sol.iterations, sol.kkt_residual
    );
    Ok(sol)
}

/// [`solve_qp`] with the default tolerance and iteration budget.
pub fn solve_qp_default(qp: &QuadraticProgram) -> Result<QpSolution> {
    solve_qp(qp, DEFAULT_TOL, qp.default_max_iter())
}

fn infeasible(qp: &QuadraticProgram, beta: DVector<f64>, certificate: ConstraintRef, iterations: usize) -> QpSolution {
    let n = qp.dim();
    QpSolution {
        beta,
        status: QpStatus::Infeasible,
        eq_multipliers: DVector::zeros(qp.a_eq.nrows()),
        ineq_multipliers: DVector::zeros(qp.a_ineq.nrows()),
        lower_multipliers: DVector::zeros(n),
        upper_multipliers: DVector::zeros(n),
        kkt_residual: f64::INFINITY,
        iterations,
        certificate: Some(certificate),
    }
}

/// General inequalities followed by finite upper then lower bounds, all as
/// `a'β ≤ b` rows.
struct InequalityRows {
    a: DMatrix<f64>,
    b: DVector<f64>,
    origin: Vec<ConstraintRef>,
}

impl InequalityRows {
    fn fold(qp: &QuadraticProgram) -> Self {
        let n = qp.dim();
        let mut rows: Vec<(Vec<f64>, f64, ConstraintRef)> = (0..qp.a_ineq.nrows())
            .map(|r| {
                let row = qp.a_ineq.row(r).iter().copied().collect();
                (row, qp.b_ineq[r], ConstraintRef::Inequality(r))
            })
            .collect();
        let unit = |i: usize, sign: f64| {
            let mut v = vec![0.0; n];
            v[i] = sign;
            v
        };
        if let Some(u) = &qp.upper {
            for i in (0..n).filter(|&i| u[i].is_finite()) {
                rows.push((unit(i, 1.0), u[i], ConstraintRef::Upper(i)));
            }
        }
        if let Some(l) = &qp.lower {
            for i in (0..n).filter(|&i| l[i].is_finite()) {
                rows.push((unit(i, -1.0), -l[i], ConstraintRef::Lower(i)));
            }
        }
        let m = rows.len();
        let a = DMatrix::from_fn(m, n, |r, c| rows[r].0[c]);
        let b = DVector::from_fn(m, |r, _| rows[r].1);
        let origin = rows.into_iter().map(|r| r.2).collect();
        Self { a, b, origin }
    }
}

/// Linearly independent subset of the equality rows, chosen greedily in row
/// order.
struct EqualityRows {
    a: DMatrix<f64>,
    b: DVector<f64>,
    kept: Vec<usize>,
    dropped: Vec<(usize, DVector<f64>)>,
}

impl EqualityRows {
    fn select(qp: &QuadraticProgram) -> Self {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for r in 0..qp.a_eq.nrows() {
            let row: DVector<f64> = qp.a_eq.row(r).transpose();
            let norm = row.norm();
            let mut v = row.clone();
            for _ in 0..2 {
                for q in &basis {
                    let proj = q.dot(&v);
                    v.axpy(-proj, q, 1.0);
                }
            }
            let rest = v.norm();
            if norm > 0.0 && rest > ROW_DEPENDENCE_TOL * norm {
                basis.push(v / rest);
                kept.push(r);
            } else {
                dropped.push((r, row));
            }
        }
        let n = qp.dim();
        let a = DMatrix::from_fn(kept.len(), n, |i, c| qp.a_eq[(kept[i], c)]);
        let b = DVector::from_fn(kept.len(), |i, _| qp.b_eq[kept[i]]);
        Self { a, b, kept, dropped }
    }
}

fn least_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = SVD::new(a.clone(), true, true);
    let eps = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * svd.singular_values.max();
    svd.solve(b, eps)
        .map_err(|e| Error::Numerical(format!("least-norm equality solve: {e}")))
}

/// Return H, shifted by `1e-10·trace(H)/n` on the diagonal when it is not
/// positive definite on the null space of `aeq`, together with the shift.
fn regularized_hessian(h: &DMatrix<f64>, aeq: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = h.nrows();
    let null_basis = if aeq.nrows() == 0 {
        DMatrix::identity(n, n)
    } else {
        if aeq.nrows() >= n {
            return Ok((h.clone(), 0.0));
        }
        let pinv = aeq
            .clone()
            .pseudo_inverse(f64::EPSILON * n as f64)
            .map_err(|e| Error::Numerical(format!("null-space projector: {e}")))?;
        let projector = DMatrix::identity(n, n) - pinv * aeq;
        let eig = SymmetricEigen::new(projector);
        let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        if cols.is_empty() {
            return Ok((h.clone(), 0.0));
        }
        eig.eigenvectors.select_columns(&cols)
    };
    let reduced = null_basis.transpose() * h * &null_basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let min_eig = SymmetricEigen::new(reduced).eigenvalues.min();
    let trace = h.trace();
    let scale = if trace > 0.0 { trace / n as f64 } else { 1.0 };
    if min_eig > PD_MARGIN * scale {
        return Ok((h.clone(), 0.0));
    }
    let shift = SHIFT_FACTOR * scale;
    debug!("H not positive definite on equality null space (min eig {min_eig:.3e}); shifting by {shift:.3e}");
    let mut shifted = h.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }
    Ok((shifted, shift))
}

enum PhaseOne {
    Feasible(DVector<f64>, usize),
    Infeasible(DVector<f64>, usize, usize),
}

fn max_violation(a: &DMatrix<f64>, b: &DVector<f64>, beta: &DVector<f64>) -> (f64, usize) {
    let r = a * beta - b;
    let mut worst = (f64::NEG_INFINITY, 0);
    for (j, v) in r.iter().enumerate() {
        if *v > worst.0 {
            worst = (*v, j);
        }
    }
    worst
}

/// Repair inequality violations of an equality-feasible point by solving
///
/// ```text
/// minimize ½‖β − β₀‖² + ½t² + Γt   s.t.  A_eq β = b_eq,  A β − t ≤ b,  t ≥ 0
/// ```
///
/// from the trivially feasible `(β₀, max violation)`. The optimal `t` is at
/// most `dist(β₀, feasible set)²/(2Γ)`, so a few recentred passes drive it
/// below tolerance when the constraints are consistent.
fn phase_one(core: &Core<'_>, start: DVector<f64>, feas_tol: f64) -> Result<PhaseOne> {
    let m = core.ain.nrows();
    if m == 0 {
        return Ok(PhaseOne::Feasible(start, 0));
    }
    let (viol, _) = max_violation(core.ain, core.bin, &start);
    if viol <= feas_tol {
        return Ok(PhaseOne::Feasible(start, 0));
    }
    let n = start.len();
    let h1 = DMatrix::identity(n + 1, n + 1);
    let aeq1 = core.aeq.clone().insert_column(n, 0.0);
    let beq1 = core.beq.clone();
    let mut ain1 = core.ain.clone().insert_column(n, -1.0).insert_row(m, 0.0);
    ain1[(m, n)] = -1.0;
    let bin1 = core.bin.clone().insert_row(m, 0.0);
    let sub = Core {
        h: &h1,
        aeq: &aeq1,
        beq: &beq1,
        ain: &ain1,
        bin: &bin1,
        max_iter: core.max_iter,
        mult_tol: 1e-14,
    };

    let mut beta = start;
    let mut iterations = 0;
    let mut prev_viol = viol;
    for _ in 0..PHASE1_MAX_PASSES {
        let gamma = 1e6 * (1.0 + beta.amax() + prev_viol);
        let mut f1 = -beta.clone().insert_row(n, 0.0);
        f1[n] = gamma;
        let z0 = beta.clone().insert_row(n, prev_viol.max(0.0));
        let run = sub.run(&f1, z0, Vec::new())?;
        iterations += run.iterations;
        beta = run.beta.rows(0, n).into_owned();
        let (viol, row) = max_violation(core.ain, core.bin, &beta);
        if viol <= feas_tol {
            return Ok(PhaseOne::Feasible(beta, iterations));
        }
        if run.hit_limit || viol > 0.5 * prev_viol {
            return Ok(PhaseOne::Infeasible(beta, row, iterations));
        }
        prev_viol = viol;
    }
    let (_, row) = max_violation(core.ain, core.bin, &beta);
    Ok(PhaseOne::Infeasible(beta, row, iterations))
}

struct Core<'a> {
    h: &'a DMatrix<f64>,
    aeq: &'a DMatrix<f64>,
    beq: &'a DVector<f64>,
    ain: &'a DMatrix<f64>,
    bin: &'a DVector<f64>,
    max_iter: usize,
    mult_tol: f64,
}

struct CoreRun {
    beta: DVector<f64>,
    working: Vec<usize>,
    eq_mult: DVector<f64>,
    ineq_mult: DVector<f64>,
    iterations: usize,
    hit_limit: bool,
}

impl Core<'_> {
    /// Primal active-set iterations from a feasible `beta` and an initial
    /// working set of inequality rows.
    fn run(&self, f: &DVector<f64>, mut beta: DVector<f64>, mut working: Vec<usize>) -> Result<CoreRun> {
        let me = self.aeq.nrows();
        let m = self.ain.nrows();
        let row_norms: Vec<f64> = (0..m).map(|i| self.ain.row(i).norm()).collect();

        for iter in 0..self.max_iter {
            let (x, lambda) = self.solve_subproblem(f, &working)?;
            let d = &x - &beta;
            let d_norm = d.amax();

            let mut alpha = 1.0;
            let mut blocking = None;
            if d_norm > 0.0 {
                for i in 0..m {
                    if working.contains(&i) {
                        continue;
                    }
                    let ad = self.ain.row(i).dot(&d.transpose());
                    if ad <= 1e-13 * row_norms[i] * d_norm {
                        continue;
                    }
                    let slack = self.bin[i] - self.ain.row(i).dot(&beta.transpose());
                    let step = slack.max(0.0) / ad;
                    if step < alpha {
                        alpha = step;
                        blocking = Some(i);
                    }
                }
            }

            match blocking {
                Some(i) => {
                    beta.axpy(alpha, &d, 1.0);
                    working.push(i);
                }
                None => {
                    beta = x;
                    let mut drop: Option<(usize, f64)> = None;
                    for (k, &row) in working.iter().enumerate() {
                        let mu = lambda[me + k];
                        if mu < -self.mult_tol {
                            let better = match drop {
                                None => true,
                                Some((kk, best)) => mu < best || (mu == best && row < working[kk]),
                            };
                            if better {
                                drop = Some((k, mu));
                            }
                        }
                    }
                    match drop {
                        Some((k, _)) => {
                            working.remove(k);
                        }
                        None => {
                            let mut ineq_mult = DVector::zeros(m);
                            for (k, &row) in working.iter().enumerate() {
                                ineq_mult[row] = lambda[me + k];
                            }
                            return Ok(CoreRun {
                                beta,
                                working,
                                eq_mult: lambda.rows(0, me).into_owned(),
                                ineq_mult,
                                iterations: iter + 1,
                                hit_limit: false,
                            });
                        }
                    }
                }
            }
        }

        // Out of budget: report the current feasible iterate with the
        // multipliers of its working set.
        let (_, lambda) = self.solve_subproblem(f, &working)?;
        let mut ineq_mult = DVector::zeros(m);
        for (k, &row) in working.iter().enumerate() {
            ineq_mult[row] = lambda[me + k].max(0.0);
        }
        Ok(CoreRun {
            beta,
            working,
            eq_mult: lambda.rows(0, me).into_owned(),
            ineq_mult,
            iterations: self.max_iter,
            hit_limit: true,
        })
    }

    /// Minimizer of ½xᵀHx + fᵀx subject to the equalities and the working
    /// inequalities held as equalities, via the KKT system
    /// `[H Aᵀ; A 0][x; λ] = [−f; b]`.
    fn solve_subproblem(&self, f: &DVector<f64>, working: &[usize]) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = f.len();
        let me = self.aeq.nrows();
        let mw = me + working.len();
        let size = n + mw;
        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (n, n)).copy_from(self.h);
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, n).copy_from(&(-f));
        for r in 0..mw {
            let (row, b) = if r < me {
                (self.aeq.row(r), self.beq[r])
            } else {
                let i = working[r - me];
                (self.ain.row(i), self.bin[i])
            };
            for c in 0..n {
                kkt[(n + r, c)] = row[c];
                kkt[(c, n + r)] = row[c];
            }
            rhs[n + r] = b;
        }
        let lu = FullPivLU::new(kkt.clone());
        let mut sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular KKT system".into()))?;
        // One step of iterative refinement.
        let resid = &rhs - &kkt * &sol;
        if let Some(corr) = lu.solve(&resid) {
            sol += corr;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite KKT solution".into()));
        }
        Ok((sol.rows(0, n).into_owned(), sol.rows(n, mw).into_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(data)
    }

    #[test]
    fn unconstrained_scalar() {
        let qp = QuadraticProgram::new(m(1, 1, &[2.0]), v(&[-2.0])).unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.beta[0] - 1.0).abs() < 1e-12);
        assert!(kkt_residual(&qp, &sol).unwrap() <= 1e-10);

        let mut perturbed = sol.clone();
        perturbed.beta[0] += 1.0;
        assert!(kkt_residual(&qp, &perturbed).unwrap() >= 1.0);
    }

    #[test]
    fn active_bound_multiplier() {
        let qp = QuadraticProgram::new(m(1, 1, &[2.0]), v(&[-2.0]))
            .unwrap()
            .with_inequalities(m(1, 1, &[1.0]), v(&[0.0]))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.beta[0].abs() < 1e-12);
        assert!((sol.ineq_multipliers[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_example_matches_kkt_system() {
        let qp = QuadraticProgram::new(m(2, 2, &[2.0, 0.0, 0.0, 2.0]), v(&[-2.0, -4.0]))
            .unwrap()
            .with_equalities(m(1, 2, &[1.0, 1.0]), v(&[1.0]))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        // [2 0 1; 0 2 1; 1 1 0][b; nu] = [2; 4; 1] → b = [0, 1], nu = 2
        assert!((&sol.beta - v(&[0.0, 1.0])).amax() < 1e-12);
        assert!((sol.eq_multipliers[0] - 2.0).abs() < 1e-12);
        assert!(kkt_residual(&qp, &sol).unwrap() <= 1e-8);
    }

    #[test]
    fn bounds_are_folded() {
        // minimize (b0 - 3)^2 + (b1 + 2)^2 with 0 <= b <= 1
        let qp = QuadraticProgram::new(m(2, 2, &[2.0, 0.0, 0.0, 2.0]), v(&[-6.0, 4.0]))
            .unwrap()
            .with_bounds(Some(v(&[0.0, 0.0])), Some(v(&[1.0, 1.0])))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.beta - v(&[1.0, 0.0])).amax() < 1e-12);
        assert!((sol.upper_multipliers[0] - 4.0).abs() < 1e-10);
        assert!((sol.lower_multipliers[1] - 4.0).abs() < 1e-10);
    }

    #[test]
    fn infeasible_inequalities_are_reported() {
        // b ≤ -1 and -b ≤ -1 (b ≥ 1)
        let qp = QuadraticProgram::new(m(1, 1, &[2.0]), v(&[0.0]))
            .unwrap()
            .with_inequalities(m(2, 1, &[1.0, -1.0]), v(&[-1.0, -1.0]))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(matches!(sol.certificate, Some(ConstraintRef::Inequality(_))));
    }

    #[test]
    fn inconsistent_equalities_are_reported() {
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2), v(&[0.0, 0.0]))
            .unwrap()
            .with_equalities(m(2, 2, &[1.0, 1.0, 2.0, 2.0]), v(&[1.0, 3.0]))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert_eq!(sol.certificate, Some(ConstraintRef::Equality(1)));
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let qp = QuadraticProgram::new(m(2, 2, &[2.0, 0.0, 0.0, 2.0]), v(&[-2.0, -4.0]))
            .unwrap()
            .with_equalities(m(2, 2, &[1.0, 1.0, 2.0, 2.0]), v(&[1.0, 2.0]))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.beta - v(&[0.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn infeasible_start_is_repaired() {
        // minimize (b0-1)^2 + (b1-1)^2 s.t. b0 + b1 ≤ -4, b0 - b1 ≤ 10
        let qp = QuadraticProgram::new(m(2, 2, &[2.0, 0.0, 0.0, 2.0]), v(&[-2.0, -2.0]))
            .unwrap()
            .with_inequalities(m(2, 2, &[1.0, 1.0, 1.0, -1.0]), v(&[-4.0, 10.0]))
            .unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.beta - v(&[-2.0, -2.0])).amax() < 1e-10);
        assert!((sol.ineq_multipliers[0] - 6.0).abs() < 1e-9);
        assert_eq!(sol.ineq_multipliers[1], 0.0);
    }

    #[test]
    fn singular_hessian_is_shifted_and_flagged() {
        // Two copies of the same regressor: H = 2·[1 1; 1 1], f = -2·[1, 1].
        let qp = QuadraticProgram::new(m(2, 2, &[2.0, 2.0, 2.0, 2.0]), v(&[-2.0, -2.0])).unwrap();
        let sol = solve_qp_default(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Degenerate);
        assert!((sol.beta[0] + sol.beta[1] - 1.0).abs() < 1e-9);
        assert!(kkt_residual(&qp, &sol).unwrap() < 1e-9);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let qp = QuadraticProgram::new(DMatrix::identity(3, 3) * 2.0, v(&[-2.0, -2.0, -2.0]))
            .unwrap()
            .with_inequalities(DMatrix::identity(3, 3), v(&[0.0, 0.0, 0.0]))
            .unwrap();
        let sol = solve_qp(&qp, DEFAULT_TOL, 1).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
        assert!(sol.beta.iter().all(|b| *b <= 1e-12));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(QuadraticProgram::new(m(2, 2, &[1.0, 0.5, 0.0, 1.0]), v(&[0.0, 0.0])).is_err());
        assert!(QuadraticProgram::new(m(1, 1, &[1.0]), v(&[0.0, 0.0])).is_err());
        let qp = QuadraticProgram::new(m(1, 1, &[1.0]), v(&[0.0])).unwrap();
        assert!(qp.clone().with_inequalities(m(1, 2, &[1.0, 1.0]), v(&[0.0])).is_err());
        assert!(solve_qp(&qp, 0.0, 10).is_err());
    }
}
