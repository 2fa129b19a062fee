//! Score-engineered robust least squares.
//!
//! A scorecard `E[y|X] = S0 + Σ Sj Xj` is fitted by weighted ridge least
//! squares under linear equality and inequality constraints on the score
//! weights ("score engineering"), solved as a dense convex QP with an
//! active-set method. [`robust::fit_robust`] turns this into Huber
//! M-regression by iteratively winsorizing residuals at `k = m·σ`, where `σ`
//! is a weighted-median scale estimate. [`marginal`] ranks fitted (Step I)
//! and candidate (Step II) characteristics by their effect on normalized
//! winsorized squared error.
//!
//! ```
//! use nalgebra::DMatrix;
//! use serls::{fit_robust, EngineeredProblem, ObservationSet, RobustConfig};
//!
//! let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
//! let mut y: Vec<f64> = x.iter().map(|x| 1.0 + 0.5 * x).collect();
//! y[3] += 100.0;
//! let obs = ObservationSet::new(y, DMatrix::from_column_slice(20, 1, &x), None).unwrap();
//! let prob = EngineeredProblem::unconstrained(obs).unwrap();
//! let fit = fit_robust(&prob, &RobustConfig::default()).unwrap();
//! assert!((fit.beta.scores()[0] - 0.5).abs() < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod engineered;
pub mod error;
pub mod marginal;
pub mod model;
pub mod qp;
pub mod robust;

pub use basis::{bspline_basis, SplineSpec};
pub use engineered::{build_engineered_qp, fit_engineered_ls, score, weighted_sse, EngineeredProblem};
pub use error::{Error, Result};
pub use marginal::{
    evaluate_on_sample, marginal_report, step1_marginal, step1_objective, step2_marginal, MarginalReport, SampleLabel,
    Step2Candidate,
};
pub use model::{
    assemble_design, normalize_weights, Characteristic, CharacteristicLayout, Coefficients, ConstraintSet,
    DesignMatrix, ObservationSet, PenaltySpec,
};
pub use qp::{kkt_residual, solve_qp, solve_qp_default, QpSolution, QpStatus, QuadraticProgram};
pub use robust::{
    fit_robust, huber_loss, huber_objective, robust_scale, weighted_median, winsorize_residuals, RobustConfig,
    RobustFitResult,
};
