//! Small dense log-barrier interior-point solver for linear objectives over
//! smooth convex constraints: affine rows, diagonal quadratics bounded by an
//! affine form, `x² ≤ s·log₂(1+y)` and `x² ≤ a·x`.
//!
//! ```
//! use fdcf_solver::{solve, Constraint, ConvexProgram, SolverOptions};
//!
//! let mut p = ConvexProgram::new();
//! let x = p.add_free_var("x");
//! p.add_objective(x, 1.0);
//! p.add_constraint("cap", Constraint::Affine { a: vec![(x, 1.0)], b: 1.0 }).unwrap();
//! let res = solve(&p, &[0.0], &SolverOptions::default()).unwrap();
//! assert!((res.point[0] - 1.0).abs() < 1e-8);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod barrier;
mod kkt;
mod program;
pub mod selftest;

pub use barrier::{solve, SolveResult, SolveStatus, SolverOptions};
pub use kkt::{kkt_residual, Multipliers};
pub use program::{Constraint, ConvexProgram, VarId, Variable};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SolverError {
    #[error("constraint `{label}` references undeclared variable {index}")]
    UnknownVariable { label: String, index: usize },
    #[error("constraint `{label}` is not convex: {reason}")]
    NonConvex { label: String, reason: String },
    #[error("start point has {got} entries, program has {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("start point contains non-finite values")]
    NonFiniteStart,
    #[error("variable {index} has an empty box")]
    EmptyBox { index: usize },
}
