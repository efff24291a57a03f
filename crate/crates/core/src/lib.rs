//! Resonant nonlinear multipoint boundary value problems for scalar
//! difference equations
//!
//! ```text
//! y(t+n) + sum_j a_j(t) y(t+j) = g(t, y(t+m-1)),   t = 0..N-1
//! sum_i B_i (y(i), ..., y(i+n-1)) = 0
//! ```
//!
//! whose linear part has a one-dimensional kernel. [`linear`] builds the
//! projections and the right inverse, [`conditions`] checks the
//! sign-change conditions that guarantee existence, [`solver`] computes a
//! solution through the scalar bifurcation equation and [`oracle`] verifies
//! it by Newton's method on the full system.

pub mod conditions;
pub mod expr;
pub mod golden;
pub mod linalg;
pub mod linear;
pub mod oracle;
pub mod problem;
pub mod solver;

pub use conditions::{
    AutoSearch, Certificate, CheckOptions, Checker, ConditionReport, ConditionsError, Orientation,
    SignSets, Verdict,
};
pub use expr::{Expr, ScalarField};
pub use linear::{LinearAnalysis, LinearError, LinearReport};
pub use oracle::{FullSystem, MultistartReport};
pub use problem::{GridFunction, Nonlinearity, ProblemError, ProblemSpec, ScalarTrajectory};
pub use solver::{BifurcationProblem, SolveError, SolveOptions, SolveResult};
