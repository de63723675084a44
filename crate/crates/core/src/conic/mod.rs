//! Generic second-order cone programming over real variables.
//!
//! A program minimizes `(1/2) x' P x + q' x + r` subject to a list of cones,
//! where P is restricted by construction to diagonal-nonnegative plus Gram
//! (`sum of (1/2)(g' x + g0)^2`) contributions, so it is always positive
//! semidefinite. Constraints are second-order cones `||A x + b|| <= c' x + d`,
//! nonnegativity of affine expressions, and affine equalities.
//!
//! `solve` runs a homogeneous self-dual primal-dual interior-point method with
//! Nesterov-Todd scaling. Quadratic objectives are lowered to an epigraph
//! second-order cone internally (see [`quad_epigraph`] for the identity), so
//! the iteration always works on the linear-objective standard form
//! `min c' y  s.t.  A y + s = b, s in K`, exposed via
//! [`ConicProgram::standard_form`].
//!
//! Reported diagnostics, in the solver's documented scaling:
//! - `primal_residual`: max violation of the original cones at the returned
//!   `x`, divided by `1 + ||h||_2` with `h` the stacked constant offsets of
//!   those cones. A pure function of `(program, x)`.
//! - `dual_residual`: `||A' z + c||_2 / (1 + ||c||_2)` on the standard form,
//!   at the returned standard-form dual `z`.
//! - `gap`: `s' z / (1 + |c' y|)` on the standard form.
//!
//! `Optimal` is returned only when all three (plus the standard-form primal
//! residual) are at or below the requested tolerance.

mod program;
mod solver;

pub use program::{Cone, ConicProgram, LinExpr, ProgramBuilder, StandardForm};
pub use solver::{solve, DEFAULT_MAX_ITERS, DEFAULT_TOL};

use serde::Serialize;

/// Terminal state of a solve. `Infeasible` and `Unbounded` are legitimate
/// returns (with certificate vectors in the solution), not errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

/// Result of [`solve`]. `x` holds the original program variables;
/// `x_std`/`s_std`/`z_std` expose the full standard-form primal/slack/dual
/// point (including any epigraph auxiliary), which is what the residual
/// definitions above are evaluated on.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub x_std: Vec<f64>,
    pub s_std: Vec<f64>,
    pub z_std: Vec<f64>,
    /// Objective of the *original* program at `x`, including the constant.
    /// NaN for infeasibility/unboundedness certificates.
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Epigraph of a squared norm as a single second-order cone:
/// `||x_S||^2 <= t` iff `||(2 x_S, t - 1)||_2 <= t + 1`.
///
/// Returns the cone over the variables listed in `x_indices` and the scalar
/// `t_index`; add it to a builder to use it.
pub fn quad_epigraph(x_indices: &[usize], t_index: usize) -> Cone {
    let mut rows: Vec<LinExpr> = x_indices
        .iter()
        .map(|&i| LinExpr::new().with_term(i, 2.0))
        .collect();
    rows.push(LinExpr::new().with_term(t_index, 1.0).with_constant(-1.0));
    let rhs = LinExpr::new().with_term(t_index, 1.0).with_constant(1.0);
    Cone::Soc { rows, rhs }
}
