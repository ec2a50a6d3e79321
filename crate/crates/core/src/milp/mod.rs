//! Self-contained mixed-binary linear programming.
//!
//! [`MilpModel`] is the solver-agnostic description; [`solve_lp`] runs the
//! simplex on purely continuous models and [`solve_milp`] adds
//! branch-and-bound over the binaries.

mod branch;
mod lp_format;
mod model;
mod simplex;

pub use lp_format::to_lp_format;
pub use model::{
    Constraint, MilpModel, ModelError, Objective, Relation, Sense, VarId, VarKind, Variable,
};

use simplex::{solve_relaxation, LpStatus};

/// Environment variable overriding the branch-and-bound node cap.
pub const NODE_LIMIT_ENV: &str = "CRN_SOLVER_NODE_LIMIT";

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Row and bound feasibility tolerance.
    pub feasibility_tol: f64,
    /// Distance from {0, 1} below which a binary counts as integral.
    pub integrality_tol: f64,
    /// Pivot cap for a single LP solve.
    pub max_pivots: usize,
    /// Node cap for branch-and-bound.
    pub max_nodes: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// The rounding heuristic runs while no incumbent exists and every binary
    /// is within this distance of an integer.
    pub rounding_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            max_pivots: 50_000,
            max_nodes: 100_000,
            bland_after: 500,
            rounding_threshold: 0.1,
        }
    }
}

impl SolverOptions {
    /// Defaults, with the node cap taken from `CRN_SOLVER_NODE_LIMIT` when set
    /// to a positive integer.
    pub fn from_env() -> Self {
        let mut opts = SolverOptions::default();
        if let Some(n) = std::env::var(NODE_LIMIT_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            opts.max_nodes = n;
        }
        opts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub nodes: usize,
    pub pivots: usize,
}

impl MilpSolution {
    fn without_values(status: SolveStatus, nvar: usize, nodes: usize, pivots: usize) -> Self {
        MilpSolution {
            status,
            values: vec![0.0; nvar],
            objective_value: f64::NAN,
            nodes,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

/// Solves a purely continuous model.
pub fn solve_lp(model: &MilpModel, opts: &SolverOptions) -> Result<MilpSolution, ModelError> {
    model.validate()?;
    if let Some(v) = model.variables.iter().find(|v| v.kind == VarKind::Binary) {
        return Err(ModelError::NotContinuous(v.name.clone()));
    }
    let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let lp = solve_relaxation(model, &lower, &upper, opts);
    let status = match lp.status {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::Unbounded,
        LpStatus::IterationLimit => SolveStatus::IterationLimit,
    };
    Ok(MilpSolution {
        status,
        values: lp.values,
        objective_value: lp.objective,
        nodes: 0,
        pivots: lp.pivots,
    })
}

/// Solves a mixed-binary model by branch-and-bound on LP relaxations.
pub fn solve_milp(model: &MilpModel, opts: &SolverOptions) -> Result<MilpSolution, ModelError> {
    model.validate()?;
    Ok(branch::branch_and_bound(model, opts))
}
