use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    InvertedBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("binary variable `{0}` must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("constraint `{constraint}` references variable {index} but the model has {count}")]
    UnknownVariable {
        constraint: String,
        index: usize,
        count: usize,
    },
    #[error("objective references variable {index} but the model has {count}")]
    UnknownObjectiveVariable { index: usize, count: usize },
    #[error("non-finite coefficient or right-hand side in `{0}`")]
    NonFinite(String),
    #[error("solve_lp requires a purely continuous model; `{0}` is binary")]
    NotContinuous(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// A linear row `Σ a_j x_j (rel) rhs`, stored sparsely. Conceptually the row
/// spans every variable of the model; absent entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: Sense,
    pub terms: Vec<(VarId, f64)>,
}

impl Objective {
    pub fn value(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }
}

/// Solver-agnostic mixed-binary linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl Default for MilpModel {
    fn default() -> Self {
        Self::new()
    }
}

impl MilpModel {
    pub fn new() -> Self {
        MilpModel {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                sense: Sense::Minimize,
                terms: Vec::new(),
            },
        }
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        });
        VarId(self.variables.len() - 1)
    }

    /// Adds a row; repeated variables in `terms` are summed and zero
    /// coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, b)) => *b += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            relation,
            rhs,
        });
    }

    pub fn set_objective(&mut self, sense: Sense, terms: impl IntoIterator<Item = (VarId, f64)>) {
        self.objective = Objective {
            sense,
            terms: terms.into_iter().filter(|(_, c)| *c != 0.0).collect(),
        };
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
    }

    /// Dense view of row `k`, one entry per variable.
    pub fn dense_row(&self, k: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.variables.len()];
        for (v, a) in &self.constraints[k].terms {
            row[v.0] += a;
        }
        row
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let count = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::InvertedBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
            for (v, a) in &c.terms {
                if v.0 >= count {
                    return Err(ModelError::UnknownVariable {
                        constraint: c.name.clone(),
                        index: v.0,
                        count,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(c.name.clone()));
                }
            }
        }
        for (v, c) in &self.objective.terms {
            if v.0 >= count {
                return Err(ModelError::UnknownObjectiveVariable { index: v.0, count });
            }
            if !c.is_finite() {
                return Err(ModelError::NonFinite("objective".into()));
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of an assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}
