//! Branch-and-bound over the binary variables.
//!
//! Nodes are explored depth first; among open nodes of equal depth the one
//! with the better parent bound goes first. Branching picks the most
//! fractional binary and descends first towards its rounded value. A child
//! starts from its parent's optimal tableau and is re-optimized after the
//! single bound change.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::model::{MilpModel, Sense, VarKind};
use super::simplex::{solve_relaxation, LpStatus, StandardForm, Tableau};
use super::{MilpSolution, SolveStatus, SolverOptions};

struct Node {
    depth: usize,
    /// Lower bound on the (minimization) objective inherited from the parent.
    bound: f64,
    /// Preferred child of a pair goes first.
    preferred: bool,
    seq: usize,
    fixings: Vec<(usize, f64)>,
    parent: Option<Rc<Tableau>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: deeper first, then smaller bound, then preferred, then newer.
    fn cmp(&self, other: &Self) -> Ordering {
        self.depth
            .cmp(&other.depth)
            .then_with(|| other.bound.total_cmp(&self.bound))
            .then_with(|| self.preferred.cmp(&other.preferred))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

/// Decides whether a node whose relaxation bound is `bound` can still beat
/// the incumbent, exploiting integrality of the binary part of the
/// objective when the continuous part has a narrow range.
struct Pruner {
    /// Range of the continuous part of the (minimization) objective, when
    /// every binary coefficient is an integer and the range is below one.
    granular: Option<(f64, f64)>,
    tol: f64,
}

impl Pruner {
    fn new(model: &MilpModel, lower: &[f64], upper: &[f64], sign: f64, tol: f64) -> Self {
        let mut integral = true;
        let (mut wmin, mut wmax) = (0.0, 0.0);
        for &(v, c) in &model.objective.terms {
            let c = sign * c;
            match model.variables[v.0].kind {
                VarKind::Binary => {
                    if (c - c.round()).abs() > 1e-12 {
                        integral = false;
                    }
                }
                VarKind::Continuous => {
                    let (l, u) = (lower[v.0], upper[v.0]);
                    let (a, b) = (c * l, c * u);
                    wmin += a.min(b);
                    wmax += a.max(b);
                }
            }
        }
        let granular = (integral && wmin.is_finite() && wmax.is_finite() && wmax - wmin < 1.0)
            .then_some((wmin, wmax));
        Pruner { granular, tol }
    }

    fn can_improve(&self, bound: f64, incumbent: f64) -> bool {
        let slack = self.tol * incumbent.abs().max(1.0);
        let best_possible = match self.granular {
            Some((wmin, wmax)) => ((bound - wmax - slack).ceil() + wmin).max(bound),
            None => bound,
        };
        best_possible < incumbent - slack
    }
}

pub(crate) fn branch_and_bound(model: &MilpModel, opts: &SolverOptions) -> MilpSolution {
    let nvar = model.num_vars();
    let base_lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = model.binaries().collect();
    let sign = match model.objective.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let pruner = Pruner::new(model, &base_lower, &base_upper, sign, 1e-9);
    let sf = StandardForm::new(model);

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        depth: 0,
        bound: f64::NEG_INFINITY,
        preferred: true,
        seq,
        fixings: Vec::new(),
        parent: None,
    });
    let mut nodes = 0;
    let mut pivots = 0;
    let mut hit_node_limit = false;

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if !pruner.can_improve(node.bound, *inc) {
                continue;
            }
        }
        if nodes >= opts.max_nodes {
            hit_node_limit = true;
            break;
        }
        nodes += 1;

        let mut tab = match &node.parent {
            Some(p) => Tableau::clone(p),
            None => Tableau::new(&sf, &base_lower, &base_upper),
        };
        drop(node.parent);
        if let Some(&(j, v)) = node.fixings.last() {
            tab.set_bounds(&sf, j, v, v);
        }
        let start = tab.pivots;
        let status = tab.optimize(&sf, opts);
        let lp = tab.outcome(model, &sf, status, start);
        pivots += lp.pivots;
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    return MilpSolution::without_values(
                        SolveStatus::Unbounded,
                        nvar,
                        nodes,
                        pivots,
                    );
                }
                continue;
            }
            LpStatus::IterationLimit => {
                return MilpSolution::without_values(
                    SolveStatus::IterationLimit,
                    nvar,
                    nodes,
                    pivots,
                );
            }
        }
        let obj = sign * lp.objective;
        if let Some((inc, _)) = &incumbent {
            if !pruner.can_improve(obj, *inc) {
                continue;
            }
        }

        // Most fractional binary.
        let mut branch: Option<(usize, f64)> = None;
        let mut max_frac: f64 = 0.0;
        for &j in &binaries {
            let v = lp.values[j];
            let frac = (v - v.round()).abs();
            max_frac = max_frac.max(frac);
            if frac > opts.integrality_tol && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }

        let branch = match branch {
            Some(b) => Some(b),
            None => {
                // Accept only if the binaries can be fixed exactly; a big-M row
                // may lean on a binary that is integral only up to tolerance.
                let mut exact = tab.clone();
                for &b in &binaries {
                    let r = lp.values[b].round().clamp(0.0, 1.0);
                    exact.set_bounds(&sf, b, r, r);
                }
                let start = exact.pivots;
                let status = exact.optimize(&sf, opts);
                let clean = exact.outcome(model, &sf, status, start);
                pivots += clean.pivots;
                if clean.status == LpStatus::Optimal {
                    let v = sign * clean.objective;
                    if incumbent.as_ref().is_none_or(|(inc, _)| v < *inc) {
                        incumbent = Some((v, clean.values));
                    }
                    continue;
                }
                binaries
                    .iter()
                    .map(|&b| (b, (lp.values[b] - lp.values[b].round()).abs()))
                    .filter(|&(_, f)| f > 0.0)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
            }
        };
        let Some((j, _)) = branch else {
            continue;
        };

        if incumbent.is_none() && max_frac <= opts.rounding_threshold {
            let mut trial = tab.clone();
            for &b in &binaries {
                let r = lp.values[b].round().clamp(0.0, 1.0);
                trial.set_bounds(&sf, b, r, r);
            }
            let start = trial.pivots;
            let status = trial.optimize(&sf, opts);
            let rounded = trial.outcome(model, &sf, status, start);
            pivots += rounded.pivots;
            if rounded.status == LpStatus::Optimal {
                incumbent = Some((sign * rounded.objective, rounded.values));
            }
        }

        let v = lp.values[j];
        let up_first = v >= 0.5;
        let tab = Rc::new(tab);
        for (value, preferred) in [(0.0, !up_first), (1.0, up_first)] {
            let mut fixings = node.fixings.clone();
            fixings.push((j, value));
            seq += 1;
            heap.push(Node {
                depth: node.depth + 1,
                bound: obj,
                preferred,
                seq,
                fixings,
                parent: Some(Rc::clone(&tab)),
            });
        }
    }

    let Some((_, values)) = incumbent else {
        let status = if hit_node_limit {
            SolveStatus::NodeLimit
        } else {
            SolveStatus::Infeasible
        };
        return MilpSolution::without_values(status, nvar, nodes, pivots);
    };

    // Final clean solve with the binaries fixed at their integral values.
    let mut lower = base_lower;
    let mut upper = base_upper;
    for &b in &binaries {
        let r = values[b].round().clamp(0.0, 1.0);
        lower[b] = r;
        upper[b] = r;
    }
    let fin = solve_relaxation(model, &lower, &upper, opts);
    pivots += fin.pivots;
    let values = if fin.status == LpStatus::Optimal {
        fin.values
    } else {
        values
    };
    let objective_value = model.objective.value(&values);
    MilpSolution {
        status: if hit_node_limit {
            SolveStatus::NodeLimit
        } else {
            SolveStatus::Optimal
        },
        values,
        objective_value,
        nodes,
        pivots,
    }
}
