//! Bounded primal and dual simplex on a dense tableau.
//!
//! Every row `a·x (rel) b` gets an activity column `r = a·x` that carries
//! the row bounds, so the all-activity basis always exists and every change
//! made by branch-and-bound is a change of column bounds. A tableau that was
//! optimal under one set of bounds is re-optimized with the dual simplex
//! after a bound change. Primal phase one minimizes the total bound
//! violation of the basic variables and therefore starts from any basis.
//!
//! Indicator rows pairing `ε` with `u` make optimal bases badly conditioned
//! (tableau entries of order `(u/ε)²`), so the tableau, the basic values and
//! the reduced costs are kept in double-double arithmetic. Pricing and ratio
//! tests look only at the leading word.

use twofloat::TwoFloat;

use super::model::{MilpModel, Relation, Sense};
use super::SolverOptions;

type Dd = TwoFloat;

const ZERO: Dd = TwoFloat::from_f64(0.0);
const ONE: Dd = TwoFloat::from_f64(1.0);

const PIVOT_TOL: f64 = 1e-11;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
/// Harris relaxation of the ratio tests.
const HARRIS_PRIMAL: f64 = 1e-11;
const HARRIS_DUAL: f64 = 1e-11;
const SINGULAR_TOL: f64 = 1e-24;
const DRIFT_TOL: f64 = 1e-10;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    /// Values of the model variables (meaningful when optimal).
    pub values: Vec<f64>,
    /// Objective in the model's own sense.
    pub objective: f64,
    pub pivots: usize,
}

/// The scaled model as `A x - r = 0` with bounds on `x` and on the
/// activities `r`.
pub(crate) struct StandardForm {
    n: usize,
    rows: usize,
    row_terms: Vec<Vec<(usize, f64)>>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    /// Minimization costs over structural and activity columns.
    cost: Vec<f64>,
    /// Structural column `j` is stored as `x_j / col_scale[j]`.
    col_scale: Vec<f64>,
}

fn geometric_scaling(row_terms: &[Vec<(usize, f64)>], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rs = vec![1.0; row_terms.len()];
    let mut cs = vec![1.0; n];
    let pow2 = |v: f64| 2f64.powi(v.log2().round() as i32);
    for _ in 0..8 {
        for (k, terms) in row_terms.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
            for &(j, a) in terms {
                let v = (a * cs[j]).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > 0.0 {
                rs[k] = pow2(1.0 / (lo * hi).sqrt());
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0_f64; n];
        for (k, terms) in row_terms.iter().enumerate() {
            for &(j, a) in terms {
                let v = (a * rs[k]).abs();
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                cs[j] = pow2(1.0 / (lo[j] * hi[j]).sqrt());
            }
        }
    }
    (rs, cs)
}

impl StandardForm {
    pub(crate) fn new(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let rows = model.constraints.len();
        let mut row_terms = Vec::with_capacity(rows);
        let mut row_lo = Vec::with_capacity(rows);
        let mut row_hi = Vec::with_capacity(rows);
        for c in &model.constraints {
            let mut dense: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
            for &(v, a) in &c.terms {
                match dense.iter_mut().find(|(j, _)| *j == v.0) {
                    Some(e) => e.1 += a,
                    None => dense.push((v.0, a)),
                }
            }
            dense.retain(|&(_, a)| a != 0.0);
            row_terms.push(dense);
            let (lo, hi) = match c.relation {
                Relation::Le => (f64::NEG_INFINITY, c.rhs),
                Relation::Ge => (c.rhs, f64::INFINITY),
                Relation::Eq => (c.rhs, c.rhs),
            };
            row_lo.push(lo);
            row_hi.push(hi);
        }
        let (row_scale, col_scale) = geometric_scaling(&row_terms, n);
        for (k, terms) in row_terms.iter_mut().enumerate() {
            for (j, a) in terms.iter_mut() {
                *a *= row_scale[k] * col_scale[*j];
            }
            row_lo[k] *= row_scale[k];
            row_hi[k] *= row_scale[k];
        }
        let sign = match model.objective.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n + rows];
        for &(v, c) in &model.objective.terms {
            cost[v.0] += sign * c * col_scale[v.0];
        }
        StandardForm {
            n,
            rows,
            row_terms,
            row_lo,
            row_hi,
            cost,
            col_scale,
        }
    }

    fn cols(&self) -> usize {
        self.n + self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free column resting at zero.
    Zero,
}

fn home(lo: f64, hi: f64) -> (State, f64) {
    if lo.is_finite() {
        (State::Lower, lo)
    } else if hi.is_finite() {
        (State::Upper, hi)
    } else {
        (State::Zero, 0.0)
    }
}

/// Double-double quotient by long division. The library's own operator
/// forms its correction term in plain f64 and loses the low word.
fn ddiv(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

#[derive(Clone)]
pub(crate) struct Tableau {
    rows: usize,
    cols: usize,
    /// `B⁻¹ [A | -I]`, row-major.
    t: Vec<Dd>,
    basis: Vec<usize>,
    state: Vec<State>,
    x: Vec<Dd>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Reduced costs of the real objective.
    d: Vec<Dd>,
    pub(crate) pivots: usize,
}

impl Tableau {
    /// All-activity basis with the structural columns at a finite bound.
    pub(crate) fn new(sf: &StandardForm, lower: &[f64], upper: &[f64]) -> Self {
        let (rows, cols, n) = (sf.rows, sf.cols(), sf.n);
        let mut t = vec![ZERO; rows * cols];
        for (k, terms) in sf.row_terms.iter().enumerate() {
            for &(j, a) in terms {
                t[k * cols + j] = Dd::from(-a);
            }
            t[k * cols + n + k] = ONE;
        }
        let mut lo: Vec<f64> = lower
            .iter()
            .zip(&sf.col_scale)
            .map(|(l, s)| l / s)
            .collect();
        let mut hi: Vec<f64> = upper
            .iter()
            .zip(lower)
            .zip(&sf.col_scale)
            .map(|((u, l), s)| u.max(*l) / s)
            .collect();
        lo.extend_from_slice(&sf.row_lo);
        hi.extend_from_slice(&sf.row_hi);
        let mut state = vec![State::Lower; cols];
        let mut x = vec![ZERO; cols];
        for j in 0..n {
            let (s, v) = home(lo[j], hi[j]);
            state[j] = s;
            x[j] = Dd::from(v);
        }
        let basis: Vec<usize> = (n..cols).collect();
        for (k, terms) in sf.row_terms.iter().enumerate() {
            state[n + k] = State::Basic(k);
            x[n + k] = terms.iter().fold(ZERO, |acc, &(j, a)| acc + x[j] * a);
        }
        let mut tab = Tableau {
            rows,
            cols,
            t,
            basis,
            state,
            x,
            lo,
            hi,
            d: Vec::new(),
            pivots: 0,
        };
        tab.refresh_costs(sf);
        tab
    }

    /// Falls back to the all-activity basis under the current bounds.
    fn restart(&mut self, sf: &StandardForm) {
        let pivots = self.pivots;
        let lower: Vec<f64> = (0..sf.n).map(|j| self.lo[j] * sf.col_scale[j]).collect();
        let upper: Vec<f64> = (0..sf.n).map(|j| self.hi[j] * sf.col_scale[j]).collect();
        *self = Tableau::new(sf, &lower, &upper);
        self.pivots = pivots;
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j].hi()
    }

    fn refresh_costs(&mut self, sf: &StandardForm) {
        let mut d: Vec<Dd> = sf.cost.iter().map(|&c| Dd::from(c)).collect();
        for i in 0..self.rows {
            let cb = sf.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, tij) in d.iter_mut().zip(row) {
                    if tij.hi() != 0.0 {
                        *dj -= *tij * cb;
                    }
                }
            }
        }
        for &b in &self.basis {
            d[b] = ZERO;
        }
        self.d = d;
    }

    /// Moves a nonbasic column by `delta`, carrying the basic columns along.
    fn shift(&mut self, q: usize, delta: Dd) {
        if delta.hi() == 0.0 {
            return;
        }
        for i in 0..self.rows {
            let tiq = self.t[i * self.cols + q];
            if tiq.hi() != 0.0 {
                let b = self.basis[i];
                self.x[b] -= tiq * delta;
            }
        }
        self.x[q] += delta;
    }

    /// Replaces the bounds of structural column `j`.
    pub(crate) fn set_bounds(&mut self, sf: &StandardForm, j: usize, lo: f64, hi: f64) {
        let scale = sf.col_scale[j];
        let (lo, hi) = (lo / scale, hi.max(lo) / scale);
        self.lo[j] = lo;
        self.hi[j] = hi;
        if matches!(self.state[j], State::Basic(_)) {
            return;
        }
        let (s, v) = if self.state[j] == State::Upper && hi.is_finite() {
            (State::Upper, hi)
        } else {
            home(lo, hi)
        };
        self.state[j] = s;
        let delta = Dd::from(v) - self.x[j];
        self.shift(j, delta);
        self.x[j] = Dd::from(v);
    }

    /// Row operations making column `q` the unit vector of row `r`.
    fn eliminate(t: &mut [Dd], d: Option<&mut [Dd]>, cols: usize, r: usize, q: usize) {
        let piv = t[r * cols + q];
        let mut nz = Vec::new();
        for j in 0..cols {
            let v = &mut t[r * cols + j];
            if v.hi() != 0.0 {
                *v = ddiv(*v, piv);
                nz.push(j);
            }
        }
        t[r * cols + q] = ONE;
        let (before, rest) = t.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for row in before
            .chunks_exact_mut(cols)
            .chain(after.chunks_exact_mut(cols))
        {
            let f = row[q];
            if f.hi() != 0.0 {
                for &j in &nz {
                    row[j] -= f * pivot_row[j];
                }
                row[q] = ZERO;
            }
        }
        if let Some(d) = d {
            let f = d[q];
            if f.hi() != 0.0 {
                for &j in &nz {
                    d[j] -= f * pivot_row[j];
                }
            }
            d[q] = ZERO;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        Tableau::eliminate(&mut self.t, Some(&mut self.d), self.cols, r, q);
        self.basis[r] = q;
        self.state[q] = State::Basic(r);
        self.pivots += 1;
    }

    /// Rebuilds the tableau, the basic values and the reduced costs from the
    /// original rows by Gauss-Jordan elimination on the basic columns, or
    /// restarts from the all-activity basis when the basis is singular.
    fn refactor(&mut self, sf: &StandardForm) {
        if !self.try_refactor(sf) {
            self.restart(sf);
        }
    }

    fn try_refactor(&mut self, sf: &StandardForm) -> bool {
        let (m, cols, n) = (self.rows, self.cols, sf.n);
        let mut t = vec![ZERO; m * cols];
        for (k, terms) in sf.row_terms.iter().enumerate() {
            for &(j, a) in terms {
                t[k * cols + j] = Dd::from(a);
            }
            t[k * cols + n + k] = Dd::from(-1.0);
        }
        let mut used = vec![false; m];
        let mut basis = vec![0; m];
        for &col in &self.basis {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                let v = t[r * cols + col].hi().abs();
                if !used[r] && v > best.map_or(0.0, |b| b.1) {
                    best = Some((r, v));
                }
            }
            let Some((r, v)) = best else {
                return false;
            };
            if v < SINGULAR_TOL {
                return false;
            }
            Tableau::eliminate(&mut t, None, cols, r, col);
            used[r] = true;
            basis[r] = col;
        }
        self.t = t;
        self.basis = basis;
        for (r, &col) in self.basis.iter().enumerate() {
            self.state[col] = State::Basic(r);
        }
        for r in 0..m {
            let row = &self.t[r * cols..(r + 1) * cols];
            let mut v = ZERO;
            for (j, &tj) in row.iter().enumerate() {
                if tj.hi() != 0.0 && !matches!(self.state[j], State::Basic(_)) {
                    v -= tj * self.x[j];
                }
            }
            self.x[self.basis[r]] = v;
        }
        self.refresh_costs(sf);
        true
    }

    /// Largest row residual of `A x - r` relative to the row scale.
    fn drift(&self, sf: &StandardForm) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, terms) in sf.row_terms.iter().enumerate() {
            let r = self.x[sf.n + k];
            let mut s = -r;
            let mut scale = r.hi().abs();
            for &(j, a) in terms {
                let p = self.x[j] * a;
                s += p;
                scale = scale.max(p.hi().abs());
            }
            worst = worst.max(s.hi().abs() / scale.max(1.0));
        }
        worst
    }

    fn violation(&self, j: usize) -> f64 {
        let v = self.x[j].hi();
        if v < self.lo[j] {
            v - self.lo[j]
        } else if v > self.hi[j] {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis
            .iter()
            .any(|&b| self.violation(b).abs() > PRIMAL_TOL)
    }

    fn dual_feasible(&self) -> bool {
        (0..self.cols).all(|j| {
            if self.lo[j] == self.hi[j] {
                return true;
            }
            let dj = self.d[j].hi();
            match self.state[j] {
                State::Basic(_) => true,
                State::Lower => dj >= -DUAL_TOL,
                State::Upper => dj <= DUAL_TOL,
                State::Zero => dj.abs() <= DUAL_TOL,
            }
        })
    }

    #[allow(clippy::needless_range_loop)]
    fn choose_entering(&self, d: &[f64], bland: bool, banned: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            if self.lo[j] == self.hi[j] || banned.contains(&j) {
                continue;
            }
            let (score, dir) = match self.state[j] {
                State::Basic(_) => continue,
                State::Lower if d[j] < -DUAL_TOL => (-d[j], 1.0),
                State::Upper if d[j] > DUAL_TOL => (d[j], -1.0),
                State::Zero if d[j].abs() > DUAL_TOL => (d[j].abs(), -d[j].signum()),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((j, score, dir));
            }
        }
        best.map(|(j, _, dir)| (j, dir))
    }

    /// Pivots `q` into row `r`, moving it by the amount that brings the
    /// leaving column onto `target`.
    fn exchange(&mut self, r: usize, q: usize, target: f64, at_upper: bool, dir: f64) {
        let leaving = self.basis[r];
        let mut delta = ddiv(self.x[leaving] - target, self.t[r * self.cols + q]);
        if delta.hi() * dir < 0.0 {
            delta = ZERO;
        }
        self.shift(q, delta);
        self.state[leaving] = if at_upper && self.lo[leaving] != self.hi[leaving] {
            State::Upper
        } else {
            State::Lower
        };
        self.pivot(r, q);
    }

    /// One primal iteration. In phase one (`phase1`), basic columns outside
    /// their bounds may move further away and stop when they reach the
    /// violated bound.
    fn primal_step(
        &mut self,
        d: &[f64],
        phase1: bool,
        bland: bool,
        banned: &mut Vec<usize>,
        degenerate: &mut usize,
    ) -> Step {
        let Some((q, dir)) = self.choose_entering(d, bland, banned) else {
            return Step::Optimal;
        };
        // Candidates: (row, exact step, relaxed step, leaves at upper, |rate|)
        let mut cands: Vec<(usize, f64, f64, bool, f64)> = Vec::new();
        for i in 0..self.rows {
            let tiq = self.at(i, q);
            if tiq.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let rate = -dir * tiq;
            let (xi, lo, hi) = (self.x[b].hi(), self.lo[b], self.hi[b]);
            let mag = rate.abs();
            if rate < 0.0 {
                if phase1 && xi > hi + PRIMAL_TOL {
                    let s = (xi - hi) / mag;
                    cands.push((i, s, s, true, mag));
                } else if phase1 && xi < lo - PRIMAL_TOL {
                    continue;
                } else if lo.is_finite() {
                    let s = (xi - lo).max(0.0) / mag;
                    let relaxed = (xi - lo + HARRIS_PRIMAL).max(0.0) / mag;
                    cands.push((i, s, relaxed, false, mag));
                }
            } else if phase1 && xi < lo - PRIMAL_TOL {
                let s = (lo - xi) / mag;
                cands.push((i, s, s, false, mag));
            } else if phase1 && xi > hi + PRIMAL_TOL {
                continue;
            } else if hi.is_finite() {
                let s = (hi - xi).max(0.0) / mag;
                let relaxed = (hi - xi + HARRIS_PRIMAL).max(0.0) / mag;
                cands.push((i, s, relaxed, true, mag));
            }
        }
        let chosen = if bland {
            cands
                .iter()
                .fold(None, |acc: Option<(usize, f64, bool)>, c| match acc {
                    Some((r, s, _)) if c.1 > s || (c.1 == s && self.basis[c.0] > self.basis[r]) => {
                        acc
                    }
                    _ => Some((c.0, c.1, c.3)),
                })
        } else {
            let bound = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= bound)
                .fold(None, |acc: Option<(usize, f64, bool, f64)>, c| match acc {
                    Some((_, _, _, m)) if m >= c.4 => acc,
                    _ => Some((c.0, c.1, c.3, c.4)),
                })
                .map(|(r, s, up, _)| (r, s, up))
        };
        let range = self.hi[q] - self.lo[q];
        let flip = match chosen {
            None => range.is_finite(),
            Some((_, s, _)) => range.is_finite() && range <= s,
        };
        if flip {
            let target = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
            let delta = Dd::from(target) - self.x[q];
            self.shift(q, delta);
            self.x[q] = Dd::from(target);
            self.state[q] = if dir > 0.0 {
                State::Upper
            } else {
                State::Lower
            };
            self.pivots += 1;
            *degenerate = 0;
            banned.clear();
            return Step::Moved;
        }
        let Some((r, step, at_upper)) = chosen else {
            if phase1 {
                // Only round-off keeps this direction from being blocked.
                banned.push(q);
                return Step::Moved;
            }
            return Step::Unbounded;
        };
        if step <= DEGENERATE_STEP {
            *degenerate += 1;
        } else {
            *degenerate = 0;
        }
        banned.clear();
        let b = self.basis[r];
        let target = if at_upper { self.hi[b] } else { self.lo[b] };
        self.exchange(r, q, target, at_upper, dir);
        Step::Moved
    }

    fn phase1_costs(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.cols];
        for i in 0..self.rows {
            let v = self.violation(self.basis[i]);
            let c = if v > PRIMAL_TOL {
                1.0
            } else if v < -PRIMAL_TOL {
                -1.0
            } else {
                continue;
            };
            let row = &self.t[i * self.cols..(i + 1) * self.cols];
            for (dj, tij) in d.iter_mut().zip(row) {
                *dj -= c * tij.hi();
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        d
    }

    fn primal(&mut self, opts: &SolverOptions, start: usize) -> LpStatus {
        let mut degenerate = 0;
        let mut banned = Vec::new();
        loop {
            if self.pivots - start >= opts.max_pivots {
                return LpStatus::IterationLimit;
            }
            let bland = degenerate >= opts.bland_after;
            let phase1 = self.primal_infeasible();
            let d = if phase1 {
                self.phase1_costs()
            } else {
                self.d.iter().map(|v| v.hi()).collect()
            };
            match self.primal_step(&d, phase1, bland, &mut banned, &mut degenerate) {
                Step::Optimal if phase1 => return LpStatus::Infeasible,
                Step::Optimal => return LpStatus::Optimal,
                Step::Unbounded => return LpStatus::Unbounded,
                Step::Moved => {}
            }
        }
    }

    /// Dual simplex from a dual feasible basis. Returns `Optimal` once the
    /// basis is primal feasible, `None` after `bland_after` consecutive
    /// degenerate steps.
    fn dual(&mut self, opts: &SolverOptions, start: usize) -> Option<LpStatus> {
        let mut degenerate = 0;
        loop {
            if self.pivots - start >= opts.max_pivots {
                return Some(LpStatus::IterationLimit);
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let v = self.violation(self.basis[i]);
                if v.abs() > PRIMAL_TOL && leave.is_none_or(|(_, w)| v.abs() > w.abs()) {
                    leave = Some((i, v));
                }
            }
            let Some((r, viol)) = leave else {
                return Some(LpStatus::Optimal);
            };
            // viol < 0: the basic column must increase, i.e. -t_rj Δ_j > 0.
            let up = viol < 0.0;
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for j in 0..self.cols {
                if self.lo[j] == self.hi[j] {
                    continue;
                }
                let trj = self.at(r, j);
                if trj.abs() <= PIVOT_TOL {
                    continue;
                }
                let increase = if up { trj < 0.0 } else { trj > 0.0 };
                let dj = self.d[j].hi();
                let slack = match self.state[j] {
                    State::Basic(_) => continue,
                    State::Lower if increase => dj.max(0.0),
                    State::Upper if !increase => (-dj).max(0.0),
                    State::Zero => dj.abs(),
                    _ => continue,
                };
                let mag = trj.abs();
                cands.push((j, slack / mag, (slack + HARRIS_DUAL) / mag, mag));
            }
            let bound = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            let Some(&(q, step, _, _)) = cands
                .iter()
                .filter(|c| c.1 <= bound)
                .max_by(|a, b| a.3.total_cmp(&b.3))
            else {
                return Some(LpStatus::Infeasible);
            };
            if step <= DEGENERATE_STEP {
                degenerate += 1;
                if degenerate >= opts.bland_after {
                    return None;
                }
            } else {
                degenerate = 0;
            }
            let b = self.basis[r];
            let target = if up { self.lo[b] } else { self.hi[b] };
            let dir = if (self.at(r, q) < 0.0) == up {
                1.0
            } else {
                -1.0
            };
            self.exchange(r, q, target, !up, dir);
        }
    }

    /// Re-optimizes after bound changes. A basis that looks infeasible or
    /// whose row residuals have drifted is refactored once and solved again.
    pub(crate) fn optimize(&mut self, sf: &StandardForm, opts: &SolverOptions) -> LpStatus {
        let start = self.pivots;
        let mut refactored = false;
        let mut stalled = false;
        loop {
            if !stalled && self.primal_infeasible() && self.dual_feasible() {
                match self.dual(opts, start) {
                    Some(LpStatus::Optimal) => {}
                    Some(LpStatus::Infeasible) if !refactored => {
                        refactored = true;
                        self.refactor(sf);
                        continue;
                    }
                    Some(other) => return other,
                    None => stalled = true,
                }
            }
            let status = self.primal(opts, start);
            match status {
                LpStatus::Optimal | LpStatus::Infeasible => {
                    let suspect = status == LpStatus::Infeasible || self.drift(sf) > DRIFT_TOL;
                    if suspect && !refactored {
                        refactored = true;
                        self.refactor(sf);
                        continue;
                    }
                    return status;
                }
                other => return other,
            }
        }
    }

    /// Structural values, snapped onto bounds they sit on up to round-off.
    fn values(&self, sf: &StandardForm) -> Vec<f64> {
        (0..sf.n)
            .map(|j| {
                let s = sf.col_scale[j];
                let v = (self.x[j].hi() + self.x[j].lo()) * s;
                let (lo, hi) = (self.lo[j] * s, self.hi[j] * s);
                let tol = 1e-12 * v.abs().max(1.0);
                if (v - lo).abs() <= tol {
                    lo
                } else if (v - hi).abs() <= tol {
                    hi
                } else if v.abs() < 1e-14 {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    }

    pub(crate) fn outcome(
        &self,
        model: &MilpModel,
        sf: &StandardForm,
        status: LpStatus,
        start: usize,
    ) -> LpOutcome {
        let pivots = self.pivots - start;
        if status != LpStatus::Optimal {
            return LpOutcome {
                status,
                values: vec![0.0; sf.n],
                objective: f64::NAN,
                pivots,
            };
        }
        let values = self.values(sf);
        let objective = model.objective.value(&values);
        LpOutcome {
            status,
            values,
            objective,
            pivots,
        }
    }
}

/// Solves the LP relaxation of `model` from scratch under the given bounds
/// (which override the model's variable bounds).
pub(crate) fn solve_relaxation(
    model: &MilpModel,
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
) -> LpOutcome {
    let sf = StandardForm::new(model);
    if (0..sf.n).any(|j| lower[j] > upper[j] + opts.feasibility_tol) {
        return LpOutcome {
            status: LpStatus::Infeasible,
            values: vec![0.0; sf.n],
            objective: f64::NAN,
            pivots: 0,
        };
    }
    let mut tab = Tableau::new(&sf, lower, upper);
    let status = tab.optimize(&sf, opts);
    tab.outcome(model, &sf, status, 0)
}
