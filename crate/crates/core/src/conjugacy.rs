//! Linearly conjugate and dynamically equivalent realizations as MILPs.
//!
//! In conjugacy mode the decision variables are the off-diagonal entries of
//! `A_b` and the reciprocals `e_i = 1/c_i` of the conjugacy constants, so
//! that `Y · A_b = diag(e) · M` is linear. The diagonal of every decision
//! Kirchhoff matrix is substituted as the negated column sum, which makes
//! the zero column sums hold by construction.
//!
//! In structural dynamical-equivalence mode both the source matrix `A_k`
//! (restricted to the source network's edge set) and the realization `A_k'`
//! are decision variables tied by `Y · A_k' = Y · A_k`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::equilibrium::{
    find_equilibrium, refine_equilibrium, EquilibriumError, EquilibriumPoint, MassActionSystem,
};
use crate::kinetics::{KineticsError, PolynomialKinetics};
use crate::milp::{
    solve_milp, MilpModel, MilpSolution, ModelError, Relation, Sense, SolveStatus, SolverOptions,
    VarId,
};
use crate::network::{
    Complex, KirchhoffMatrix, NetworkError, ReactionNetwork, StoichiometricMatrix,
};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_UPPER_BOUND: f64 = 100.0;
/// Largest accepted `‖Y·A_b − diag(c)⁻¹·M‖_∞` of a returned realization.
pub const CONJUGACY_TOL: f64 = 1e-7;
/// Default residual accepted for a supplied equilibrium.
pub const SUPPLIED_EQUILIBRIUM_TOL: f64 = 1e-7;
/// Total weight of the secondary rate-sum term, below one unit of the
/// primary (integer) objective.
const TIE_BREAK_WEIGHT: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjugacyError {
    #[error("kinetics matrix is {rows}x{cols} but there are {species} species and {complexes} complexes")]
    Dimension {
        rows: usize,
        cols: usize,
        species: usize,
        complexes: usize,
    },
    #[error("epsilon {epsilon} must be positive and below the upper bound {upper}")]
    Bounds { epsilon: f64, upper: f64 },
    #[error("conjugacy vector has {found} entries for {expected} species, or a nonpositive entry")]
    FixedConjugacy { found: usize, expected: usize },
    #[error("complex and detailed balance constraints need fixed rate constants; not available in structural mode")]
    BalanceInStructuralMode,
    #[error("structural mode needs a source reaction network, not bare kinetics")]
    StructuralNeedsNetwork,
    #[error("pinned entries are only supported in structural mode")]
    PinsNeedStructuralMode,
    #[error("pin refers to A[{},{}], which is not a reaction of the source network", .0 + 1, .1 + 1)]
    PinOutsideStructure(usize, usize),
    #[error("pin refers to A[{},{}], outside the {m}x{m} complex set", .i + 1, .j + 1)]
    PinOutOfRange { i: usize, j: usize, m: usize },
    #[error("equilibrium prerequisite failed: {0}")]
    Equilibrium(#[from] EquilibriumError),
    #[error("solver stopped early ({status:?}) after {nodes} nodes")]
    SolverLimit { status: SolveStatus, nodes: usize },
    #[error("solver returned an unbounded relaxation")]
    Unbounded,
    #[error("returned realization failed re-validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Conjugacy,
    StructuralEquivalence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Sparse,
    Dense,
    MinComplexes,
    MaxComplexes,
}

impl ObjectiveKind {
    fn counts_reactions(self) -> bool {
        matches!(self, ObjectiveKind::Sparse | ObjectiveKind::Dense)
    }

    fn sense_sign(self) -> f64 {
        match self {
            ObjectiveKind::Sparse | ObjectiveKind::MinComplexes => 1.0,
            ObjectiveKind::Dense | ObjectiveKind::MaxComplexes => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Requirements {
    pub weakly_reversible: bool,
    pub reversible: bool,
    pub complex_balanced: bool,
    pub detailed_balanced: bool,
}

impl Requirements {
    fn needs_equilibrium(&self) -> bool {
        self.complex_balanced || self.detailed_balanced
    }
}

/// Right-hand side of a pin on the source matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PinTarget {
    Value(f64),
    /// Another entry `(target, source)`, zero-based.
    Entry(usize, usize),
}

/// Side constraint `[A_k]_{ij} = target` on the source network's rates, with
/// `i` the product complex and `j` the reactant complex (zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub entry: (usize, usize),
    pub target: PinTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Network(ReactionNetwork),
    /// Kinetics matrix `M` (species × complexes) over an explicit complex set.
    Kinetics {
        species: Vec<String>,
        complexes: Vec<Complex>,
        m: DMatrix<f64>,
    },
}

impl Source {
    fn species(&self) -> &[String] {
        match self {
            Source::Network(net) => net.species(),
            Source::Kinetics { species, .. } => species,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyProblem {
    pub source: Source,
    pub mode: Mode,
    pub requirements: Requirements,
    pub objective: ObjectiveKind,
    pub epsilon: f64,
    /// Uniform upper bound `u_ij` on rate entries.
    pub upper_bound: f64,
    /// Equilibrium for the balance constraints; found by Newton when absent.
    pub equilibrium: Option<Vec<f64>>,
    /// Residual accepted for a supplied equilibrium.
    pub equilibrium_tolerance: f64,
    pub extra_complexes: Vec<Complex>,
    pub pins: Vec<Pin>,
    /// Conjugacy constants to hold fixed instead of searching for them.
    pub fixed_conjugacy: Option<Vec<f64>>,
    /// Adds a small rate-sum term that selects among optima with equal
    /// primary objective.
    pub tie_break: bool,
    pub solver: SolverOptions,
}

impl ConjugacyProblem {
    pub fn new(source: Source) -> Self {
        ConjugacyProblem {
            source,
            mode: Mode::Conjugacy,
            requirements: Requirements::default(),
            objective: ObjectiveKind::Sparse,
            epsilon: DEFAULT_EPSILON,
            upper_bound: DEFAULT_UPPER_BOUND,
            equilibrium: None,
            equilibrium_tolerance: SUPPLIED_EQUILIBRIUM_TOL,
            extra_complexes: Vec::new(),
            pins: Vec::new(),
            fixed_conjugacy: None,
            tie_break: false,
            solver: SolverOptions::default(),
        }
    }

    pub fn from_network(net: ReactionNetwork) -> Self {
        Self::new(Source::Network(net))
    }

    /// Kinetics over an explicit complex list; every monomial must be listed.
    pub fn from_kinetics(
        kinetics: &PolynomialKinetics,
        complexes: Vec<Complex>,
    ) -> Result<Self, ConjugacyError> {
        let m = kinetics.kinetics_matrix(&complexes)?;
        Ok(Self::new(Source::Kinetics {
            species: kinetics.species().to_vec(),
            complexes,
            m,
        }))
    }

    /// Structural dynamical equivalence over the edge set of `net`, with the
    /// rate-sum tie-break on.
    pub fn structural(net: ReactionNetwork) -> Self {
        ConjugacyProblem {
            mode: Mode::StructuralEquivalence,
            tie_break: true,
            ..Self::from_network(net)
        }
    }

    pub fn with_objective(mut self, objective: ObjectiveKind) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_requirements(mut self, requirements: Requirements) -> Self {
        self.requirements = requirements;
        self
    }

    pub fn with_bounds(mut self, epsilon: f64, upper_bound: f64) -> Self {
        self.epsilon = epsilon;
        self.upper_bound = upper_bound;
        self
    }

    pub fn with_equilibrium(mut self, x: Vec<f64>) -> Self {
        self.equilibrium = Some(x);
        self
    }

    pub fn with_extra_complexes(mut self, extra: Vec<Complex>) -> Self {
        self.extra_complexes = extra;
        self
    }

    pub fn with_pins(mut self, pins: Vec<Pin>) -> Self {
        self.pins = pins;
        self
    }

    pub fn with_fixed_conjugacy(mut self, c: Vec<f64>) -> Self {
        self.fixed_conjugacy = Some(c);
        self
    }

    pub fn source_species(&self) -> &[String] {
        self.source.species()
    }

    pub fn with_tie_break(mut self, on: bool) -> Self {
        self.tie_break = on;
        self
    }
}

/// Problem data after merging extra complexes and resolving the equilibrium.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub species: Vec<String>,
    pub complexes: Vec<Complex>,
    pub y: StoichiometricMatrix,
    /// Kinetics matrix `M`; in structural mode the source network's `Y·A_k`.
    pub m: DMatrix<f64>,
    /// Source edge set `γ` (structural mode).
    pub gamma: Option<Vec<(usize, usize)>>,
    pub equilibrium: Option<EquilibriumPoint>,
}

impl Prepared {
    pub fn complex_count(&self) -> usize {
        self.complexes.len()
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    fn psi_star(&self) -> Option<DVector<f64>> {
        self.equilibrium.as_ref().map(|eq| {
            self.y
                .mass_action_vector(&eq.x)
                .expect("equilibrium is positive")
        })
    }
}

pub fn prepare(problem: &ConjugacyProblem) -> Result<Prepared, ConjugacyError> {
    if !(problem.epsilon > 0.0 && problem.epsilon < problem.upper_bound)
        || !problem.upper_bound.is_finite()
    {
        return Err(ConjugacyError::Bounds {
            epsilon: problem.epsilon,
            upper: problem.upper_bound,
        });
    }
    let structural = problem.mode == Mode::StructuralEquivalence;
    if structural && problem.requirements.needs_equilibrium() {
        return Err(ConjugacyError::BalanceInStructuralMode);
    }
    if !structural && !problem.pins.is_empty() {
        return Err(ConjugacyError::PinsNeedStructuralMode);
    }
    let species = problem.source.species().to_vec();
    let n = species.len();
    let (mut complexes, m_base, gamma_base) = match &problem.source {
        Source::Network(net) => {
            let edges: Vec<(usize, usize)> =
                net.reactions().map(|r| (r.target, r.source)).collect();
            (net.complexes().to_vec(), net.kinetics_matrix(), Some(edges))
        }
        Source::Kinetics { complexes, m, .. } => {
            if structural {
                return Err(ConjugacyError::StructuralNeedsNetwork);
            }
            if m.nrows() != n || m.ncols() != complexes.len() {
                return Err(ConjugacyError::Dimension {
                    rows: m.nrows(),
                    cols: m.ncols(),
                    species: n,
                    complexes: complexes.len(),
                });
            }
            (complexes.clone(), m.clone(), None)
        }
    };
    for c in &problem.extra_complexes {
        if c.len() != n {
            return Err(NetworkError::ComplexWidth {
                index: complexes.len(),
                found: c.len(),
                expected: n,
            }
            .into());
        }
        if !complexes.contains(c) {
            complexes.push(c.clone());
        }
    }
    let mm = complexes.len();
    let mut m = DMatrix::zeros(n, mm);
    m.columns_mut(0, m_base.ncols()).copy_from(&m_base);
    let y = StoichiometricMatrix::from_complexes(n, &complexes);

    if let Some(c) = &problem.fixed_conjugacy {
        if c.len() != n || c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ConjugacyError::FixedConjugacy {
                found: c.len(),
                expected: n,
            });
        }
    }

    let mut pins_ok = Vec::new();
    for pin in &problem.pins {
        let mut entries = vec![pin.entry];
        if let PinTarget::Entry(i, j) = pin.target {
            entries.push((i, j));
        }
        for (i, j) in entries {
            if i >= mm || j >= mm || i == j {
                return Err(ConjugacyError::PinOutOfRange { i, j, m: mm });
            }
            let present = gamma_base.as_ref().is_some_and(|g| g.contains(&(i, j)));
            if !present {
                return Err(ConjugacyError::PinOutsideStructure(i, j));
            }
        }
        pins_ok.push(*pin);
    }

    let equilibrium = if problem.requirements.needs_equilibrium() {
        let system = MassActionSystem::new(y.clone(), m.clone())?;
        Some(match &problem.equilibrium {
            Some(x) => refine_equilibrium(&system, x, problem.equilibrium_tolerance, 1e-6)?,
            None => find_equilibrium(&system, None)?,
        })
    } else {
        None
    };

    Ok(Prepared {
        species,
        complexes,
        y,
        m,
        gamma: if structural { gamma_base } else { None },
        equilibrium,
    })
}

/// Variable handles of an assembled model. Matrices are indexed
/// `i * m + j` for entry `(i, j)`; diagonal slots are always `None`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub m: usize,
    /// Off-diagonal entries of the decision matrix (`A_b`, or `A_k'` in
    /// structural mode).
    pub rates: Vec<Option<VarId>>,
    /// Reciprocal conjugacy constants `e_i = 1/c_i` (conjugacy mode).
    pub reciprocals: Vec<VarId>,
    /// Source matrix entries on the source edge set (structural mode).
    pub source_rates: Vec<Option<VarId>>,
    pub reaction_indicators: Vec<Option<VarId>>,
    pub circulation: Vec<Option<VarId>>,
    pub complex_indicators: Vec<VarId>,
}

impl Layout {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.m;
        (0..m).flat_map(move |i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    pub fn rate(&self, i: usize, j: usize) -> Option<VarId> {
        self.rates[self.idx(i, j)]
    }

    pub fn indicator(&self, i: usize, j: usize) -> Option<VarId> {
        self.reaction_indicators[self.idx(i, j)]
    }
}

/// Assembles constraint families into a [`MilpModel`].
pub struct ModelBuilder<'a> {
    problem: &'a ConjugacyProblem,
    prep: &'a Prepared,
    pub model: MilpModel,
    pub layout: Layout,
}

impl<'a> ModelBuilder<'a> {
    pub fn new(problem: &'a ConjugacyProblem, prep: &'a Prepared) -> Self {
        let m = prep.complex_count();
        let mut model = MilpModel::new();
        let u = problem.upper_bound;
        let mut rates = vec![None; m * m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    rates[i * m + j] =
                        Some(model.add_continuous(format!("a_{}_{}", i + 1, j + 1), 0.0, u));
                }
            }
        }
        ModelBuilder {
            problem,
            prep,
            model,
            layout: Layout {
                m,
                rates,
                reciprocals: Vec::new(),
                source_rates: vec![None; m * m],
                reaction_indicators: vec![None; m * m],
                circulation: vec![None; m * m],
                complex_indicators: Vec::new(),
            },
        }
    }

    /// Terms of `(Y · X)_{ik}` for a decision Kirchhoff matrix `X` whose
    /// off-diagonal entries are `vars` and whose diagonal is the negated
    /// column sum: `Σ_{l≠k} (Y_il − Y_ik) x_lk`.
    fn y_times(&self, vars: &[Option<VarId>], i: usize, k: usize, scale: f64) -> Vec<(VarId, f64)> {
        let y = &self.prep.y;
        let m = self.layout.m;
        (0..m)
            .filter(|&l| l != k)
            .filter_map(|l| {
                let coef = y.get(i, l) as f64 - y.get(i, k) as f64;
                match vars[l * m + k] {
                    Some(v) if coef != 0.0 => Some((v, scale * coef)),
                    _ => None,
                }
            })
            .collect()
    }

    /// Linear conjugacy: `Y · A_b = diag(e) · M` with `ε ≤ e_i ≤ 1/ε`, or `e` fixed when
    /// conjugacy constants are given.
    pub fn linear_conjugacy(&mut self) {
        let n = self.prep.species_count();
        let m = self.layout.m;
        let eps = self.problem.epsilon;
        self.layout.reciprocals = (0..n)
            .map(|i| {
                let (lo, hi) = match &self.problem.fixed_conjugacy {
                    Some(c) => (1.0 / c[i], 1.0 / c[i]),
                    None => (eps, 1.0 / eps),
                };
                self.model.add_continuous(format!("e_{}", i + 1), lo, hi)
            })
            .collect();
        for i in 0..n {
            for k in 0..m {
                let mut terms = self.y_times(&self.layout.rates, i, k, 1.0);
                let mik = self.prep.m[(i, k)];
                if mik != 0.0 {
                    terms.push((self.layout.reciprocals[i], -mik));
                }
                if !terms.is_empty() {
                    self.model.add_constraint(
                        format!("lc_{}_{}", i + 1, k + 1),
                        terms,
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }

    /// (DE) with (Ind): `Y · A_k' = Y · A_k`, the source entries confined to
    /// `[ε, u]` on the source edge set and zero elsewhere, plus pins.
    pub fn structural_equivalence(&mut self) {
        let n = self.prep.species_count();
        let m = self.layout.m;
        let (eps, u) = (self.problem.epsilon, self.problem.upper_bound);
        let gamma = self.prep.gamma.clone().unwrap_or_default();
        for &(i, j) in &gamma {
            let v = self
                .model
                .add_continuous(format!("k_{}_{}", i + 1, j + 1), 0.0, u);
            self.layout.source_rates[i * m + j] = Some(v);
            self.model.add_constraint(
                format!("ind_lo_{}_{}", i + 1, j + 1),
                [(v, 1.0)],
                Relation::Ge,
                eps,
            );
            self.model.add_constraint(
                format!("ind_hi_{}_{}", i + 1, j + 1),
                [(v, 1.0)],
                Relation::Le,
                u,
            );
        }
        for i in 0..n {
            for k in 0..m {
                let mut terms = self.y_times(&self.layout.rates, i, k, 1.0);
                terms.extend(self.y_times(&self.layout.source_rates, i, k, -1.0));
                if !terms.is_empty() {
                    self.model.add_constraint(
                        format!("de_{}_{}", i + 1, k + 1),
                        terms,
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
        for (p, pin) in self.problem.pins.iter().enumerate() {
            let (i, j) = pin.entry;
            let v =
                self.layout.source_rates[i * m + j].expect("pins validated against the edge set");
            match pin.target {
                PinTarget::Value(x) => {
                    self.model
                        .add_constraint(format!("pin_{p}"), [(v, 1.0)], Relation::Eq, x);
                }
                PinTarget::Entry(a, b) => {
                    let w = self.layout.source_rates[a * m + b]
                        .expect("pins validated against the edge set");
                    self.model.add_constraint(
                        format!("pin_{p}"),
                        [(v, 1.0), (w, -1.0)],
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }

    /// (S) / (S2): `ε δ_ij ≤ a_ij ≤ u δ_ij` with binary `δ_ij`.
    pub fn sparsity(&mut self) {
        let (eps, u) = (self.problem.epsilon, self.problem.upper_bound);
        let pairs: Vec<_> = self.layout.off_diagonal().collect();
        for (i, j) in pairs {
            let a = self.layout.rate(i, j).expect("off-diagonal");
            let d = self.model.add_binary(format!("d_{}_{}", i + 1, j + 1));
            let k = self.layout.idx(i, j);
            self.layout.reaction_indicators[k] = Some(d);
            self.model.add_constraint(
                format!("s_lo_{}_{}", i + 1, j + 1),
                [(a, 1.0), (d, -eps)],
                Relation::Ge,
                0.0,
            );
            self.model.add_constraint(
                format!("s_hi_{}_{}", i + 1, j + 1),
                [(a, 1.0), (d, -u)],
                Relation::Le,
                0.0,
            );
        }
    }

    /// Weak reversibility: an auxiliary circulation `Ã` with the same support
    /// as the realization; its off-diagonal row and column sums agree, so
    /// the all-ones vector lies in its kernel.
    pub fn weak_reversibility(&mut self) {
        let (eps, u) = (self.problem.epsilon, self.problem.upper_bound);
        let m = self.layout.m;
        let pairs: Vec<_> = self.layout.off_diagonal().collect();
        for &(i, j) in &pairs {
            let t = self
                .model
                .add_continuous(format!("t_{}_{}", i + 1, j + 1), 0.0, u);
            self.layout.circulation[i * m + j] = Some(t);
            let d = self
                .layout
                .indicator(i, j)
                .expect("sparsity rows added first");
            self.model.add_constraint(
                format!("wrs_lo_{}_{}", i + 1, j + 1),
                [(t, 1.0), (d, -eps)],
                Relation::Ge,
                0.0,
            );
            self.model.add_constraint(
                format!("wrs_hi_{}_{}", i + 1, j + 1),
                [(t, 1.0), (d, -u)],
                Relation::Le,
                0.0,
            );
        }
        for j in 0..m {
            let mut terms = Vec::new();
            for i in 0..m {
                if i != j {
                    terms.push((self.layout.circulation[i * m + j].unwrap(), 1.0));
                    terms.push((self.layout.circulation[j * m + i].unwrap(), -1.0));
                }
            }
            self.model
                .add_constraint(format!("wr_{}", j + 1), terms, Relation::Eq, 0.0);
        }
    }

    /// Reversibility: `δ_ij = δ_ji`.
    pub fn reversibility(&mut self) {
        let m = self.layout.m;
        for i in 0..m {
            for j in i + 1..m {
                let a = self
                    .layout
                    .indicator(i, j)
                    .expect("sparsity rows added first");
                let b = self
                    .layout
                    .indicator(j, i)
                    .expect("sparsity rows added first");
                self.model.add_constraint(
                    format!("rev_{}_{}", i + 1, j + 1),
                    [(a, 1.0), (b, -1.0)],
                    Relation::Eq,
                    0.0,
                );
            }
        }
    }

    /// Complex balance: `A_b · Ψ(x*) = 0`.
    pub fn complex_balance(&mut self, psi: &DVector<f64>) {
        let m = self.layout.m;
        for k in 0..m {
            let mut terms = Vec::new();
            for j in 0..m {
                if j != k {
                    terms.push((self.layout.rate(k, j).unwrap(), psi[j]));
                    terms.push((self.layout.rate(j, k).unwrap(), -psi[k]));
                }
            }
            self.model
                .add_constraint(format!("cb_{}", k + 1), terms, Relation::Eq, 0.0);
        }
    }

    /// Detailed balance: `[A_b]_ij Ψ_j(x*) = [A_b]_ji Ψ_i(x*)`.
    pub fn detailed_balance(&mut self, psi: &DVector<f64>) {
        let m = self.layout.m;
        for i in 0..m {
            for j in i + 1..m {
                let a = self.layout.rate(i, j).unwrap();
                let b = self.layout.rate(j, i).unwrap();
                self.model.add_constraint(
                    format!("db_{}_{}", i + 1, j + 1),
                    [(a, psi[j]), (b, -psi[i])],
                    Relation::Eq,
                    0.0,
                );
            }
        }
    }

    /// Complex activity: `ε δ_i ≤ Σ_{j≠i} a_ij + Σ_{j≠i} a_ji ≤ (Σ u) δ_i`.
    pub fn complex_count(&mut self) {
        let m = self.layout.m;
        let (eps, u) = (self.problem.epsilon, self.problem.upper_bound);
        let total_u = 2.0 * (m.saturating_sub(1)) as f64 * u;
        for i in 0..m {
            let d = self.model.add_binary(format!("dc_{}", i + 1));
            self.layout.complex_indicators.push(d);
            let mut terms = Vec::new();
            for j in 0..m {
                if j != i {
                    terms.push((self.layout.rate(i, j).unwrap(), 1.0));
                    terms.push((self.layout.rate(j, i).unwrap(), 1.0));
                }
            }
            let mut lo = terms.clone();
            lo.push((d, -eps));
            self.model
                .add_constraint(format!("comp_lo_{}", i + 1), lo, Relation::Ge, 0.0);
            terms.push((d, -total_u));
            self.model
                .add_constraint(format!("comp_hi_{}", i + 1), terms, Relation::Le, 0.0);
        }
    }

    /// Reaction or complex count, stated as minimization, plus the
    /// optional rate-sum term.
    pub fn objective(&mut self) {
        let sign = self.problem.objective.sense_sign();
        let counted: Vec<VarId> = if self.problem.objective.counts_reactions() {
            self.layout
                .reaction_indicators
                .iter()
                .flatten()
                .copied()
                .collect()
        } else {
            self.layout.complex_indicators.clone()
        };
        let mut terms: Vec<(VarId, f64)> = counted.into_iter().map(|d| (d, sign)).collect();
        if self.problem.tie_break {
            let rates: Vec<VarId> = self.layout.rates.iter().flatten().copied().collect();
            if !rates.is_empty() {
                let w = TIE_BREAK_WEIGHT / (rates.len() as f64 * self.problem.upper_bound);
                terms.extend(rates.into_iter().map(|v| (v, w)));
            }
        }
        self.model.set_objective(Sense::Minimize, terms);
    }

    pub fn finish(self) -> (MilpModel, Layout) {
        (self.model, self.layout)
    }
}

/// Builds the full MILP for a prepared problem.
pub fn build_model(problem: &ConjugacyProblem, prep: &Prepared) -> (MilpModel, Layout) {
    let req = problem.requirements;
    let mut b = ModelBuilder::new(problem, prep);
    match problem.mode {
        Mode::Conjugacy => b.linear_conjugacy(),
        Mode::StructuralEquivalence => b.structural_equivalence(),
    }
    if problem.objective.counts_reactions() || req.weakly_reversible || req.reversible {
        b.sparsity();
    }
    if req.weakly_reversible {
        b.weak_reversibility();
    }
    if req.reversible {
        b.reversibility();
    }
    if let Some(psi) = prep.psi_star() {
        if req.complex_balanced {
            b.complex_balance(&psi);
        }
        if req.detailed_balanced {
            b.detailed_balance(&psi);
        }
    }
    if !problem.objective.counts_reactions() {
        b.complex_count();
    }
    b.objective();
    b.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub reaction_count: usize,
    pub complex_count: usize,
    /// `‖Y·A_b − diag(c)⁻¹·M‖_∞`, or `‖Y·A_k' − Y·A_k‖_∞` in structural mode.
    pub conjugacy_residual: f64,
    /// Value of the primary (integer) objective in its natural sense.
    pub objective_value: f64,
    pub nodes: usize,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateRealization {
    pub species: Vec<String>,
    /// Full complex set of the problem, including extra complexes.
    pub complexes: Vec<Complex>,
    pub a_b: KirchhoffMatrix,
    /// Conjugacy constants; all ones in structural mode.
    pub c: Vec<f64>,
    /// `A_b · diag(Ψ(c))`.
    pub a_k_prime: KirchhoffMatrix,
    /// Realization with inactive complexes removed.
    pub network: ReactionNetwork,
    /// Reaction support `(target, source)` of `A_b`.
    pub support: Vec<(usize, usize)>,
    /// Solved source rates (structural mode).
    pub source_rates: Option<KirchhoffMatrix>,
    /// Kinetics matrix `M` the realization was fitted to.
    pub kinetics_matrix: DMatrix<f64>,
    pub equilibrium: Option<EquilibriumPoint>,
    pub diagnostics: Diagnostics,
}

impl ConjugateRealization {
    pub fn stoichiometric_matrix(&self) -> StoichiometricMatrix {
        StoichiometricMatrix::from_complexes(self.species.len(), &self.complexes)
    }

    /// `‖Y·A_b − diag(c)⁻¹·M‖_∞`.
    pub fn conjugacy_residual(&self) -> f64 {
        let y = self.stoichiometric_matrix().to_f64();
        let mut target = self.kinetics_matrix.clone();
        for (i, c) in self.c.iter().enumerate() {
            target.row_mut(i).scale_mut(1.0 / c);
        }
        (y * self.a_b.as_matrix() - target).amax()
    }

    /// Relative mismatch between the realization's vector field in the
    /// conjugate coordinates and the scaled source field:
    /// `Y·A_k'·Ψ(x/c)` against `diag(c)⁻¹ · M · Ψ(x)`.
    pub fn vector_field_mismatch(&self, x: &[f64]) -> Result<f64, NetworkError> {
        let y = self.stoichiometric_matrix();
        let scaled: Vec<f64> = x.iter().zip(&self.c).map(|(a, c)| a / c).collect();
        let lhs = y.to_f64() * self.a_k_prime.as_matrix() * y.mass_action_vector(&scaled)?;
        let mut rhs = &self.kinetics_matrix * y.mass_action_vector(x)?;
        for (i, c) in self.c.iter().enumerate() {
            rhs[i] /= c;
        }
        let scale = rhs.amax().max(lhs.amax()).max(1e-300);
        Ok((lhs - rhs).amax() / scale)
    }

    /// Re-checks the Kirchhoff invariants and the conjugacy residual.
    pub fn validate(&self) -> Result<(), ConjugacyError> {
        KirchhoffMatrix::new(self.a_b.as_matrix().clone())
            .and_then(|_| KirchhoffMatrix::new(self.a_k_prime.as_matrix().clone()))
            .map_err(|e| ConjugacyError::Validation(e.to_string()))?;
        let r = self.conjugacy_residual();
        if r > CONJUGACY_TOL {
            return Err(ConjugacyError::Validation(format!(
                "conjugacy residual {r:e} exceeds {CONJUGACY_TOL:e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Realized(Box<ConjugateRealization>),
    Infeasible { nodes: usize },
}

impl Outcome {
    pub fn realization(&self) -> Option<&ConjugateRealization> {
        match self {
            Outcome::Realized(r) => Some(r),
            Outcome::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Outcome::Realized(_))
    }
}

/// Entries `≤ ZERO_TOL` of a decision matrix without indicators are zero.
const ZERO_TOL: f64 = 1e-9;

fn extract(
    problem: &ConjugacyProblem,
    prep: &Prepared,
    layout: &Layout,
    sol: &MilpSolution,
) -> Result<ConjugateRealization, ConjugacyError> {
    let m = layout.m;
    let n = prep.species_count();
    let mut off = DMatrix::zeros(m, m);
    for (i, j) in layout.off_diagonal() {
        let v = sol.value(layout.rate(i, j).unwrap());
        off[(i, j)] = match layout.indicator(i, j) {
            Some(d) if sol.value(d) < 0.5 => 0.0,
            _ => v,
        };
    }
    let a_b = KirchhoffMatrix::from_off_diagonal(off, ZERO_TOL);

    let (c, a_k_prime, source_rates, kinetics_matrix) = match problem.mode {
        Mode::Conjugacy => {
            let c: Vec<f64> = layout
                .reciprocals
                .iter()
                .map(|&e| 1.0 / sol.value(e))
                .collect();
            let psi_c = prep.y.mass_action_vector(&c)?;
            let a_k_prime = a_b.scale_columns(psi_c.as_slice());
            (c, a_k_prime, None, prep.m.clone())
        }
        Mode::StructuralEquivalence => {
            let mut src = DMatrix::zeros(m, m);
            for (k, v) in layout.source_rates.iter().enumerate() {
                if let Some(v) = v {
                    src[(k / m, k % m)] = sol.value(*v);
                }
            }
            let src = KirchhoffMatrix::from_off_diagonal(src, 0.0);
            let km = prep.y.to_f64() * src.as_matrix();
            (vec![1.0; n], a_b.clone(), Some(src), km)
        }
    };

    let full =
        ReactionNetwork::from_kirchhoff(prep.species.clone(), prep.complexes.clone(), &a_k_prime)?;
    let network = full.prune_inactive();
    let support = a_b.support();
    let primary = match problem.objective {
        ObjectiveKind::Sparse | ObjectiveKind::Dense => support.len() as f64,
        ObjectiveKind::MinComplexes | ObjectiveKind::MaxComplexes => layout
            .complex_indicators
            .iter()
            .filter(|d| sol.value(**d) > 0.5)
            .count() as f64,
    };
    let mut out = ConjugateRealization {
        species: prep.species.clone(),
        complexes: prep.complexes.clone(),
        a_b,
        c,
        a_k_prime,
        support,
        source_rates,
        kinetics_matrix,
        equilibrium: prep.equilibrium.clone(),
        diagnostics: Diagnostics {
            reaction_count: network.reaction_count(),
            complex_count: network.complex_count(),
            conjugacy_residual: 0.0,
            objective_value: primary,
            nodes: sol.nodes,
            pivots: sol.pivots,
        },
        network,
    };
    out.diagnostics.conjugacy_residual = out.conjugacy_residual();
    Ok(out)
}

fn run(
    problem: &ConjugacyProblem,
    prep: &Prepared,
    model: &MilpModel,
    layout: &Layout,
) -> Result<Outcome, ConjugacyError> {
    let sol = solve_milp(model, &problem.solver)?;
    match sol.status {
        SolveStatus::Optimal => {
            let r = extract(problem, prep, layout, &sol)?;
            r.validate()?;
            Ok(Outcome::Realized(Box::new(r)))
        }
        SolveStatus::Infeasible => Ok(Outcome::Infeasible { nodes: sol.nodes }),
        SolveStatus::Unbounded => Err(ConjugacyError::Unbounded),
        status @ (SolveStatus::NodeLimit | SolveStatus::IterationLimit) => {
            Err(ConjugacyError::SolverLimit {
                status,
                nodes: sol.nodes,
            })
        }
    }
}

/// Assembles the selected constraint families, solves, and reconstructs the
/// realization. Infeasibility is an [`Outcome`], not an error.
pub fn solve(problem: &ConjugacyProblem) -> Result<Outcome, ConjugacyError> {
    let prep = prepare(problem)?;
    let (model, layout) = build_model(problem, &prep);
    run(problem, &prep, &model, &layout)
}

/// Looks for a second optimal reaction support different from `found`:
/// re-solves with the primary objective held at its optimum and a cut
/// excluding `found`. Only defined for the reaction-count objectives.
pub fn alternative_support(
    problem: &ConjugacyProblem,
    found: &ConjugateRealization,
) -> Result<Option<ConjugateRealization>, ConjugacyError> {
    if !problem.objective.counts_reactions() {
        return Ok(None);
    }
    let prep = prepare(problem)?;
    let (mut model, layout) = build_model(problem, &prep);
    let mut cut = Vec::new();
    let mut rhs = 1.0;
    let mut all = Vec::new();
    for (i, j) in layout.off_diagonal() {
        let d = layout.indicator(i, j).unwrap();
        all.push((d, 1.0));
        if found.support.contains(&(i, j)) {
            cut.push((d, -1.0));
            rhs -= 1.0;
        } else {
            cut.push((d, 1.0));
        }
    }
    model.add_constraint("nogood", cut, Relation::Ge, rhs);
    let k = found.support.len() as f64;
    let rel = match problem.objective {
        ObjectiveKind::Sparse => Relation::Le,
        _ => Relation::Ge,
    };
    model.add_constraint("optimum", all, rel, k);
    match run(problem, &prep, &model, &layout)? {
        Outcome::Realized(r) => Ok(Some(*r)),
        Outcome::Infeasible { .. } => Ok(None),
    }
}
