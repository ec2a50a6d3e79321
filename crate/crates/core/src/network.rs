//! Mass-action reaction networks and their matrix representations.
//!
//! A network is a triple of species, complexes and weighted reactions. The
//! complexes are the columns of the stoichiometric matrix `Y` (n × m) and the
//! weighted reaction graph is encoded in the Kirchhoff matrix `A` (m × m),
//! whose entry `A[i][j]` is the rate constant of `C_j -> C_i` and whose
//! columns sum to zero. The mass-action dynamics are `dx/dt = Y · A · Ψ(x)`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{self, GraphAnalysis};

/// Tolerance used when validating Kirchhoff matrices built from floating
/// point data.
pub const KIRCHHOFF_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("complex {index} has {found} coefficients, expected {expected}")]
    ComplexWidth {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("complexes {first} and {second} are identical")]
    DuplicateComplex { first: usize, second: usize },
    #[error("reaction {source_complex} -> {target} refers to a complex outside 0..{count}")]
    UnknownComplex {
        source_complex: usize,
        target: usize,
        count: usize,
    },
    #[error("self-loop reaction on complex {0}")]
    SelfLoop(usize),
    #[error(
        "rate constant of {source_complex} -> {target} must be positive and finite, got {rate}"
    )]
    InvalidRate {
        source_complex: usize,
        target: usize,
        rate: f64,
    },
    #[error("duplicate reaction {source_complex} -> {target}")]
    DuplicateReaction {
        source_complex: usize,
        target: usize,
    },
    #[error("concentration vector has length {found}, expected {expected}")]
    StateWidth { found: usize, expected: usize },
    #[error("concentration x[{index}] = {value} is not strictly positive")]
    NonPositiveState { index: usize, value: f64 },
    #[error("{0}")]
    InvalidKirchhoff(String),
}

/// A complex: the vector of stoichiometric coefficients over the species.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Complex(pub Vec<u32>);

impl Complex {
    pub fn zero(n: usize) -> Self {
        Complex(vec![0; n])
    }

    pub fn coefficients(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Writes the complex with species names, e.g. `2X1 + X2`; the zero
    /// complex is written `0`.
    pub fn display<'a>(&'a self, species: &'a [String]) -> ComplexDisplay<'a> {
        ComplexDisplay {
            complex: self,
            species,
        }
    }
}

pub struct ComplexDisplay<'a> {
    complex: &'a Complex,
    species: &'a [String],
}

impl fmt::Display for ComplexDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (coef, name) in self.complex.0.iter().zip(self.species) {
            if *coef == 0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if *coef == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{coef}{name}")?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// The n × m stoichiometric matrix; column `j` holds complex `C_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoichiometricMatrix {
    entries: DMatrix<u32>,
}

impl StoichiometricMatrix {
    pub fn from_complexes(n: usize, complexes: &[Complex]) -> Self {
        let entries = DMatrix::from_fn(n, complexes.len(), |i, j| complexes[j].0[i]);
        StoichiometricMatrix { entries }
    }

    pub fn species_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn complex_count(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, species: usize, complex: usize) -> u32 {
        self.entries[(species, complex)]
    }

    pub fn column(&self, complex: usize) -> Complex {
        Complex(self.entries.column(complex).iter().copied().collect())
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(f64::from)
    }

    /// Ψ(x): the monomial `x^{C_j}` of every complex.
    pub fn mass_action_vector(&self, x: &[f64]) -> Result<DVector<f64>, NetworkError> {
        check_positive_state(x, self.species_count())?;
        Ok(self.mass_action_unchecked(x))
    }

    pub(crate) fn mass_action_unchecked(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.complex_count(), |j, _| {
            self.entries
                .column(j)
                .iter()
                .zip(x)
                .filter(|(a, _)| **a > 0)
                .map(|(&a, &xi)| xi.powi(a as i32))
                .product()
        })
    }
}

pub(crate) fn check_positive_state(x: &[f64], n: usize) -> Result<(), NetworkError> {
    if x.len() != n {
        return Err(NetworkError::StateWidth {
            found: x.len(),
            expected: n,
        });
    }
    for (index, &value) in x.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(NetworkError::NonPositiveState { index, value });
        }
    }
    Ok(())
}

/// Kirchhoff (kinetics) matrix: off-diagonal entries nonnegative, diagonal
/// nonpositive, columns summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KirchhoffMatrix {
    entries: DMatrix<f64>,
}

impl KirchhoffMatrix {
    /// Validates an arbitrary square matrix against the Kirchhoff sign and
    /// column-sum conditions (relative tolerance [`KIRCHHOFF_TOL`]).
    pub fn new(entries: DMatrix<f64>) -> Result<Self, NetworkError> {
        if entries.nrows() != entries.ncols() {
            return Err(NetworkError::InvalidKirchhoff(format!(
                "matrix is {}x{}, expected square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let m = entries.nrows();
        for j in 0..m {
            let scale = entries
                .column(j)
                .iter()
                .fold(1.0_f64, |acc, v| acc.max(v.abs()));
            let sum: f64 = entries.column(j).sum();
            if sum.abs() > KIRCHHOFF_TOL * scale {
                return Err(NetworkError::InvalidKirchhoff(format!(
                    "column {j} sums to {sum:e}"
                )));
            }
            for i in 0..m {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(NetworkError::InvalidKirchhoff(format!(
                        "entry ({i},{j}) is not finite"
                    )));
                }
                if i != j && v < -KIRCHHOFF_TOL * scale {
                    return Err(NetworkError::InvalidKirchhoff(format!(
                        "off-diagonal entry ({i},{j}) = {v} is negative"
                    )));
                }
                if i == j && v > KIRCHHOFF_TOL * scale {
                    return Err(NetworkError::InvalidKirchhoff(format!(
                        "diagonal entry ({j},{j}) = {v} is positive"
                    )));
                }
            }
        }
        Ok(KirchhoffMatrix { entries })
    }

    /// Builds the matrix from its off-diagonal part. Negative or tiny entries
    /// (below `zero_tol`) are set to zero and the diagonal is the exact
    /// negated column sum, so columns sum to zero by construction.
    pub fn from_off_diagonal(mut entries: DMatrix<f64>, zero_tol: f64) -> Self {
        let m = entries.nrows();
        for j in 0..m {
            let mut out = 0.0;
            for i in 0..m {
                if i == j {
                    continue;
                }
                if entries[(i, j)] <= zero_tol {
                    entries[(i, j)] = 0.0;
                }
                out += entries[(i, j)];
            }
            entries[(j, j)] = -out;
        }
        KirchhoffMatrix { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// Off-diagonal positions holding a positive rate.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let m = self.dim();
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                if i != j && self.entries[(i, j)] > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `A · diag(scale)`: column `j` multiplied by `scale[j]`. Positive
    /// scalings keep the Kirchhoff structure.
    pub fn scale_columns(&self, scale: &[f64]) -> KirchhoffMatrix {
        let mut entries = self.entries.clone();
        for (j, s) in scale.iter().enumerate() {
            entries.column_mut(j).scale_mut(*s);
        }
        KirchhoffMatrix { entries }
    }
}

/// One reaction `source -> target` with its rate constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

/// A chemical reaction network with mass-action kinetics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    complexes: Vec<Complex>,
    /// Keyed by (source, target).
    reactions: BTreeMap<(usize, usize), f64>,
}

impl ReactionNetwork {
    pub fn new(
        species: Vec<String>,
        complexes: Vec<Complex>,
        reactions: impl IntoIterator<Item = Reaction>,
    ) -> Result<Self, NetworkError> {
        let n = species.len();
        let mut seen = std::collections::HashMap::new();
        for (index, c) in complexes.iter().enumerate() {
            if c.len() != n {
                return Err(NetworkError::ComplexWidth {
                    index,
                    found: c.len(),
                    expected: n,
                });
            }
            if let Some(&first) = seen.get(c) {
                return Err(NetworkError::DuplicateComplex {
                    first,
                    second: index,
                });
            }
            seen.insert(c.clone(), index);
        }
        let count = complexes.len();
        let mut map = BTreeMap::new();
        for r in reactions {
            if r.source >= count || r.target >= count {
                return Err(NetworkError::UnknownComplex {
                    source_complex: r.source,
                    target: r.target,
                    count,
                });
            }
            if r.source == r.target {
                return Err(NetworkError::SelfLoop(r.source));
            }
            if !(r.rate > 0.0 && r.rate.is_finite()) {
                return Err(NetworkError::InvalidRate {
                    source_complex: r.source,
                    target: r.target,
                    rate: r.rate,
                });
            }
            if map.insert((r.source, r.target), r.rate).is_some() {
                return Err(NetworkError::DuplicateReaction {
                    source_complex: r.source,
                    target: r.target,
                });
            }
        }
        Ok(ReactionNetwork {
            species,
            complexes,
            reactions: map,
        })
    }

    /// Network whose reactions are the positive off-diagonal entries of `a`.
    pub fn from_kirchhoff(
        species: Vec<String>,
        complexes: Vec<Complex>,
        a: &KirchhoffMatrix,
    ) -> Result<Self, NetworkError> {
        if a.dim() != complexes.len() {
            return Err(NetworkError::InvalidKirchhoff(format!(
                "matrix dimension {} does not match {} complexes",
                a.dim(),
                complexes.len()
            )));
        }
        let reactions = a.support().into_iter().map(|(i, j)| Reaction {
            source: j,
            target: i,
            rate: a.get(i, j),
        });
        ReactionNetwork::new(species, complexes, reactions)
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn complex_count(&self) -> usize {
        self.complexes.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    pub fn reactions(&self) -> impl Iterator<Item = Reaction> + '_ {
        self.reactions
            .iter()
            .map(|(&(source, target), &rate)| Reaction {
                source,
                target,
                rate,
            })
    }

    pub fn rate(&self, source: usize, target: usize) -> Option<f64> {
        self.reactions.get(&(source, target)).copied()
    }

    pub fn complex_index(&self, complex: &Complex) -> Option<usize> {
        self.complexes.iter().position(|c| c == complex)
    }

    pub fn stoichiometric_matrix(&self) -> StoichiometricMatrix {
        StoichiometricMatrix::from_complexes(self.species.len(), &self.complexes)
    }

    /// `[A]_{ij} = k(j,i)` off the diagonal, `[A]_{jj} = -Σ_l k(j,l)`.
    pub fn kirchhoff_matrix(&self) -> KirchhoffMatrix {
        let m = self.complexes.len();
        let mut a = DMatrix::zeros(m, m);
        for (&(s, t), &k) in &self.reactions {
            a[(t, s)] = k;
        }
        for j in 0..m {
            let out: f64 = (0..m).filter(|&i| i != j).map(|i| a[(i, j)]).sum();
            a[(j, j)] = -out;
        }
        KirchhoffMatrix { entries: a }
    }

    /// `M = Y · A`, the kinetics matrix of the network, accumulated per
    /// reaction as `k · (y_target − y_source)` so integer reaction vectors
    /// stay exact.
    pub fn kinetics_matrix(&self) -> DMatrix<f64> {
        let n = self.species.len();
        let mut m = DMatrix::zeros(n, self.complexes.len());
        for (&(s, t), &k) in &self.reactions {
            for i in 0..n {
                let d = i64::from(self.complexes[t].0[i]) - i64::from(self.complexes[s].0[i]);
                if d != 0 {
                    m[(i, s)] += k * d as f64;
                }
            }
        }
        m
    }

    pub fn mass_action_vector(&self, x: &[f64]) -> Result<DVector<f64>, NetworkError> {
        self.stoichiometric_matrix().mass_action_vector(x)
    }

    /// `dx/dt = Y · A · Ψ(x)`.
    pub fn ode_rhs(&self, x: &[f64]) -> Result<DVector<f64>, NetworkError> {
        let psi = self.mass_action_vector(x)?;
        Ok(self.kinetics_matrix() * psi)
    }

    /// Complexes touched by at least one reaction.
    pub fn active_complexes(&self) -> Vec<usize> {
        let mut set: Vec<usize> = self
            .reactions
            .keys()
            .flat_map(|&(s, t)| [s, t])
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        set.sort_unstable();
        set
    }

    /// Drops complexes without incident reactions, keeping the order of the
    /// remaining ones.
    pub fn prune_inactive(&self) -> ReactionNetwork {
        let active = self.active_complexes();
        let mut remap = vec![usize::MAX; self.complexes.len()];
        for (new, &old) in active.iter().enumerate() {
            remap[old] = new;
        }
        ReactionNetwork {
            species: self.species.clone(),
            complexes: active.iter().map(|&i| self.complexes[i].clone()).collect(),
            reactions: self
                .reactions
                .iter()
                .map(|(&(s, t), &k)| ((remap[s], remap[t]), k))
                .collect(),
        }
    }

    pub fn analyze(&self) -> GraphAnalysis {
        graph::analyze_graph(self)
    }

    pub fn complex_label(&self, index: usize) -> String {
        self.complexes[index].display(&self.species).to_string()
    }
}
