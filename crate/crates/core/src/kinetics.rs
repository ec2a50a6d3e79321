//! Polynomial kinetics `dx_i/dt = Σ c · x^α` and the canonical network that
//! realizes them.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::network::{Complex, NetworkError, Reaction, ReactionNetwork};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error(
        "dx_{species}/dt contains negative monomial {coefficient} * x^{exponents:?} \
         that does not contain x_{species}; not realizable by mass action"
    )]
    NegativeCrossEffect {
        species: usize,
        coefficient: f64,
        exponents: Vec<u32>,
    },
    #[error("monomial x^{0:?} has no matching complex in the complex list")]
    MissingComplex(Vec<u32>),
    #[error("kinetics has {found} equations for {expected} species")]
    Width { found: usize, expected: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Polynomial right-hand side, one sparse polynomial per species keyed by
/// exponent vector. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialKinetics {
    species: Vec<String>,
    equations: Vec<Vec<(Complex, f64)>>,
}

impl PolynomialKinetics {
    /// Collects like terms, keeping the first-appearance order of monomials.
    pub fn new(
        species: Vec<String>,
        equations: Vec<Vec<(Vec<u32>, f64)>>,
    ) -> Result<Self, KineticsError> {
        let n = species.len();
        if equations.len() != n {
            return Err(KineticsError::Width {
                found: equations.len(),
                expected: n,
            });
        }
        let mut out = Vec::with_capacity(n);
        for eq in equations {
            let mut terms: Vec<(Complex, f64)> = Vec::new();
            let mut slot: HashMap<Complex, usize> = HashMap::new();
            for (exps, coef) in eq {
                if exps.len() != n {
                    return Err(KineticsError::Width {
                        found: exps.len(),
                        expected: n,
                    });
                }
                let key = Complex(exps);
                match slot.get(&key) {
                    Some(&k) => terms[k].1 += coef,
                    None => {
                        slot.insert(key.clone(), terms.len());
                        terms.push((key, coef));
                    }
                }
            }
            terms.retain(|(_, c)| *c != 0.0);
            out.push(terms);
        }
        Ok(PolynomialKinetics {
            species,
            equations: out,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn equations(&self) -> &[Vec<(Complex, f64)>] {
        &self.equations
    }

    /// Coefficient of `x^α` in `dx_i/dt`.
    pub fn coefficient(&self, species: usize, monomial: &Complex) -> f64 {
        self.equations[species]
            .iter()
            .find(|(m, _)| m == monomial)
            .map_or(0.0, |(_, c)| *c)
    }

    /// Distinct monomials in first-appearance order.
    pub fn monomials(&self) -> Vec<Complex> {
        let mut seen = Vec::new();
        for eq in &self.equations {
            for (m, _) in eq {
                if !seen.contains(m) {
                    seen.push(m.clone());
                }
            }
        }
        seen
    }

    /// Evaluates the right-hand side at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.equations
            .iter()
            .map(|eq| {
                eq.iter()
                    .map(|(m, c)| {
                        c * m
                            .0
                            .iter()
                            .zip(x)
                            .map(|(&a, &xi)| xi.powi(a as i32))
                            .product::<f64>()
                    })
                    .sum()
            })
            .collect()
    }

    /// The n × m kinetics matrix `M` over the given complex set: column `j`
    /// holds the coefficients of the monomial `x^{C_j}`. Every monomial must be
    /// one of the complexes.
    pub fn kinetics_matrix(&self, complexes: &[Complex]) -> Result<DMatrix<f64>, KineticsError> {
        let n = self.species.len();
        let index: HashMap<&Complex, usize> =
            complexes.iter().enumerate().map(|(j, c)| (c, j)).collect();
        let mut m = DMatrix::zeros(n, complexes.len());
        for (i, eq) in self.equations.iter().enumerate() {
            for (mono, coef) in eq {
                let j = *index
                    .get(mono)
                    .ok_or_else(|| KineticsError::MissingComplex(mono.0.clone()))?;
                m[(i, j)] += coef;
            }
        }
        Ok(m)
    }

    /// Polynomial kinetics generated by a network: `Y · A` read column by
    /// column, each column attached to the monomial of its source complex.
    pub fn from_network(net: &ReactionNetwork) -> Self {
        let m = net.kinetics_matrix();
        let n = net.species_count();
        let equations = (0..n)
            .map(|i| {
                net.complexes()
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| m[(i, *j)] != 0.0)
                    .map(|(j, c)| (c.0.clone(), m[(i, j)]))
                    .collect()
            })
            .collect();
        PolynomialKinetics::new(net.species().to_vec(), equations)
            .expect("network kinetics have matching widths")
    }

    /// Largest absolute coefficient difference against `other` over the
    /// union of monomials.
    pub fn max_coefficient_difference(&self, other: &PolynomialKinetics) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.species.len() {
            let mut all: BTreeMap<&Complex, f64> = BTreeMap::new();
            for (m, c) in &self.equations[i] {
                *all.entry(m).or_default() += c;
            }
            for (m, c) in &other.equations[i] {
                *all.entry(m).or_default() -= c;
            }
            for v in all.values() {
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

/// Builds the canonical mass-action network of polynomial kinetics: every
/// monomial `c · x^α` of `dx_i/dt` becomes the reaction
/// `α -> α + sign(c) e_i` with rate `|c|`. Complexes are numbered by first
/// appearance (source before product) and duplicates are merged.
pub fn canonical_realization(
    kinetics: &PolynomialKinetics,
) -> Result<ReactionNetwork, KineticsError> {
    let n = kinetics.species.len();
    let mut complexes: Vec<Complex> = Vec::new();
    let mut index: HashMap<Complex, usize> = HashMap::new();
    let mut intern = |c: Complex, complexes: &mut Vec<Complex>| -> usize {
        *index.entry(c.clone()).or_insert_with(|| {
            complexes.push(c);
            complexes.len() - 1
        })
    };
    let mut reactions = Vec::new();
    for (i, eq) in kinetics.equations.iter().enumerate() {
        for (mono, coef) in eq {
            let mut product = mono.clone();
            if *coef < 0.0 {
                if product.0[i] == 0 {
                    return Err(KineticsError::NegativeCrossEffect {
                        species: i,
                        coefficient: *coef,
                        exponents: mono.0.clone(),
                    });
                }
                product.0[i] -= 1;
            } else {
                product.0[i] += 1;
            }
            let s = intern(mono.clone(), &mut complexes);
            let t = intern(product, &mut complexes);
            reactions.push(Reaction {
                source: s,
                target: t,
                rate: coef.abs(),
            });
        }
    }
    debug_assert!(complexes.iter().all(|c| c.len() == n));
    Ok(ReactionNetwork::new(
        kinetics.species.clone(),
        complexes,
        reactions,
    )?)
}
