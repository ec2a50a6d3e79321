//! Complex balanced realizations built from weakly reversible ones.
//!
//! If `A'` is weakly reversible with positive kernel vector `b` and `x*` is a
//! positive equilibrium, then `A'' = A' · diag(b / Ψ(x*))` has the same
//! structure as `A'` and satisfies `A'' · Ψ(x*) = 0`. The same column scaling
//! applied to the source matrix gives the source rate constants under which
//! the source network is dynamically equivalent to `A''`.

use nalgebra::DVector;
use thiserror::Error;

use crate::conjugacy::{Pin, PinTarget};
use crate::equilibrium::{
    find_equilibrium, kirchhoff_flux, EquilibriumError, EquilibriumPoint, MassActionSystem,
    BALANCE_TOL,
};
use crate::graph::linkage_classes;
use crate::milp::{solve_lp, MilpModel, Relation, Sense, SolveStatus, SolverOptions, VarId};
use crate::network::{KirchhoffMatrix, NetworkError, ReactionNetwork, StoichiometricMatrix};

/// Largest accepted `‖A · b‖_∞`, relative to `max(1, ‖b‖_∞)`.
pub const KERNEL_TOL: f64 = 1e-8;
/// Smallest component of an accepted kernel vector.
pub const KERNEL_FLOOR: f64 = 1e-9;
const PIN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("no positive kernel vector: the matrix is not weakly reversible")]
    NotWeaklyReversible,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("b is not a positive kernel vector (residual {residual:e}, smallest entry {min:e})")]
    NotKernel { residual: f64, min: f64 },
    #[error("pins cannot be met by rescaling b per linkage class: {0}")]
    Pins(String),
    #[error("linear program stopped with status {0:?}")]
    Solver(SolveStatus),
    #[error("constructed matrix is not complex balanced: ‖A''·Ψ(x*)‖ = {0:e}")]
    NotBalanced(f64),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Positive vector in the kernel of a Kirchhoff matrix, with the linkage
/// classes whose restrictions form the kernel basis.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCertificate {
    pub b: Vec<f64>,
    /// Linkage classes of the matrix; `b` restricted to each one is a basis
    /// vector of the kernel.
    pub classes: Vec<Vec<usize>>,
}

impl KernelCertificate {
    /// Wraps a candidate `b` for `a`, checking positivity and kernel
    /// membership.
    pub fn new(a: &KirchhoffMatrix, b: Vec<f64>) -> Result<Self, BalanceError> {
        if b.len() != a.dim() {
            return Err(BalanceError::Dimension {
                expected: a.dim(),
                found: b.len(),
            });
        }
        let cert = KernelCertificate {
            classes: linkage_classes(a.dim(), &a.support()),
            b,
        };
        cert.check(a)?;
        Ok(cert)
    }

    /// `‖A · b‖_∞`.
    pub fn residual(&self, a: &KirchhoffMatrix) -> f64 {
        kirchhoff_flux(a, &DVector::from_column_slice(&self.b))
    }

    fn check(&self, a: &KirchhoffMatrix) -> Result<(), BalanceError> {
        let residual = self.residual(a);
        let scale = self.b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let min = self.b.iter().copied().fold(f64::INFINITY, f64::min);
        if residual > KERNEL_TOL * scale || min.is_nan() || min < KERNEL_FLOOR {
            return Err(BalanceError::NotKernel { residual, min });
        }
        Ok(())
    }

    /// Basis vector `b^(k)`: `b` on class `k`, zero elsewhere.
    pub fn class_vector(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.b.len()];
        for &j in &self.classes[k] {
            v[j] = self.b[j];
        }
        v
    }

    fn class_of(&self) -> Vec<usize> {
        let mut of = vec![0; self.b.len()];
        for (k, class) in self.classes.iter().enumerate() {
            for &j in class {
                of[j] = k;
            }
        }
        of
    }
}

/// Solves `min Σ b_j` subject to `A · b = 0`, `b ≥ 1`. Feasible exactly when
/// `A` is weakly reversible.
pub fn positive_kernel_vector(a: &KirchhoffMatrix) -> Result<KernelCertificate, BalanceError> {
    let m = a.dim();
    let mut model = MilpModel::new();
    let b: Vec<VarId> = (0..m)
        .map(|j| model.add_continuous(format!("b_{}", j + 1), 1.0, f64::INFINITY))
        .collect();
    for i in 0..m {
        let terms: Vec<(VarId, f64)> = (0..m)
            .filter(|&j| a.get(i, j) != 0.0)
            .map(|j| (b[j], a.get(i, j)))
            .collect();
        if !terms.is_empty() {
            model.add_constraint(format!("ker_{}", i + 1), terms, Relation::Eq, 0.0);
        }
    }
    model.set_objective(Sense::Minimize, b.iter().map(|&v| (v, 1.0)));
    let sol = solve_lp(&model, &SolverOptions::default()).expect("kernel model is well formed");
    match sol.status {
        SolveStatus::Optimal => KernelCertificate::new(a, sol.values),
        SolveStatus::Infeasible => Err(BalanceError::NotWeaklyReversible),
        other => Err(BalanceError::Solver(other)),
    }
}

/// Result of the construction `A'' = A' · diag(b / Ψ(x*))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedConstruction {
    pub a_k_double_prime: KirchhoffMatrix,
    /// `A_k · diag(b / Ψ(x*))` when a source matrix was given.
    pub source_rates: Option<KirchhoffMatrix>,
    /// Column scaling `b / Ψ(x*)`.
    pub scale: Vec<f64>,
    pub b: Vec<f64>,
    pub x_star: Vec<f64>,
}

impl BalancedConstruction {
    /// `‖A'' · Ψ(x*)‖_∞` over the complexes `y`.
    pub fn balance_residual(&self, y: &StoichiometricMatrix) -> Result<f64, NetworkError> {
        Ok(kirchhoff_flux(
            &self.a_k_double_prime,
            &y.mass_action_vector(&self.x_star)?,
        ))
    }
}

/// `A'' = A' · diag(b / Ψ(x*))`, plus the same scaling of `source` when given.
pub fn complex_balanced_from_wr(
    a_prime: &KirchhoffMatrix,
    b: &KernelCertificate,
    y: &StoichiometricMatrix,
    x_star: &[f64],
    source: Option<&KirchhoffMatrix>,
) -> Result<BalancedConstruction, BalanceError> {
    let m = a_prime.dim();
    for found in [b.b.len(), y.complex_count()]
        .into_iter()
        .chain(source.map(|s| s.dim()))
    {
        if found != m {
            return Err(BalanceError::Dimension { expected: m, found });
        }
    }
    b.check(a_prime)?;
    let psi = y.mass_action_vector(x_star)?;
    let scale: Vec<f64> = b.b.iter().zip(psi.iter()).map(|(b, p)| b / p).collect();
    Ok(BalancedConstruction {
        a_k_double_prime: a_prime.scale_columns(&scale),
        source_rates: source.map(|s| s.scale_columns(&scale)),
        scale,
        b: b.b.clone(),
        x_star: x_star.to_vec(),
    })
}

/// Rescales `b` by one positive factor per linkage class so that the induced
/// source entries `[A_k]_ij · b_j / Ψ_j` meet the pins. Classes not touched by
/// any value pin keep their scale relative to the first class they are tied
/// to, or their original scale when untied.
pub fn rescale_kernel_for_pins(
    b: &KernelCertificate,
    source: &KirchhoffMatrix,
    psi: &DVector<f64>,
    pins: &[Pin],
) -> Result<KernelCertificate, BalanceError> {
    let m = b.b.len();
    if source.dim() != m || psi.len() != m {
        return Err(BalanceError::Dimension {
            expected: m,
            found: if source.dim() != m {
                source.dim()
            } else {
                psi.len()
            },
        });
    }
    if pins.is_empty() {
        return Ok(b.clone());
    }
    let class_of = b.class_of();
    // Induced entry (i, j) equals s[class_of[j]] * weight(i, j).
    let weight = |(i, j): (usize, usize)| -> Result<f64, BalanceError> {
        if i >= m || j >= m || i == j {
            return Err(BalanceError::Pins(format!(
                "entry ({},{}) outside the {m}x{m} off-diagonal range",
                i + 1,
                j + 1
            )));
        }
        let w = source.get(i, j) * b.b[j] / psi[j];
        if w > 0.0 {
            Ok(w)
        } else {
            Err(BalanceError::Pins(format!(
                "entry ({},{}) is not a reaction of the source",
                i + 1,
                j + 1
            )))
        }
    };

    // s[a] = ratio * s[b] for entry pins; s[a] = value for value pins.
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    let mut ties: Vec<(usize, usize, f64)> = Vec::new();
    for pin in pins {
        let w = weight(pin.entry)?;
        let a = class_of[pin.entry.1];
        match pin.target {
            PinTarget::Value(v) => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(BalanceError::Pins(format!(
                        "pinned value {v} is not positive"
                    )));
                }
                fixed.push((a, v / w));
            }
            PinTarget::Entry(k, l) => {
                let w2 = weight((k, l))?;
                ties.push((a, class_of[l], w2 / w));
            }
        }
    }

    let classes = b.classes.len();
    let mut s: Vec<Option<f64>> = vec![None; classes];
    for &(a, v) in &fixed {
        if s[a].is_none() {
            s[a] = Some(v);
        }
    }
    loop {
        let mut changed = false;
        for &(a, c, r) in &ties {
            match (s[a], s[c]) {
                (None, Some(sc)) => {
                    s[a] = Some(r * sc);
                    changed = true;
                }
                (Some(sa), None) => {
                    s[c] = Some(sa / r);
                    changed = true;
                }
                _ => {}
            }
        }
        if changed {
            continue;
        }
        // Seed the first class of a component without any value pin.
        match (0..classes).find(|&k| s[k].is_none() && ties.iter().any(|t| t.0 == k || t.1 == k)) {
            Some(k) => s[k] = Some(1.0),
            None => break,
        }
    }
    let s: Vec<f64> = s.into_iter().map(|v| v.unwrap_or(1.0)).collect();

    let close = |x: f64, y: f64| (x - y).abs() <= PIN_TOL * x.abs().max(y.abs()).max(1.0);
    for &(a, v) in &fixed {
        if !close(s[a], v) {
            return Err(BalanceError::Pins(format!(
                "linkage class {} needs two different scalings ({} and {v})",
                a + 1,
                s[a]
            )));
        }
    }
    for &(a, c, r) in &ties {
        if !close(s[a], r * s[c]) {
            return Err(BalanceError::Pins(format!(
                "entry pin between linkage classes {} and {} is over-determined",
                a + 1,
                c + 1
            )));
        }
    }
    let scaled: Vec<f64> = b.b.iter().zip(&class_of).map(|(v, &k)| v * s[k]).collect();
    Ok(KernelCertificate {
        b: scaled,
        classes: b.classes.clone(),
    })
}

/// Looks for `c > 0` making `A · diag(c)` detailed balanced at `psi`:
/// `A_ij c_j psi_j = A_ji c_i psi_i` for every pair. `None` when no such
/// rescaling exists.
pub fn detailed_balance_rescaling(
    a: &KirchhoffMatrix,
    psi: &DVector<f64>,
) -> Result<Option<Vec<f64>>, BalanceError> {
    let m = a.dim();
    if psi.len() != m {
        return Err(BalanceError::Dimension {
            expected: m,
            found: psi.len(),
        });
    }
    let mut model = MilpModel::new();
    let c: Vec<VarId> = (0..m)
        .map(|j| model.add_continuous(format!("c_{}", j + 1), 1.0, f64::INFINITY))
        .collect();
    for i in 0..m {
        for j in i + 1..m {
            let (fwd, rev) = (a.get(i, j) * psi[j], a.get(j, i) * psi[i]);
            if fwd == 0.0 && rev == 0.0 {
                continue;
            }
            let mut terms = Vec::new();
            if fwd != 0.0 {
                terms.push((c[j], fwd));
            }
            if rev != 0.0 {
                terms.push((c[i], -rev));
            }
            model.add_constraint(format!("db_{}_{}", i + 1, j + 1), terms, Relation::Eq, 0.0);
        }
    }
    model.set_objective(Sense::Minimize, c.iter().map(|&v| (v, 1.0)));
    let sol = solve_lp(&model, &SolverOptions::default()).expect("rescaling model is well formed");
    match sol.status {
        SolveStatus::Optimal => Ok(Some(sol.values)),
        SolveStatus::Infeasible => Ok(None),
        other => Err(BalanceError::Solver(other)),
    }
}

/// End-to-end construction from a weakly reversible realization network:
/// equilibrium (supplied or found), kernel vector, pin rescaling, column
/// scaling, and a final complex-balance check at `x*`.
pub fn construct_complex_balanced(
    realization: &ReactionNetwork,
    source: Option<&KirchhoffMatrix>,
    x_star: Option<&[f64]>,
    pins: &[Pin],
) -> Result<BalancedConstruction, BalanceError> {
    let a_prime = realization.kirchhoff_matrix();
    let y = realization.stoichiometric_matrix();
    let system = MassActionSystem::from_network(realization);
    let eq = match x_star {
        Some(x) => EquilibriumPoint::verified(&system, x.to_vec(), 1e-6)?,
        None => find_equilibrium(&system, None)?,
    };
    let mut cert = positive_kernel_vector(&a_prime)?;
    if !pins.is_empty() {
        let src = source
            .ok_or_else(|| BalanceError::Pins("pins need the source rate matrix".to_string()))?;
        cert = rescale_kernel_for_pins(&cert, src, &y.mass_action_vector(&eq.x)?, pins)?;
    }
    let out = complex_balanced_from_wr(&a_prime, &cert, &y, &eq.x, source)?;
    let residual = out.balance_residual(&y)?;
    if residual > BALANCE_TOL {
        return Err(BalanceError::NotBalanced(residual));
    }
    Ok(out)
}
