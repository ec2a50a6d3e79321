//! Positive equilibria of `dx/dt = M · Ψ(x)` and balance checks at a point.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::{KirchhoffMatrix, NetworkError, ReactionNetwork, StoichiometricMatrix};

/// Residual `‖Y·A_k·Ψ(x)‖_∞` accepted as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
/// Tolerance of the complex and detailed balance predicates.
pub const BALANCE_TOL: f64 = 1e-7;

const RELATIVE_TOL: f64 = 1e-6;
const MAX_ITER: usize = 200;
const MAX_HALVINGS: usize = 30;
const MULTISTARTS: usize = 8;
const POSITIVITY_FLOOR: f64 = 1e-10;
const GRID: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error(
        "no positive equilibrium found from {starts} starting points (best residual {best_residual:e}); \
         supply one explicitly"
    )]
    NoConvergence { starts: usize, best_residual: f64 },
    #[error("point is not an equilibrium: residual {residual:e} exceeds {tolerance:e}")]
    NotAnEquilibrium { residual: f64, tolerance: f64 },
    #[error("kinetics matrix is {rows}x{cols}, stoichiometric matrix is {n}x{m}")]
    Dimension {
        rows: usize,
        cols: usize,
        n: usize,
        m: usize,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Mass-action system `dx/dt = M · Ψ(x)` with `Ψ` read from the complexes `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassActionSystem {
    y: StoichiometricMatrix,
    m: DMatrix<f64>,
}

impl MassActionSystem {
    pub fn new(y: StoichiometricMatrix, m: DMatrix<f64>) -> Result<Self, EquilibriumError> {
        if m.nrows() != y.species_count() || m.ncols() != y.complex_count() {
            return Err(EquilibriumError::Dimension {
                rows: m.nrows(),
                cols: m.ncols(),
                n: y.species_count(),
                m: y.complex_count(),
            });
        }
        Ok(MassActionSystem { y, m })
    }

    pub fn from_network(net: &ReactionNetwork) -> Self {
        MassActionSystem {
            y: net.stoichiometric_matrix(),
            m: net.kinetics_matrix(),
        }
    }

    pub fn species_count(&self) -> usize {
        self.y.species_count()
    }

    pub fn stoichiometric_matrix(&self) -> &StoichiometricMatrix {
        &self.y
    }

    pub fn kinetics_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rhs(&self, x: &[f64]) -> Result<DVector<f64>, NetworkError> {
        Ok(&self.m * self.y.mass_action_vector(x)?)
    }

    /// `‖M · Ψ(x)‖_∞`.
    pub fn residual(&self, x: &[f64]) -> Result<f64, NetworkError> {
        Ok(self.rhs(x)?.amax())
    }

    /// Largest per-species gross flux `Σ_j |M_ij| Ψ_j(x)`, the scale against
    /// which a residual is judged.
    pub fn flux_scale(&self, x: &[f64]) -> Result<f64, NetworkError> {
        Ok((self.m.abs() * self.y.mass_action_vector(x)?).amax())
    }

    /// Residual small in absolute terms and against the gross flux, so that
    /// points collapsing towards the boundary are not mistaken for equilibria.
    fn converged(&self, x: &[f64], residual: f64) -> Result<bool, NetworkError> {
        Ok(residual <= EQUILIBRIUM_TOL && residual <= RELATIVE_TOL * self.flux_scale(x)?)
    }

    /// `∂F_i/∂x_k = Σ_j M_ij · Ψ_j(x) · Y_kj / x_k`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, NetworkError> {
        let psi = self.y.mass_action_vector(x)?;
        let n = self.species_count();
        let cols = self.y.complex_count();
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..cols {
                let e = self.y.get(k, j);
                if e == 0 {
                    continue;
                }
                let w = psi[j] * e as f64 / x[k];
                for i in 0..n {
                    jac[(i, k)] += self.m[(i, j)] * w;
                }
            }
        }
        Ok(jac)
    }
}

/// Positive equilibrium with its residual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub x: Vec<f64>,
    pub residual: f64,
    /// Newton iterations used from the successful start.
    pub iterations: usize,
    /// Index of the successful start (0 is the caller's or the all-ones point).
    pub start_index: usize,
}

impl EquilibriumPoint {
    /// Wraps a known point after checking its residual against `tolerance`.
    pub fn verified(
        system: &MassActionSystem,
        x: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self, EquilibriumError> {
        let residual = system.residual(&x)?;
        if residual > tolerance {
            return Err(EquilibriumError::NotAnEquilibrium {
                residual,
                tolerance,
            });
        }
        Ok(EquilibriumPoint {
            x,
            residual,
            iterations: 0,
            start_index: 0,
        })
    }
}

/// Deterministic starting points: `x0` (or all-ones) followed by points of
/// the grid `{0.1, 1, 10}^n`.
fn starts(n: usize, x0: Option<&[f64]>) -> Vec<Vec<f64>> {
    let mut out = vec![x0.map_or_else(|| vec![1.0; n], <[f64]>::to_vec)];
    out.push(vec![GRID[0]; n]);
    out.push(vec![GRID[2]; n]);
    let total = 3usize.saturating_pow(n as u32).max(1);
    // Stride through the grid with a step coprime to its size.
    let step = if total.is_multiple_of(7) { 5 } else { 7 };
    let mut k = 1;
    let mut visited = 0;
    while out.len() < MULTISTARTS && visited < total {
        let mut idx = k % total;
        let point: Vec<f64> = (0..n)
            .map(|_| {
                let g = GRID[idx % 3];
                idx /= 3;
                g
            })
            .collect();
        if !out.contains(&point) {
            out.push(point);
        }
        k += step;
        visited += 1;
    }
    out
}

/// Damped Newton iteration. With `polish` set it continues past the
/// acceptance threshold until the residual stops decreasing.
fn newton(
    system: &MassActionSystem,
    mut x: Vec<f64>,
    polish: bool,
) -> Result<(Vec<f64>, f64, usize), NetworkError> {
    let n = x.len();
    let mut res = system.residual(&x)?;
    for iter in 0..MAX_ITER {
        if res == 0.0 || (!polish && system.converged(&x, res)?) {
            return Ok((x, res, iter));
        }
        let f = system.rhs(&x)?;
        let jac = system.jacobian(&x)?;
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(dx) = svd.solve(&(-f), smax * 1e-12) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = (0..n)
                .map(|k| (x[k] + t * dx[k]).max(POSITIVITY_FLOOR * x[k]))
                .collect();
            // Underflow to zero counts as a rejected step.
            let r = system.residual(&trial).unwrap_or(f64::INFINITY);
            if r.is_finite() && r < res {
                x = trial;
                res = r;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok((x, res, iter));
        }
    }
    Ok((x, res, MAX_ITER))
}

/// Damped Newton with positivity clipping from up to eight deterministic
/// starts; the first point with residual at most [`EQUILIBRIUM_TOL`] wins.
pub fn find_equilibrium(
    system: &MassActionSystem,
    x0: Option<&[f64]>,
) -> Result<EquilibriumPoint, EquilibriumError> {
    let n = system.species_count();
    if let Some(x0) = x0 {
        crate::network::check_positive_state(x0, n)?;
    }
    let starts = starts(n, x0);
    let mut best = f64::INFINITY;
    for (start_index, s) in starts.iter().enumerate() {
        let (x, residual, iterations) = newton(system, s.clone(), false)?;
        if system.converged(&x, residual)? && x.iter().all(|v| *v >= 1e-12) {
            return Ok(EquilibriumPoint {
                x,
                residual,
                iterations,
                start_index,
            });
        }
        best = best.min(residual);
    }
    Err(EquilibriumError::NoConvergence {
        starts: starts.len(),
        best_residual: best,
    })
}

/// Newton refinement of a supplied approximate equilibrium, iterated until the
/// residual stops decreasing. The refined point
/// is returned only if it converged and stayed within `max_shift` (relative,
/// infinity norm) of the input; otherwise the input is checked as is.
pub fn refine_equilibrium(
    system: &MassActionSystem,
    x: &[f64],
    tolerance: f64,
    max_shift: f64,
) -> Result<EquilibriumPoint, EquilibriumError> {
    crate::network::check_positive_state(x, system.species_count())?;
    let (xr, residual, iterations) = newton(system, x.to_vec(), true)?;
    let scale = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let shift = xr
        .iter()
        .zip(x)
        .fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
    if system.converged(&xr, residual)? && shift <= max_shift * scale {
        return Ok(EquilibriumPoint {
            x: xr,
            residual,
            iterations,
            start_index: 0,
        });
    }
    EquilibriumPoint::verified(system, x.to_vec(), tolerance)
}

/// `‖A · Ψ(x)‖_∞ ≤ 1e-7`, after confirming that `x` is an equilibrium of the
/// network to `equilibrium_tol`.
pub fn is_complex_balanced_at(
    net: &ReactionNetwork,
    x: &[f64],
    equilibrium_tol: f64,
) -> Result<bool, EquilibriumError> {
    let system = MassActionSystem::from_network(net);
    EquilibriumPoint::verified(&system, x.to_vec(), equilibrium_tol)?;
    Ok(kirchhoff_flux(&net.kirchhoff_matrix(), &net.mass_action_vector(x)?) <= BALANCE_TOL)
}

/// `‖A · psi‖_∞`.
pub fn kirchhoff_flux(a: &KirchhoffMatrix, psi: &DVector<f64>) -> f64 {
    (a.as_matrix() * psi).amax()
}

/// Largest pairwise imbalance `|A_ij Ψ_j − A_ji Ψ_i|`.
pub fn detailed_imbalance(a: &KirchhoffMatrix, psi: &DVector<f64>) -> f64 {
    let m = a.dim();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            worst = worst.max((a.get(i, j) * psi[j] - a.get(j, i) * psi[i]).abs());
        }
    }
    worst
}

/// Every reaction pair balanced to 1e-7 at `x`, after confirming that `x` is
/// an equilibrium.
pub fn is_detailed_balanced_at(
    net: &ReactionNetwork,
    x: &[f64],
    equilibrium_tol: f64,
) -> Result<bool, EquilibriumError> {
    let system = MassActionSystem::from_network(net);
    EquilibriumPoint::verified(&system, x.to_vec(), equilibrium_tol)?;
    Ok(detailed_imbalance(&net.kirchhoff_matrix(), &net.mass_action_vector(x)?) <= BALANCE_TOL)
}
