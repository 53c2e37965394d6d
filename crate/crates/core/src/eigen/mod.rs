//! Variational eigenvalues on the weighted sphere `{Ψ_m(u) = 1}`.
//!
//! - [`solve_lambda1`]: minimum of `Φ` on the sphere.
//! - [`solve_lambda2_path`]: minimax of `Φ` over discretized odd loops.
//! - [`lambda2_upper_from_nodal`]: energy of the loop spanned by the positive
//!   and negative parts of a nodal function.
//! - [`p2_oracle_spectrum`]: exact generalized eigensolver for `p = 2`.
//! - [`compute_monotonicity_constant`]: `inf Ψ_{m̃}` over the energy-capped
//!   `m`-sphere.

mod first;
mod monotonicity;
mod oracle;
mod polish;
mod second;

use serde::{Deserialize, Serialize};

use crate::energy::{
    gagliardo_energy, weighted_lp_energy, weighted_lp_gradient, GridFunction, WeightField,
};
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;

pub use first::{check_simplicity, solve_lambda1, SimplicityReport};
pub use monotonicity::{compute_monotonicity_constant, MonotonicityConstant};
pub use oracle::{p2_oracle_spectrum, OracleSpectrum};
pub use second::{
    lambda2_upper_from_nodal, nodal_loop_energy, solve_lambda2_path, Lambda2Result, SymmetricPath,
};

/// An eigenvalue estimate with its normalized eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub u: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_residual: f64,
    pub max_iter: usize,
    pub step_init: f64,
    pub armijo_factor: f64,
    pub seed: u64,
    pub path_points: usize,
    /// Log-sum-exp sharpness per continuation stage, applied to energies
    /// relative to the stage's starting maximum. Empty means
    /// `[10, 100, 1000] × path_points`.
    pub lse_temperatures: Vec<f64>,
    pub omega_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-8,
            max_iter: 50_000,
            step_init: 1.0,
            armijo_factor: 0.5,
            seed: 0,
            path_points: 64,
            lse_temperatures: Vec::new(),
            omega_samples: 1024,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn temperatures(&self) -> Vec<f64> {
        if self.lse_temperatures.is_empty() {
            let k = self.path_points as f64;
            vec![10.0 * k, 100.0 * k, 1000.0 * k]
        } else {
            self.lse_temperatures.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("solver.{field}"), msg));
        if !(self.tol_residual > 0.0) {
            return bad(
                "tol_residual",
                format!("{} must be positive", self.tol_residual),
            );
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be positive".into());
        }
        if !(self.step_init > 0.0) {
            return bad("step_init", format!("{} must be positive", self.step_init));
        }
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            return bad(
                "armijo_factor",
                format!("{} must lie in (0, 1)", self.armijo_factor),
            );
        }
        if self.path_points < 8 {
            return bad(
                "path_points",
                format!("{} must be at least 8", self.path_points),
            );
        }
        if self.lse_temperatures.iter().any(|&t| !(t > 0.0)) {
            return bad("lse_temperatures", "entries must be positive".into());
        }
        if self.omega_samples < 8 {
            return bad(
                "omega_samples",
                format!("{} must be at least 8", self.omega_samples),
            );
        }
        Ok(())
    }
}

/// Rescales `u` onto the sphere: `u / Ψ_m(u)^{1/p}`.
pub fn normalize_to_sphere(u: &GridFunction, weight: &WeightField, p: f64) -> Result<GridFunction> {
    let psi = weighted_lp_energy(weight, p, u)?;
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::NotNormalizable(psi));
    }
    Ok(u.scaled(psi.powf(-1.0 / p)))
}

pub(crate) fn check_sizes(kernel: &FractionalKernel, weight: &WeightField) -> Result<()> {
    if kernel.num_cells() != weight.len() {
        return Err(Error::SizeMismatch {
            expected: kernel.num_cells(),
            got: weight.len(),
        });
    }
    Ok(())
}

/// Builds an [`EigenPair`] from a sphere point, with `λ = Φ(u)`.
pub(crate) fn eigenpair_at(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    u: GridFunction,
    iterations: usize,
    tol: f64,
) -> Result<EigenPair> {
    let u = normalize_to_sphere(&u, weight, p)?;
    let lambda = gagliardo_energy(kernel, p, &u)?;
    let residual = crate::energy::residual_norm(kernel, weight, p, lambda, &u)?;
    Ok(EigenPair {
        lambda,
        u,
        residual,
        iterations,
        converged: residual < tol,
    })
}

/// Value and Euclidean gradient of an objective `F`.
pub(crate) struct Evaluation {
    pub value: f64,
    pub grad: GridFunction,
}

pub(crate) struct DescentOutcome {
    pub u: GridFunction,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct DescentOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_init: f64,
    pub armijo_factor: f64,
}

impl From<&SolverConfig> for DescentOptions {
    fn from(c: &SolverConfig) -> Self {
        Self {
            tol: c.tol_residual,
            max_iter: c.max_iter,
            step_init: c.step_init,
            armijo_factor: c.armijo_factor,
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
/// Iterations over which the residual must at least halve.
pub(crate) const STALL_WINDOW: usize = 1000;

/// Allowed increase attributed to rounding when comparing objective values.
pub(crate) fn rounding_slack(value: f64) -> f64 {
    64.0 * f64::EPSILON * value.abs()
}

/// Projected descent of `F ∘ normalize` on the sphere `{Ψ_m = 1}`.
///
/// The search direction is the gradient of `F(u / Ψ_m(u)^{1/p})` at a sphere
/// point, `∇F - Ψ'_m(u)⟨u, ∇F⟩/p`. Step lengths start from a
/// Barzilai-Borwein estimate and are cut back by `armijo_factor` until the
/// Armijo condition holds. Convergence is declared when
/// `‖direction‖ / ‖∇F‖ < tol`; the descent gives up early when that ratio
/// fails to halve over a window of iterations.
pub(crate) fn sphere_descent<F>(
    weight: &WeightField,
    p: f64,
    u0: &GridFunction,
    objective: F,
    opts: &DescentOptions,
) -> Result<DescentOutcome>
where
    F: Fn(&GridFunction) -> Result<Evaluation>,
{
    let direction = |u: &GridFunction, ev: &Evaluation| -> Result<GridFunction> {
        let dpsi = weighted_lp_gradient(weight, p, u)?;
        Ok(ev.grad.add_scaled(-u.dot(&ev.grad) / p, &dpsi))
    };

    let mut u = normalize_to_sphere(u0, weight, p)?;
    let mut ev = objective(&u)?;
    let mut dir = direction(&u, &ev)?;
    let mut residual = dir.norm() / ev.grad.norm().max(f64::MIN_POSITIVE);
    let mut step = opts.step_init * u.norm() / dir.norm().max(f64::MIN_POSITIVE);
    let mut prev: Option<(GridFunction, GridFunction)> = None;

    let mut window_start = residual;
    let mut iter = 0;
    while iter < opts.max_iter {
        if residual < opts.tol {
            return Ok(DescentOutcome {
                u,
                iterations: iter,
                converged: true,
            });
        }
        iter += 1;

        if let Some((u_old, dir_old)) = &prev {
            let s = u.sub(u_old);
            let y = dir.sub(dir_old);
            let sy = s.dot(&y);
            if sy > 0.0 {
                step = s.dot(&s) / sy;
            }
        }
        // keep a single step from crossing a large part of the sphere
        let cap = 0.5 * u.norm() / dir.norm().max(f64::MIN_POSITIVE);
        step = step.min(cap);

        let slope = dir.dot(&dir);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = u.add_scaled(-step, &dir);
            if let Ok(v) = normalize_to_sphere(&trial, weight, p) {
                let ev_new = objective(&v)?;
                if ev_new.value <= ev.value - ARMIJO_C * step * slope + rounding_slack(ev.value) {
                    accepted = Some((v, ev_new));
                    break;
                }
            }
            step *= opts.armijo_factor;
        }
        let Some((v, ev_new)) = accepted else {
            // no admissible decrease left at this resolution
            break;
        };
        let dir_new = direction(&v, &ev_new)?;
        prev = Some((
            std::mem::replace(&mut u, v),
            std::mem::replace(&mut dir, dir_new),
        ));
        ev = ev_new;
        residual = dir.norm() / ev.grad.norm().max(f64::MIN_POSITIVE);

        if iter % STALL_WINDOW == 0 {
            log::debug!("{iter},{},{residual:e}", ev.value);
            // Hölder-continuous gradients (p < 2) stall here; callers polish
            if residual > 0.5 * window_start {
                break;
            }
            window_start = residual;
        }
    }

    Ok(DescentOutcome {
        converged: residual < opts.tol,
        u,
        iterations: iter,
    })
}
