use super::normalize_to_sphere;
use super::oracle::{positive_pencil, weighted_laplacian};
use crate::energy::{gagliardo_energy, pow_abs, residual_norm, GridFunction, WeightField};
use crate::error::Result;
use crate::kernel::FractionalKernel;

/// Relative floor on differences and values inside `|t|^{p-2}`.
const FLOOR: f64 = 1e-13;
const DAMPING_STEPS: usize = 6;

pub(crate) struct Polished {
    pub u: GridFunction,
    pub residual: f64,
    pub sweeps: usize,
}

/// Fixed-point refinement of an approximate eigenfunction.
///
/// Freezing `|u_i - u_j|^{p-2}` and `|u_i|^{p-2}` at the current `u` turns the
/// eigen-equation into the linear pencil `A(u) v = λ D(u) v`, which `u`
/// satisfies exactly at an eigenpair. Each sweep replaces `u` by the pencil
/// mode closest to it, damped toward `u` when that does not lower the
/// residual. Sweeps stop below `tol` or when no damping helps.
pub(crate) fn polish(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    u: &GridFunction,
    tol: f64,
    max_sweeps: usize,
) -> Result<Polished> {
    let residual_at = |v: &GridFunction| -> Result<f64> {
        let lambda = gagliardo_energy(kernel, p, v)?;
        residual_norm(kernel, weight, p, lambda, v)
    };
    let mut u = normalize_to_sphere(u, weight, p)?;
    let mut residual = residual_at(&u)?;
    let mut sweeps = 0;
    let vol = weight.cell_volume();

    while sweeps < max_sweeps && residual >= tol {
        sweeps += 1;
        let eps = FLOOR * u.max_norm();
        let frozen = |t: f64| pow_abs(t.abs().max(eps), p - 2.0);
        let tail: Vec<f64> = (0..u.len())
            .map(|i| kernel.exterior_coeff()[i] * vol * frozen(u[i]))
            .collect();
        let a = weighted_laplacian(kernel, |i, j| frozen(u[i] - u[j]), &tail);
        let d: Vec<f64> = (0..u.len())
            .map(|i| weight.values()[i] * vol * frozen(u[i]))
            .collect();
        let Ok(modes) = positive_pencil(a, &d) else {
            break;
        };

        let unorm = u.norm();
        let closest = modes
            .into_iter()
            .map(|(_, x)| {
                let x = GridFunction::new(x);
                let overlap = x.dot(&u) / (x.norm() * unorm);
                (overlap, x)
            })
            .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
        let Some((overlap, x)) = closest else { break };
        let x = x.scaled(overlap.signum());
        let Ok(target) = normalize_to_sphere(&x, weight, p) else {
            break;
        };

        let mut theta = 1.0;
        let mut improved = None;
        for _ in 0..DAMPING_STEPS {
            if let Ok(v) = normalize_to_sphere(&u.combine(1.0 - theta, theta, &target), weight, p) {
                let r = residual_at(&v)?;
                if r < residual {
                    improved = Some((v, r));
                    break;
                }
            }
            theta *= 0.5;
        }
        let Some((v, r)) = improved else { break };
        u = v;
        residual = r;
    }
    Ok(Polished {
        u,
        residual,
        sweeps,
    })
}
