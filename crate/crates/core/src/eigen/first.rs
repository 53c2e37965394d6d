use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::polish::polish;
use super::{
    check_sizes, eigenpair_at, normalize_to_sphere, sphere_descent, DescentOptions, EigenPair,
    Evaluation, SolverConfig,
};
use crate::energy::{gagliardo_energy, gagliardo_gradient, GridFunction, WeightField};
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;

const INIT_ATTEMPTS: u64 = 10;
pub(crate) const POLISH_SWEEPS: usize = 60;

/// Positive part of a seeded random vector, supported on `{m > 0}`.
fn initial_guess(weight: &WeightField, p: f64, seed: u64) -> Result<GridFunction> {
    let mut last = Error::NotNormalizable(0.0);
    for attempt in 0..INIT_ATTEMPTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)));
        let v: Vec<f64> = weight
            .values()
            .iter()
            .map(|&m| {
                let r: f64 = rng.gen_range(-1.0..1.0);
                if m > 0.0 {
                    r.max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        match normalize_to_sphere(&GridFunction::new(v), weight, p) {
            Ok(u) => return Ok(u),
            Err(e) => last = e,
        }
    }
    Err(Error::Solver(format!(
        "no normalizable starting point after {INIT_ATTEMPTS} seeds: {last}"
    )))
}

/// First eigenpair: minimizes `Φ` over the sphere `{Ψ_m = 1}`.
///
/// The returned eigenfunction carries the sign convention (largest entry
/// positive), so a converged first eigenfunction is positive.
pub fn solve_lambda1(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    config: &SolverConfig,
) -> Result<EigenPair> {
    check_sizes(kernel, weight)?;
    let start = initial_guess(weight, p, config.seed)?;
    solve_lambda1_from(kernel, weight, p, config, &start)
}

pub(crate) fn solve_lambda1_from(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    config: &SolverConfig,
    start: &GridFunction,
) -> Result<EigenPair> {
    let objective = |u: &GridFunction| -> Result<Evaluation> {
        Ok(Evaluation {
            value: gagliardo_energy(kernel, p, u)?,
            grad: gagliardo_gradient(kernel, p, u)?,
        })
    };
    let out = sphere_descent(weight, p, start, objective, &DescentOptions::from(config))?;
    let (u, iterations) = if out.converged {
        (out.u, out.iterations)
    } else {
        let pol = polish(
            kernel,
            weight,
            p,
            &out.u,
            config.tol_residual,
            POLISH_SWEEPS,
        )?;
        (pol.u, out.iterations + pol.sweeps)
    };
    let pair = eigenpair_at(
        kernel,
        weight,
        p,
        u.with_sign_convention(),
        iterations,
        config.tol_residual,
    )?;
    log::debug!(
        "lambda1 = {} after {} iterations, residual {:e}",
        pair.lambda,
        pair.iterations,
        pair.residual
    );
    Ok(pair)
}

/// Agreement of [`solve_lambda1`] across independent seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicityReport {
    pub trials: usize,
    pub lambdas: Vec<f64>,
    /// `max λ - min λ` over the trials.
    pub lambda_spread: f64,
    /// Largest pairwise max-norm distance between the eigenfunctions.
    pub eigenfunction_distance: f64,
}

/// Runs [`solve_lambda1`] from `trials` seeds (`config.seed`, `config.seed + 1`,
/// ...) and reports how far apart the results are.
pub fn check_simplicity(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    config: &SolverConfig,
    trials: usize,
) -> Result<SimplicityReport> {
    if trials == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    let pairs: Vec<EigenPair> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            solve_lambda1(
                kernel,
                weight,
                p,
                &config.clone().with_seed(config.seed + t),
            )
        })
        .collect::<Result<_>>()?;
    if let Some((t, pair)) = pairs.iter().enumerate().find(|(_, e)| !e.converged) {
        return Err(Error::Solver(format!(
            "trial {t} did not converge (residual {:e})",
            pair.residual
        )));
    }

    let lambdas: Vec<f64> = pairs.iter().map(|e| e.lambda).collect();
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut distance = 0.0f64;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            distance = distance.max(pairs[a].u.sub(&pairs[b].u).max_norm());
        }
    }
    Ok(SimplicityReport {
        trials,
        lambdas,
        lambda_spread: hi - lo,
        eigenfunction_distance: distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::energy::weighted_lp_energy;
    use crate::kernel::assemble_kernel;

    fn setup(n: usize, s: f64, p: f64) -> (FractionalKernel, WeightField) {
        let d = build_grid(&DomainSpec::interval(0.0, 1.0, n)).unwrap();
        let k = assemble_kernel(&d, s, p).unwrap();
        let m = WeightField::constant(&d, 1.0).unwrap();
        (k, m)
    }

    #[test]
    fn positive_normalized_eigenfunction() {
        for p in [1.5, 2.0, 3.0] {
            let s = if p > 2.0 { 0.3 } else { 0.4 };
            let (k, m) = setup(16, s, p);
            let e = solve_lambda1(&k, &m, p, &SolverConfig::default()).unwrap();
            assert!(e.converged, "p = {p}: residual {:e}", e.residual);
            assert!(e.lambda > 0.0);
            assert!(e.u.iter().all(|&v| v > 0.0));
            let psi = weighted_lp_energy(&m, p, &e.u).unwrap();
            assert!((psi - 1.0).abs() < 1e-10);
            let phi = gagliardo_energy(&k, p, &e.u).unwrap();
            assert!((phi - e.lambda).abs() <= 1e-10 * e.lambda);
        }
    }

    #[test]
    fn weight_scaling() {
        let p = 2.0;
        let (k, m) = setup(16, 0.4, p);
        let cfg = SolverConfig::default();
        let a = solve_lambda1(&k, &m, p, &cfg).unwrap();
        let b = solve_lambda1(&k, &m.scaled(2.0).unwrap(), p, &cfg).unwrap();
        assert!((b.lambda * 2.0 - a.lambda).abs() <= 1e-8 * a.lambda);
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let (k, m) = setup(8, 0.4, 2.0);
        let r = check_simplicity(&k, &m, 2.0, &SolverConfig::default(), 1).unwrap();
        assert_eq!(r.lambda_spread, 0.0);
        assert_eq!(r.eigenfunction_distance, 0.0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let (k, _) = setup(8, 0.4, 2.0);
        let m = WeightField::new(vec![1.0; 7], 0.125).unwrap();
        assert!(solve_lambda1(&k, &m, 2.0, &SolverConfig::default()).is_err());
    }
}
