use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::{load, manifest, run_dir, write_json, Problem, RunOptions, RunOutcome, RunStatus};
use crate::eigen::{check_simplicity, solve_lambda1, SolverConfig};
use crate::energy::{
    gagliardo_energy, gagliardo_gradient, weighted_lp_energy, weighted_lp_gradient, GridFunction,
};
use crate::error::Result;
use crate::inequality::{sweep_all, GAP_TOL};
use crate::kernel::{assemble_kernel, FractionalKernel};

const FD_STEP: f64 = 1e-5;
/// Finite-difference error allowed relative to `‖g‖∞`.
const FD_TOL: f64 = 1e-6;
const FD_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];
/// Coordinates probed per point on larger grids.
const FD_MAX_COORDS: usize = 64;
const HOMOGENEITY_TOL: f64 = 1e-10;
const WEIGHT_SCALING_TOL: f64 = 1e-6;
const SIMPLICITY_LAMBDA_TOL: f64 = 1e-8;
const SIMPLICITY_FUNCTION_TOL: f64 = 1e-4;
/// Relative size of the entry perturbed by `--inject-asymmetry`.
const INJECTED_DEFECT: f64 = 1e-3;

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub suite: String,
    pub checks: usize,
    pub failures: usize,
    /// Suite-specific worst value: the most negative gap for inequality
    /// sweeps, the largest error otherwise.
    pub worst: f64,
    pub detail: String,
}

impl SuiteRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub manifest: Value,
    pub rows: Vec<SuiteRow>,
}

impl VerifyReport {
    pub fn failed_suites(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.suite.clone())
            .collect()
    }

    /// Fixed-width table, one row per suite.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18} {:>8} {:>9} {:>14}  {:<6} detail",
            "suite", "checks", "failures", "worst", "status"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<18} {:>8} {:>9} {:>14.6e}  {:<6} {}",
                r.suite,
                r.checks,
                r.failures,
                r.worst,
                if r.passed() { "PASS" } else { "FAIL" },
                r.detail
            );
        }
        out
    }
}

fn random_function(rng: &mut ChaCha8Rng, n: usize) -> GridFunction {
    GridFunction::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Random point whose entries and pairwise differences stay at least
/// `0.3/n` (times a random scale) away from zero.
///
/// For `p < 2` the energies are only `C^{1,p-1}` across `u_i = u_j` and
/// `u_i = 0`, so central differences lose their second-order accuracy there.
fn separated_function(rng: &mut ChaCha8Rng, n: usize) -> GridFunction {
    let slots = 2 * n;
    let mut levels: Vec<f64> = (0..slots)
        .map(|k| -1.0 + (2 * k + 1) as f64 / slots as f64)
        .collect();
    levels.shuffle(rng);
    let scale = rng.gen_range(0.5..2.0);
    let jitter = 0.2 / slots as f64;
    GridFunction::new(
        levels[..n]
            .iter()
            .map(|&v| scale * (v + rng.gen_range(-jitter..jitter)))
            .collect(),
    )
}

fn symmetry_row(kernel: &FractionalKernel) -> SuiteRow {
    let defect = kernel.symmetry_defect();
    let (failures, detail) = match kernel.validate() {
        Ok(()) => (0, "kernel symmetric and positive".to_string()),
        Err(e) => (1, e.to_string()),
    };
    SuiteRow {
        suite: "kernel_symmetry".into(),
        checks: 1,
        failures,
        worst: defect,
        detail,
    }
}

/// Worst central-difference error of `grad` against `f` over the probed
/// coordinates, relative to `‖grad‖∞`.
fn fd_error(
    f: &dyn Fn(&GridFunction) -> Result<f64>,
    grad: &GridFunction,
    u: &GridFunction,
    coords: &[usize],
) -> Result<f64> {
    let scale = grad.max_norm().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for &i in coords {
        let mut v = u.clone().into_values();
        v[i] = u[i] + FD_STEP;
        let fp = f(&GridFunction::new(v.clone()))?;
        v[i] = u[i] - FD_STEP;
        let fm = f(&GridFunction::new(v))?;
        let fd = (fp - fm) / (2.0 * FD_STEP);
        worst = worst.max((fd - grad[i]).abs() / scale);
    }
    Ok(worst)
}

/// Central differences of `Φ` and `Ψ_m` at random points for each exponent.
/// Exponents with `p·s ≥ 1` use `s = 0.9/p` so that the kernel exists.
fn gradient_row(pb: &Problem, s: f64, points: usize, rng: &mut ChaCha8Rng) -> Result<SuiteRow> {
    let n = pb.domain.num_cells();
    let mut checks = 0;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for p in FD_EXPONENTS {
        let sp = if p * s < 1.0 { s } else { 0.9 / p };
        let kernel = assemble_kernel(&pb.domain, sp, p)?;
        for _ in 0..points {
            let u = separated_function(rng, n);
            let coords: Vec<usize> = if n <= FD_MAX_COORDS {
                (0..n).collect()
            } else {
                (0..FD_MAX_COORDS).map(|_| rng.gen_range(0..n)).collect()
            };
            let phi = |v: &GridFunction| gagliardo_energy(&kernel, p, v);
            let psi = |v: &GridFunction| weighted_lp_energy(&pb.weight, p, v);
            let e_phi = fd_error(&phi, &gagliardo_gradient(&kernel, p, &u)?, &u, &coords)?;
            let e_psi = fd_error(&psi, &weighted_lp_gradient(&pb.weight, p, &u)?, &u, &coords)?;
            for e in [e_phi, e_psi] {
                checks += 1;
                worst = worst.max(e);
                if !(e <= FD_TOL) {
                    failures += 1;
                }
            }
        }
    }
    Ok(SuiteRow {
        suite: "gradient".into(),
        checks,
        failures,
        worst,
        detail: format!("central differences, step {FD_STEP:e}, tolerance {FD_TOL:e}"),
    })
}

/// `Φ(tu) = |t|^p Φ(u)`, `Ψ_m(tu) = |t|^p Ψ_m(u)`, `⟨Φ'(u), u⟩ = pΦ(u)`,
/// `⟨Ψ'_m(u), u⟩ = pΨ_m(u)` at random points, and `2λ₁(2m) = λ₁(m)`.
fn homogeneity_row(
    pb: &Problem,
    p: f64,
    points: usize,
    solver: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SuiteRow> {
    let n = pb.domain.num_cells();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut errors = Vec::new();
    for _ in 0..points {
        let u = random_function(rng, n);
        let t = rng.gen_range(-3.0..3.0);
        let tp = f64::abs(t).powf(p);
        let ut = u.scaled(t);
        let phi = gagliardo_energy(&pb.kernel, p, &u)?;
        let psi = weighted_lp_energy(&pb.weight, p, &u)?;
        errors.push(rel(gagliardo_energy(&pb.kernel, p, &ut)?, tp * phi));
        errors.push(rel(weighted_lp_energy(&pb.weight, p, &ut)?, tp * psi).min(
            // Ψ_m may vanish for a sign-changing weight
            (weighted_lp_energy(&pb.weight, p, &ut)? - tp * psi).abs(),
        ));
        errors.push(rel(gagliardo_gradient(&pb.kernel, p, &u)?.dot(&u), p * phi));
        let euler_psi = weighted_lp_gradient(&pb.weight, p, &u)?.dot(&u);
        errors.push(rel(euler_psi, p * psi).min((euler_psi - p * psi).abs()));
    }
    let mut failures = errors.iter().filter(|&&e| !(e <= HOMOGENEITY_TOL)).count();
    let mut worst = errors.iter().cloned().fold(0.0, f64::max);

    let l1 = solve_lambda1(&pb.kernel, &pb.weight, p, solver)?;
    let l1_double = solve_lambda1(&pb.kernel, &pb.weight.scaled(2.0)?, p, solver)?;
    let scaling = rel(2.0 * l1_double.lambda, l1.lambda);
    if !(scaling <= WEIGHT_SCALING_TOL) || !l1.converged || !l1_double.converged {
        failures += 1;
    }
    worst = worst.max(scaling);
    Ok(SuiteRow {
        suite: "homogeneity".into(),
        checks: errors.len() + 1,
        failures,
        worst,
        detail: format!("energy scaling and Euler identity, 2·λ₁(2m) vs λ₁(m) {scaling:.3e}"),
    })
}

fn simplicity_row(pb: &Problem, p: f64, trials: usize, solver: &SolverConfig) -> Result<SuiteRow> {
    let (failures, worst, detail) = match check_simplicity(
        &pb.kernel, &pb.weight, p, solver, trials,
    ) {
        Ok(r) => {
            let lambda = r.lambdas[0];
            let spread = r.lambda_spread / lambda;
            let bad = usize::from(spread >= SIMPLICITY_LAMBDA_TOL)
                + usize::from(r.eigenfunction_distance >= SIMPLICITY_FUNCTION_TOL);
            (
                bad,
                spread.max(r.eigenfunction_distance),
                format!(
                    "λ₁ = {lambda:.10}, relative spread {spread:.3e}, eigenfunction distance {:.3e}",
                    r.eigenfunction_distance
                ),
            )
        }
        Err(e) => (1, f64::INFINITY, e.to_string()),
    };
    Ok(SuiteRow {
        suite: "simplicity".into(),
        checks: trials,
        failures,
        worst,
        detail,
    })
}

/// Runs every verification suite, prints the table and writes
/// `verify.json`.
///
/// Fails with [`RunStatus::CheckFailed`] naming each failing suite.
pub fn cmd_verify(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = load(config_path, opts)?;
    let mut pb = cfg.build()?;
    if opts.inject_asymmetry && pb.kernel.num_cells() > 1 {
        let w = pb.kernel.weight(0, 1);
        pb.kernel.inject_asymmetry(0, 1, INJECTED_DEFECT * w);
    }
    let dir = run_dir(config_path, &cfg, "verify", opts)?;
    let seed = cfg.solver.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = vec![symmetry_row(&pb.kernel)];
    rows.push(gradient_row(
        &pb,
        cfg.s,
        cfg.verify.gradient_points,
        &mut rng,
    )?);
    rows.push(homogeneity_row(
        &pb,
        cfg.p,
        cfg.verify.gradient_points,
        &cfg.solver,
        &mut rng,
    )?);
    rows.push(simplicity_row(
        &pb,
        cfg.p,
        cfg.verify.simplicity_trials,
        &cfg.solver,
    )?);
    for r in sweep_all(cfg.verify.samples, seed)? {
        rows.push(SuiteRow {
            suite: r.suite.to_string(),
            checks: r.samples,
            failures: r.violations,
            worst: r.worst.gap,
            detail: format!("gap ≥ {GAP_TOL:e}; worst at {}", r.worst.inputs_digest),
        });
    }

    let report = VerifyReport {
        manifest: manifest("verify", &cfg, &pb.domain),
        rows,
    };
    write_json(&dir.join("verify.json"), &report)?;
    write_json(&dir.join("manifest.json"), &report.manifest)?;
    print!("{}", report.table());

    let failed = report.failed_suites();
    let status = if failed.is_empty() {
        RunStatus::Ok
    } else {
        RunStatus::CheckFailed(failed)
    };
    Ok(RunOutcome {
        run_dir: dir,
        status,
    })
}
