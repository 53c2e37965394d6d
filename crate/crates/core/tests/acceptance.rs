//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines always
//! reach the output; any FAIL makes the target exit nonzero.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::time::{Duration, Instant};

use common::{
    dense_rayleigh, direct_energy, from_fn, interval, kernel, rel, s_for, standard_weights,
};
use fracp::experiments::{cmd_solve, RunOptions};
use fracp::inequality::{
    convexity_gap, lagrange_gap, nodal_loop_gap, nodal_loop_inputs, picone_gap, sweep_all, GAP_TOL,
};
use fracp::{
    assemble_kernel, check_simplicity, compute_monotonicity_constant, gagliardo_gradient,
    lambda2_upper_from_nodal, p2_oracle_spectrum, solve_lambda1, solve_lambda2_path, Domain,
    FractionalKernel, GridFunction, SolverConfig, WeightField,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];

type Criterion = (&'static str, fn() -> Verdict);

/// Outcome of one criterion: verdict plus a one-line summary of the worst
/// observed quantities.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new() -> Self {
        Self {
            pass: true,
            detail: String::new(),
        }
    }

    /// Records `ok`; failed checks are listed in the detail.
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            let _ = write!(self.detail, " [failed: {}]", what());
        }
    }

    fn note(&mut self, text: impl AsRef<str>) {
        let _ = write!(self.detail, " {}", text.as_ref());
    }
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

struct Spectrum {
    lambda1: f64,
    lambda2: f64,
    e1: GridFunction,
    e2: GridFunction,
    converged: bool,
}

fn spectrum(k: &FractionalKernel, m: &WeightField, p: f64) -> Spectrum {
    let e1 = solve_lambda1(k, m, p, &cfg()).unwrap();
    let l2 = solve_lambda2_path(k, m, p, &e1.u, &cfg()).unwrap();
    Spectrum {
        lambda1: e1.lambda,
        lambda2: l2.estimate,
        converged: e1.converged && l2.converged,
        e2: l2.eigenfunction().clone(),
        e1: e1.u,
    }
}

fn oracle(k: &FractionalKernel, m: &WeightField) -> (f64, f64, GridFunction) {
    let spec = p2_oracle_spectrum(k, m, 2).unwrap();
    (
        spec.pairs[0].lambda,
        spec.pairs[1].lambda,
        spec.pairs[1].u.clone(),
    )
}

// ---------------------------------------------------------------------------

fn lambda1_matches_exact_solver() -> Verdict {
    let mut v = Verdict::new();
    let mut worst = 0.0f64;
    let mut worst_dense = 0.0f64;
    let mut slowest = Duration::ZERO;
    for n in [32, 64] {
        let d = interval(n);
        let k = assemble_kernel(&d, 0.4, 2.0).unwrap();
        for (name, m) in standard_weights(&d, 0.4, 2.0) {
            let t = Instant::now();
            let e1 = solve_lambda1(&k, &m, 2.0, &cfg()).unwrap();
            let elapsed = t.elapsed();
            let exact = p2_oracle_spectrum(&k, &m, 1).unwrap().pairs[0].lambda;
            // independent dense assembly of the p = 2 form
            let (rayleigh, dense_residual) = dense_rayleigh(&k, &m, &e1.u);
            let r = rel(e1.lambda, exact);
            worst = worst.max(r);
            worst_dense = worst_dense.max(rel(rayleigh, exact)).max(dense_residual);
            slowest = slowest.max(elapsed);
            v.check(r < 1e-6, || {
                format!("n={n} {name}: {} vs {exact}", e1.lambda)
            });
            v.check(rel(rayleigh, exact) < 1e-6 && dense_residual < 1e-6, || {
                format!("n={n} {name}: dense quotient {rayleigh}, residual {dense_residual:e}")
            });
            v.check(elapsed < Duration::from_secs(30), || {
                format!("n={n} {name}: {elapsed:?}")
            });
        }
    }
    v.note(format!(
        "worst rel {worst:.2e} (tol 1e-6), dense check {worst_dense:.2e}, slowest {slowest:.2?}"
    ));
    v
}

fn lambda2_matches_exact_solver() -> Verdict {
    let mut v = Verdict::new();
    let mut worst_path = 0.0f64;
    let mut worst_loop = 0.0f64;
    let mut slowest = Duration::ZERO;
    for n in [32, 64] {
        let d = interval(n);
        let k = assemble_kernel(&d, 0.4, 2.0).unwrap();
        for (name, m) in standard_weights(&d, 0.4, 2.0) {
            let (_, exact, u2) = oracle(&k, &m);
            let t = Instant::now();
            let e1 = solve_lambda1(&k, &m, 2.0, &cfg()).unwrap();
            let l2 = solve_lambda2_path(&k, &m, 2.0, &e1.u, &cfg()).unwrap();
            slowest = slowest.max(t.elapsed());
            let upper = lambda2_upper_from_nodal(&k, &m, 2.0, &u2, cfg().omega_samples).unwrap();
            let (rp, rl) = (rel(l2.estimate, exact), rel(upper, exact));
            worst_path = worst_path.max(rp);
            worst_loop = worst_loop.max(rl);
            v.check(rp < 1e-3, || {
                format!("n={n} {name}: path {} vs {exact}", l2.estimate)
            });
            v.check(rl < 1e-6, || {
                format!("n={n} {name}: nodal loop {upper} vs {exact}")
            });
        }
    }
    v.note(format!(
        "path worst rel {worst_path:.2e} (tol 1e-3), nodal loop worst rel {worst_loop:.2e} (tol 1e-6), slowest {slowest:.2?}"
    ));
    v
}

fn eigenvalue_structure() -> Verdict {
    let mut v = Verdict::new();
    let d = interval(32);
    let mut min_gap = f64::INFINITY;
    let mut min_e1 = f64::INFINITY;
    let cases: Vec<(f64, &str, WeightField)> = EXPONENTS
        .iter()
        .flat_map(|&p| {
            standard_weights(&d, s_for(p), p)
                .into_iter()
                .map(move |(n, m)| (p, n, m))
        })
        .collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|(p, name, m)| {
            let k = kernel(&d, *p);
            (*p, *name, spectrum(&k, m, *p))
        })
        .collect();
    for (p, name, s) in results {
        let gap = (s.lambda2 - s.lambda1) / s.lambda1;
        let e1_min = s.e1.iter().cloned().fold(f64::INFINITY, f64::min);
        min_gap = min_gap.min(gap);
        min_e1 = min_e1.min(e1_min);
        v.check(s.converged, || format!("p={p} {name}: not converged"));
        v.check(s.lambda1 > 0.0, || {
            format!("p={p} {name}: λ₁ = {}", s.lambda1)
        });
        v.check(gap > 1e-6, || format!("p={p} {name}: relative gap {gap:e}"));
        v.check(e1_min > 0.0, || {
            format!("p={p} {name}: first eigenfunction min {e1_min:e}")
        });
        v.check(s.e2.is_nodal(), || {
            format!("p={p} {name}: path maximum is one-signed")
        });
    }
    v.note(format!(
        "9 cases, min (λ₂-λ₁)/λ₁ {min_gap:.3e} (tol 1e-6), min first eigenfunction entry {min_e1:.3e}"
    ));
    v
}

fn first_eigenvalue_is_simple() -> Verdict {
    let mut v = Verdict::new();
    let d = interval(32);
    let mut worst_spread = 0.0f64;
    let mut worst_dist = 0.0f64;
    for p in EXPONENTS {
        let k = kernel(&d, p);
        for (name, m) in standard_weights(&d, s_for(p), p).into_iter().take(2) {
            let r = check_simplicity(&k, &m, p, &cfg().with_seed(11), 5).unwrap();
            let spread = r.lambda_spread / r.lambdas[0];
            worst_spread = worst_spread.max(spread);
            worst_dist = worst_dist.max(r.eigenfunction_distance);
            v.check(spread < 1e-8, || format!("p={p} {name}: spread {spread:e}"));
            v.check(r.eigenfunction_distance < 1e-4, || {
                format!("p={p} {name}: distance {:e}", r.eigenfunction_distance)
            });
        }
    }
    v.note(format!(
        "5 seeds each, worst relative spread {worst_spread:.2e} (tol 1e-8), worst eigenfunction distance {worst_dist:.2e} (tol 1e-4)"
    ));
    v
}

fn eigenvalues_scale_inversely_with_weight() -> Verdict {
    let mut v = Verdict::new();
    let d = interval(32);
    let factors = [0.5, 2.0, 10.0];
    let mut worst_nl = 0.0f64;
    let mut worst_exact = 0.0f64;
    for p in EXPONENTS {
        let k = kernel(&d, p);
        let m = WeightField::step(&d, 0, 0.6, 1.0, -0.5).unwrap();
        let base = spectrum(&k, &m, p);
        let scaled: Vec<(f64, Spectrum)> = factors
            .par_iter()
            .map(|&t| (t, spectrum(&k, &m.scaled(t).unwrap(), p)))
            .collect();
        for (t, s) in scaled {
            for (kk, a, b) in [(1, s.lambda1, base.lambda1), (2, s.lambda2, base.lambda2)] {
                let r = rel(a * t, b);
                worst_nl = worst_nl.max(r);
                v.check(r < 1e-6, || format!("p={p} t={t} λ{kk}: {} vs {b}", a * t));
            }
        }
    }
    let k = kernel(&d, 2.0);
    for (name, m) in standard_weights(&d, 0.4, 2.0) {
        let (a1, a2, _) = oracle(&k, &m);
        for t in factors {
            let (b1, b2, _) = oracle(&k, &m.scaled(t).unwrap());
            for (kk, a, b) in [(1, a1, b1), (2, a2, b2)] {
                let r = rel(b * t, a);
                worst_exact = worst_exact.max(r);
                v.check(r < 1e-10, || format!("exact {name} t={t} λ{kk}: rel {r:e}"));
            }
        }
    }
    v.note(format!(
        "t in {{0.5, 2, 10}}, k in {{1, 2}}: nonlinear worst rel {worst_nl:.2e} (tol 1e-6), exact worst rel {worst_exact:.2e} (tol 1e-10)"
    ));
    v
}

/// Ordered weight pairs `m ≤ m̃`: three with equality on part of the domain,
/// three with `m < m̃` on every cell.
fn weight_pairs(d: &Domain) -> (Vec<(&'static str, WeightField, WeightField)>, usize) {
    let one = WeightField::constant(d, 1.0).unwrap();
    let sign = WeightField::step(d, 0, 0.6, 1.0, -0.5).unwrap();
    let partial = vec![
        (
            "1 vs 1|2 step",
            one.clone(),
            WeightField::step(d, 0, 0.5, 1.0, 2.0).unwrap(),
        ),
        (
            "sign step vs 1|0 step",
            sign.clone(),
            WeightField::step(d, 0, 0.6, 1.0, 0.0).unwrap(),
        ),
        (
            "1 vs 1 + left bump",
            one.clone(),
            from_fn(d, |x| {
                if x < 0.3 {
                    1.0 + (std::f64::consts::PI * x / 0.3).sin()
                } else {
                    1.0
                }
            }),
        ),
    ];
    let strict = vec![
        (
            "1 vs 2",
            one.clone(),
            WeightField::constant(d, 2.0).unwrap(),
        ),
        (
            "1 vs 1.5 + bump",
            one,
            from_fn(d, |x| 1.5 + 0.3 * (-(x - 0.3) * (x - 0.3) / 0.02).exp()),
        ),
        (
            "sign step vs raised sign step",
            sign,
            WeightField::step(d, 0, 0.6, 1.2, -0.3).unwrap(),
        ),
    ];
    let split = partial.len();
    (partial.into_iter().chain(strict).collect(), split)
}

fn spectra_decrease_with_weight() -> Verdict {
    let mut v = Verdict::new();
    let d = interval(32);
    let (pairs, split) = weight_pairs(&d);
    let mut min_first = f64::INFINITY;
    let mut min_second = f64::INFINITY;
    let mut worst_order = f64::INFINITY;
    let jobs: Vec<(f64, usize)> = EXPONENTS
        .iter()
        .flat_map(|&p| (0..pairs.len()).map(move |i| (p, i)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(p, i)| {
            let k = kernel(&d, p);
            let (_, m, mt) = &pairs[i];
            let exact = (p == 2.0).then(|| (oracle(&k, m), oracle(&k, mt)));
            (p, i, spectrum(&k, m, p), spectrum(&k, mt, p), exact)
        })
        .collect();
    for (p, i, a, b, exact) in results {
        let name = pairs[i].0;
        v.check(a.converged && b.converged, || {
            format!("p={p} {name}: not converged")
        });
        let (d1, d2) = (a.lambda1 - b.lambda1, a.lambda2 - b.lambda2);
        worst_order = worst_order.min(d1).min(d2);
        v.check(d1 >= -1e-8 && d2 >= -1e-8, || {
            format!("p={p} {name}: ordering {d1:e}, {d2:e}")
        });
        min_first = min_first.min(d1 / a.lambda1);
        v.check(d1 > 1e-6 * a.lambda1, || {
            format!("p={p} {name}: λ₁ margin {d1:e}")
        });
        if i >= split {
            min_second = min_second.min(d2 / a.lambda2);
            v.check(d2 > 1e-6 * a.lambda2, || {
                format!("p={p} {name}: λ₂ margin {d2:e}")
            });
        }
        if let Some(((a1, a2, _), (b1, b2, _))) = exact {
            v.check(a1 - b1 > 1e-6 * a1 && a2 - b2 >= -1e-10, || {
                format!("exact {name}: {a1} {b1} {a2} {b2}")
            });
            if i >= split {
                v.check(a2 - b2 > 1e-6 * a2, || {
                    format!("exact {name}: λ₂ {a2} vs {b2}")
                });
            }
            for (x, y) in [
                (a.lambda1, a1),
                (a.lambda2, a2),
                (b.lambda1, b1),
                (b.lambda2, b2),
            ] {
                v.check(rel(x, y) < 1e-6, || {
                    format!("exact {name}: nonlinear {x} vs {y}")
                });
            }
        }
    }
    v.note(format!(
        "6 pairs x 3 exponents: min λ_k(m)-λ_k(m̃) {worst_order:.3e} (tol -1e-8), min relative λ₁ drop {min_first:.3e}, min relative λ₂ drop on strict pairs {min_second:.3e} (tol 1e-6)"
    ));
    v
}

fn monotonicity_constant() -> Verdict {
    let mut v = Verdict::new();
    let d = interval(32);
    let (pairs, split) = weight_pairs(&d);
    let mut worst_double = 0.0f64;
    let mut min_excess = f64::INFINITY;
    let mut worst_bound = f64::NEG_INFINITY;
    let jobs: Vec<(f64, Option<usize>)> = EXPONENTS
        .iter()
        .flat_map(|&p| {
            std::iter::once((p, None)).chain((split..pairs.len()).map(move |i| (p, Some(i))))
        })
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(p, i)| {
            let k = kernel(&d, p);
            let (m, mt) = match i {
                Some(i) => (pairs[i].1.clone(), pairs[i].2.clone()),
                None => {
                    // 2m ≥ m needs m ≥ 0
                    let m = WeightField::step(&d, 0, 0.6, 1.0, 0.5).unwrap();
                    let mt = m.scaled(2.0).unwrap();
                    (m, mt)
                }
            };
            let a = spectrum(&k, &m, p);
            let c = compute_monotonicity_constant(&k, &m, &mt, p, a.lambda2 + 1.0, &cfg()).unwrap();
            let b = i.map(|_| spectrum(&k, &mt, p));
            (p, i, a, c.value, b)
        })
        .collect();
    for (p, i, a, c, b) in results {
        match (i, b) {
            (None, _) => {
                worst_double = worst_double.max((c - 2.0).abs());
                v.check((c - 2.0).abs() < 1e-8, || {
                    format!("p={p} doubled weight: C = {c}")
                });
            }
            (Some(i), Some(b)) => {
                let name = pairs[i].0;
                min_excess = min_excess.min(c - 1.0);
                v.check(c > 1.0 + 1e-6, || format!("p={p} {name}: C = {c}"));
                let bound = a.lambda2 / c;
                let r = (b.lambda2 - bound) / bound;
                worst_bound = worst_bound.max(r);
                v.check(r <= 1e-3, || {
                    format!("p={p} {name}: λ₂(m̃) {} vs λ₂(m)/C {bound}", b.lambda2)
                });
            }
            _ => unreachable!(),
        }
    }
    v.note(format!(
        "doubled weight |C-2| {worst_double:.2e} (tol 1e-8), min C-1 on strict pairs {min_excess:.3e} (tol 1e-6), max (λ₂(m̃) - λ₂(m)/C)/(λ₂(m)/C) {worst_bound:.3e} (tol 1e-3)"
    ));
    v
}

fn inequality_sweeps() -> Verdict {
    let mut v = Verdict::new();
    let t = Instant::now();
    let reports = sweep_all(10_000, 2024).unwrap();
    let elapsed = t.elapsed();
    let mut worst = f64::INFINITY;
    for r in &reports {
        worst = worst.min(r.worst.gap);
        v.check(r.samples >= 10_000, || {
            format!("{}: {} samples", r.suite, r.samples)
        });
        v.check(r.passed() && r.worst.gap >= GAP_TOL, || {
            format!(
                "{}: worst {:e} at {}",
                r.suite, r.worst.gap, r.worst.inputs_digest
            )
        });
    }
    v.check(elapsed < Duration::from_secs(60), || {
        format!("runtime {elapsed:?}")
    });

    // pointwise gaps against formulas written out here
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut formula_err = 0.0f64;
    for _ in 0..2000 {
        let p: f64 = rng.gen_range(1.1..4.0);
        let (a, b): (f64, f64) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
        let conv = 2f64.powf(p - 1.0) * (a + b).powf(p) - a.powf(p) - b.powf(p);
        formula_err = formula_err
            .max((convexity_gap(a, b, p).unwrap().gap - conv).abs() / conv.abs().max(1.0));
        let (a, b) = (a + 0.1, b + 0.1);
        let lag = p * a.max(b).powf(p - 1.0) * (a - b).abs() - (a.powf(p) - b.powf(p)).abs();
        formula_err =
            formula_err.max((lagrange_gap(a, b, p).unwrap().gap - lag).abs() / lag.abs().max(1.0));
        let (ax, ay, bx, by, e): (f64, f64, f64, f64, f64) =
            (a, b, rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0), 0.1);
        let phi = |t: f64| t.abs().powf(p - 2.0) * t;
        let pic = (ax - ay).abs().powf(p)
            - phi(bx - by)
                * (ax.powf(p) / (bx + e).powf(p - 1.0) - ay.powf(p) / (by + e).powf(p - 1.0));
        formula_err = formula_err
            .max((picone_gap(ax, ay, bx, by, p, e).unwrap().gap - pic).abs() / pic.abs().max(1.0));
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (w1, w2) = (th.cos(), th.sin());
        let (ux, uy): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (uu, vv) = nodal_loop_inputs(ux, uy);
        let expected = (ux.max(0.0) - uy.max(0.0), (-ux).max(0.0) - (-uy).max(0.0));
        v.check((uu, vv) == expected, || "split inputs".into());
        let s5 = phi(w1 * uu - w1 * vv) * w1 * uu
            - phi(w2 * uu - w2 * vv) * w2 * vv
            - (w1 * uu - w2 * vv).abs().powf(p);
        formula_err = formula_err
            .max((nodal_loop_gap(uu, vv, (w1, w2), p).unwrap().gap - s5).abs() / s5.abs().max(1.0));
    }
    v.check(formula_err < 1e-12, || {
        format!("gap formulas differ by {formula_err:e}")
    });
    v.note(format!(
        "{} suites x 10^4 samples, worst gap {worst:.3e} (tol -1e-10), runtime {elapsed:.2?} (limit 60 s), formula agreement {formula_err:.1e}",
        reports.len()
    ));
    v
}

/// Entries and pairwise differences bounded away from zero, where the
/// energies are smooth for every `p > 1`.
fn separated_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut levels: Vec<f64> = (0..2 * n)
        .map(|k| -1.0 + (2 * k + 1) as f64 / (2 * n) as f64)
        .collect();
    levels.shuffle(rng);
    let jitter = 0.2 / (2 * n) as f64;
    levels[..n]
        .iter()
        .map(|v| v + rng.gen_range(-jitter..jitter))
        .collect()
}

fn gradients_match_finite_differences() -> Verdict {
    let mut v = Verdict::new();
    let d = interval(32);
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_phi = 0.0f64;
    let mut worst_psi = 0.0f64;
    for p in EXPONENTS {
        let k = kernel(&d, p);
        let m = WeightField::step(&d, 0, 0.6, 1.0, -0.5).unwrap();
        let psi = |u: &[f64]| -> f64 {
            u.iter()
                .zip(m.values())
                .map(|(x, w)| w * x.abs().powf(p))
                .sum::<f64>()
                * m.cell_volume()
        };
        for _ in 0..20 {
            let u = separated_point(&mut rng, d.num_cells());
            let gu = GridFunction::new(u.clone());
            let g_phi = gagliardo_gradient(&k, p, &gu).unwrap();
            let g_psi = fracp::weighted_lp_gradient(&m, p, &gu).unwrap();
            let mut e_phi = 0.0f64;
            let mut e_psi = 0.0f64;
            for i in 0..u.len() {
                let (mut up, mut um) = (u.clone(), u.clone());
                up[i] += h;
                um[i] -= h;
                let fd = (direct_energy(&k, p, &up) - direct_energy(&k, p, &um)) / (2.0 * h);
                e_phi = e_phi.max((fd - g_phi[i]).abs());
                let fd = (psi(&up) - psi(&um)) / (2.0 * h);
                e_psi = e_psi.max((fd - g_psi[i]).abs());
            }
            let (e_phi, e_psi) = (e_phi / g_phi.max_norm(), e_psi / g_psi.max_norm());
            worst_phi = worst_phi.max(e_phi);
            worst_psi = worst_psi.max(e_psi);
            v.check(e_phi < 1e-6, || format!("p={p}: Φ' error {e_phi:e}"));
            v.check(e_psi < 1e-6, || format!("p={p}: Ψ' error {e_psi:e}"));
        }
    }
    v.note(format!(
        "20 points x 3 exponents, step 1e-5: worst error relative to max|g| Φ' {worst_phi:.2e}, Ψ' {worst_psi:.2e} (tol 1e-6)"
    ));
    v
}

fn solve_runs_are_reproducible() -> Verdict {
    let mut v = Verdict::new();
    let tmp = tempfile::TempDir::new().unwrap();
    let config = tmp.path().join("repro.toml");
    fs::write(
        &config,
        "s = 0.4\np = 1.5\n\n[domain]\nshape = \"interval\"\nlo = [0.0]\nhi = [1.0]\ncells = [32]\n\n\
         [weight]\nkind = \"step\"\nthreshold = 0.6\nbelow = 1.0\nabove = -0.5\n\n[solver]\nseed = 17\n",
    )
    .unwrap();
    let mut bundles = Vec::new();
    for name in ["first", "second"] {
        let opts = RunOptions {
            out: Some(tmp.path().join(name)),
            ..RunOptions::default()
        };
        let outcome = cmd_solve(&config, &opts).unwrap();
        v.check(outcome.status.exit_code() == 0, || {
            format!("{name} run: {:?}", outcome.status)
        });
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&outcome.run_dir)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| {
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        bundles.push(files);
    }
    let json_files = bundles[0]
        .iter()
        .filter(|(n, _)| n.ends_with(".json"))
        .count();
    v.check(json_files >= 2, || format!("only {json_files} JSON files"));
    v.check(bundles[0] == bundles[1], || "run directories differ".into());
    v.note(format!(
        "two runs, same config and seed: {} files compared byte for byte ({json_files} JSON)",
        bundles[0].len()
    ));
    v
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "first eigenvalue matches the exact p=2 solver",
            lambda1_matches_exact_solver,
        ),
        (
            "second eigenvalue and nodal-loop bound match the exact p=2 solver",
            lambda2_matches_exact_solver,
        ),
        (
            "positivity, gap, one-signed first and sign-changing second eigenfunction",
            eigenvalue_structure,
        ),
        (
            "first eigenvalue is simple across seeds",
            first_eigenvalue_is_simple,
        ),
        (
            "eigenvalues scale inversely with the weight",
            eigenvalues_scale_inversely_with_weight,
        ),
        (
            "eigenvalues decrease as the weight increases",
            spectra_decrease_with_weight,
        ),
        ("monotonicity constant", monotonicity_constant),
        ("inequality sweeps", inequality_sweeps),
        (
            "gradients match finite differences",
            gradients_match_finite_differences,
        ),
        ("reruns are byte-identical", solve_runs_are_reproducible),
    ];
    let results: Vec<(Verdict, Duration)> = criteria
        .par_iter()
        .map(|(_, f)| {
            let t = Instant::now();
            let r = f();
            (r, t.elapsed())
        })
        .collect();
    let mut failed = 0;
    for (i, ((name, _), (r, elapsed))) in criteria.iter().zip(&results).enumerate() {
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {tag}: {name} ({elapsed:.1?}){}",
            i + 1,
            r.detail
        );
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
