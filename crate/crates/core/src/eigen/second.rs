use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::first::POLISH_SWEEPS;
use super::polish::polish;
use super::{check_sizes, normalize_to_sphere, rounding_slack, SolverConfig, STALL_WINDOW};
use crate::energy::{
    gagliardo_energy, gagliardo_gradient, residual_norm, weighted_lp_energy, weighted_lp_gradient,
    GridFunction, WeightField,
};
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;

const SPLIT_ATTEMPTS: usize = 100;
const ARMIJO_C: f64 = 1e-4;
/// Accepted iterations between arc-length redistributions.
const REDISTRIBUTE_EVERY: usize = 10;
const STAGE_ITER: usize = 400;
const CIRCLE_TOL: f64 = 1e-12;
const SEGMENT_SAMPLES: usize = 8;
/// A converged saddle replaces the path when its energy is within this
/// relative margin of the path maximum.
const SADDLE_SLACK: f64 = 1e-4;

/// A discretized odd loop `f: S¹ → {Ψ_m = 1}`.
///
/// Point `k` is `f(cos θ_k, sin θ_k)` with `θ_k = πk/K`; the other half of
/// the loop is `f(-ω) = -f(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPath {
    points: Vec<GridFunction>,
}

impl SymmetricPath {
    pub fn new(points: Vec<GridFunction>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter("a path needs at least 2 points".into()));
        }
        let n = points[0].len();
        if let Some(bad) = points.iter().find(|f| f.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[GridFunction] {
        &self.points
    }

    pub fn theta(&self, k: usize) -> f64 {
        PI * k as f64 / self.len() as f64
    }

    pub fn omega(&self, k: usize) -> (f64, f64) {
        let t = self.theta(k);
        (t.cos(), t.sin())
    }

    /// Point `k` of the full loop, for any integer `k`; period `2K`.
    pub fn loop_point(&self, k: i64) -> GridFunction {
        let len = self.len() as i64;
        let r = k.rem_euclid(2 * len);
        if r < len {
            self.points[r as usize].clone()
        } else {
            self.points[(r - len) as usize].scaled(-1.0)
        }
    }

    /// Largest Euclidean distance between consecutive loop points, including
    /// the seam `f_{K-1} → -f_0`.
    pub fn max_adjacent_distance(&self) -> f64 {
        let len = self.len() as i64;
        (0..len)
            .map(|k| self.loop_point(k + 1).sub(&self.loop_point(k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn energies(&self, kernel: &FractionalKernel, p: f64) -> Result<Vec<f64>> {
        self.points
            .par_iter()
            .map(|f| gagliardo_energy(kernel, p, f))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda2Result {
    /// `max_k Φ(f_k)` over the final path.
    pub estimate: f64,
    pub path: SymmetricPath,
    /// Index of the path point attaining the estimate.
    pub max_index: usize,
    /// Eigen-residual at the maximizing point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Lambda2Result {
    /// The maximizing path point, an approximate second eigenfunction.
    pub fn eigenfunction(&self) -> &GridFunction {
        &self.path.points[self.max_index]
    }
}

/// Energy and sphere gradient `Φ' - Φ Ψ'_m` at a sphere point.
struct PointState {
    energy: f64,
    grad: GridFunction,
    residual: f64,
}

fn evaluate(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    u: &GridFunction,
) -> Result<PointState> {
    let energy = gagliardo_energy(kernel, p, u)?;
    let dphi = gagliardo_gradient(kernel, p, u)?;
    let dpsi = weighted_lp_gradient(weight, p, u)?;
    let grad = dphi.add_scaled(-energy, &dpsi);
    let residual = grad.norm() / dphi.norm().max(f64::MIN_POSITIVE);
    Ok(PointState {
        energy,
        grad,
        residual,
    })
}

fn evaluate_all(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    points: &[GridFunction],
) -> Result<Vec<PointState>> {
    points
        .par_iter()
        .map(|f| evaluate(kernel, weight, p, f))
        .collect()
}

fn unit(v: GridFunction) -> GridFunction {
    let n = v.norm();
    if n > 0.0 {
        v.scaled(1.0 / n)
    } else {
        v
    }
}

/// Sign pattern splitting the support of `e1` into two parts of equal
/// `Ψ_m`-mass. Cells are ordered by which of two random cells they are
/// closer to, with distance read off the monotone kernel weights.
fn balanced_split(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    e1: &GridFunction,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    let n = kernel.num_cells();
    let alpha = kernel.exponent();
    let vol = weight.cell_volume();
    let dist = |c: usize, j: usize| -> f64 {
        if c == j {
            0.0
        } else {
            kernel.weight(c, j).powf(-1.0 / alpha)
        }
    };
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let score: Vec<f64> = (0..n).map(|j| dist(b, j) - dist(a, j)).collect();
    order.sort_by(|&i, &j| score[j].total_cmp(&score[i]).then(i.cmp(&j)));

    let mass: Vec<f64> = (0..n)
        .map(|i| weight.values()[i] * e1[i].abs().powf(p) * vol)
        .collect();
    let total: f64 = mass.iter().sum();
    let mut cum = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for (pos, &i) in order.iter().enumerate().take(n - 1) {
        cum += mass[i];
        let rest = total - cum;
        if cum > 0.0 && rest > 0.0 {
            let score = (cum - 0.5 * total).abs();
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((pos, score));
            }
        }
    }
    let (cut, _) = best?;
    let mut sigma = vec![-1.0; n];
    for &i in &order[..=cut] {
        sigma[i] = 1.0;
    }
    Some(sigma)
}

/// Half loop from `e1` through `e1 ⊙ σ` to `-e1`.
fn initial_path(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    e1: &GridFunction,
    config: &SolverConfig,
) -> Result<SymmetricPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.path_points;
    for _ in 0..SPLIT_ATTEMPTS {
        let Some(sigma) = balanced_split(kernel, weight, p, e1, &mut rng) else {
            continue;
        };
        let w = GridFunction::new(e1.iter().zip(&sigma).map(|(a, s)| a * s).collect());
        let points: Result<Vec<GridFunction>> = (0..k)
            .map(|j| {
                let t = PI * j as f64 / k as f64;
                let raw = e1.combine(t.cos(), t.sin(), &w);
                normalize_to_sphere(&raw, weight, p).or_else(|_| pull_toward(&raw, e1, weight, p))
            })
            .collect();
        if let Ok(points) = points {
            return SymmetricPath::new(points);
        }
    }
    Err(Error::Solver(format!(
        "no normalizable sign-changing path after {SPLIT_ATTEMPTS} attempts"
    )))
}

/// Adds growing multiples of `e1` until the sum is normalizable.
fn pull_toward(
    raw: &GridFunction,
    e1: &GridFunction,
    weight: &WeightField,
    p: f64,
) -> Result<GridFunction> {
    let scale = raw.norm() / e1.norm().max(f64::MIN_POSITIVE);
    let mut eps = 1e-3 * scale;
    for _ in 0..SPLIT_ATTEMPTS {
        let trial = raw.add_scaled(eps, e1);
        if let Ok(v) = normalize_to_sphere(&trial, weight, p) {
            if v.is_nodal() {
                return Ok(v);
            }
        }
        eps *= 1.5;
    }
    Err(Error::NotNormalizable(0.0))
}

/// Unit tangents `(f_{k+1} - f_{k-1})` of the odd loop.
fn tangents(path: &SymmetricPath) -> Vec<GridFunction> {
    (0..path.len() as i64)
        .map(|k| unit(path.loop_point(k + 1).sub(&path.loop_point(k - 1))))
        .collect()
}

/// Redistributes points to equal arc length along the piecewise-linear half
/// loop `f_0, ..., f_{K-1}, -f_0`, keeping `f_0`.
fn redistribute(path: &SymmetricPath, weight: &WeightField, p: f64) -> Result<SymmetricPath> {
    let k = path.len();
    let nodes: Vec<GridFunction> = (0..=k as i64).map(|j| path.loop_point(j)).collect();
    let mut arc = vec![0.0];
    for j in 0..k {
        let l = nodes[j + 1].sub(&nodes[j]).norm();
        arc.push(arc[j] + l);
    }
    let total = arc[k];
    if !(total > 0.0) {
        return Ok(path.clone());
    }
    let mut out = Vec::with_capacity(k);
    out.push(nodes[0].clone());
    let mut seg = 0;
    for j in 1..k {
        let target = total * j as f64 / k as f64;
        while seg + 1 < k && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let t = if len > 0.0 {
            (target - arc[seg]) / len
        } else {
            0.0
        };
        let raw = nodes[seg].combine(1.0 - t, t, &nodes[seg + 1]);
        match normalize_to_sphere(&raw, weight, p) {
            Ok(v) => out.push(v),
            // interpolant left the sphere's cone; keep the old point
            Err(_) => out.push(path.points[j].clone()),
        }
    }
    SymmetricPath::new(out)
}

fn lse(energies: &[f64], beta: f64, scale: f64) -> (f64, Vec<f64>) {
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = energies
        .iter()
        .map(|&e| (beta * (e - top) / scale).exp())
        .collect();
    let z: f64 = ex.iter().sum();
    let value = top + scale / beta * z.ln();
    (value, ex.into_iter().map(|e| e / z).collect())
}

/// One temperature stage of the smoothed-maximum descent.
fn lse_stage(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    mut path: SymmetricPath,
    beta: f64,
    config: &SolverConfig,
) -> Result<(SymmetricPath, usize)> {
    let mut states = evaluate_all(kernel, weight, p, &path.points)?;
    let scale = states.iter().map(|s| s.energy).fold(0.0, f64::max);
    let mut step = config.step_init;
    let mut accepted = 0;
    let mut history = Vec::new();

    for iter in 0..STAGE_ITER {
        let energies: Vec<f64> = states.iter().map(|s| s.energy).collect();
        let (value, w) = lse(&energies, beta, scale);
        history.push(value);
        if history.len() > 20 {
            let old = history[history.len() - 21];
            if old - value <= 1e-9 * value.abs() {
                return Ok((path, iter));
            }
        }

        let tau = tangents(&path);
        let dirs: Vec<GridFunction> = states
            .iter()
            .zip(&tau)
            .zip(&w)
            .map(|((s, t), &wk)| s.grad.add_scaled(-s.grad.dot(t), t).scaled(wk))
            .collect();
        let slope: f64 = dirs.iter().map(|d| d.dot(d)).sum();
        if !(slope > 0.0) {
            return Ok((path, iter));
        }
        let cap = dirs
            .iter()
            .zip(&path.points)
            .map(|(d, f)| 0.5 * f.norm() / d.norm().max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        let base = path.points[0].norm() / dirs.iter().map(|d| d.norm()).fold(0.0, f64::max);
        let mut alpha = (step * base).min(cap);

        let mut next = None;
        for _ in 0..40 {
            let trial: Result<Vec<GridFunction>> = path
                .points
                .iter()
                .zip(&dirs)
                .map(|(f, d)| normalize_to_sphere(&f.add_scaled(-alpha, d), weight, p))
                .collect();
            if let Ok(points) = trial {
                let new_states = evaluate_all(kernel, weight, p, &points)?;
                let e: Vec<f64> = new_states.iter().map(|s| s.energy).collect();
                let (v, _) = lse(&e, beta, scale);
                if v <= value - ARMIJO_C * alpha * slope + rounding_slack(value) {
                    next = Some((points, new_states));
                    break;
                }
            }
            alpha *= config.armijo_factor;
        }
        let Some((points, new_states)) = next else {
            return Ok((path, iter));
        };
        step = (alpha / base) * 2.0;
        path = SymmetricPath::new(points)?;
        states = new_states;
        accepted += 1;
        if accepted % REDISTRIBUTE_EVERY == 0 {
            path = redistribute(&path, weight, p)?;
            states = evaluate_all(kernel, weight, p, &path.points)?;
        }
    }
    Ok((path, STAGE_ITER))
}

/// Rotates the loop so that point `r` becomes point 0.
fn rotate(path: &SymmetricPath, r: usize) -> SymmetricPath {
    let points = (0..path.len() as i64)
        .map(|k| path.loop_point(k + r as i64))
        .collect();
    SymmetricPath { points }
}

/// Climbing-image iteration: ascends along the loop tangent and descends in
/// every other direction, converging to the saddle the loop crosses.
fn climb(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    path: &SymmetricPath,
    config: &SolverConfig,
) -> Result<(GridFunction, f64, usize)> {
    let next = path.loop_point(1);
    let prev = path.loop_point(-1);
    let mut u = path.points[0].clone();
    let mut st = evaluate(kernel, weight, p, &u)?;
    let mut best = (u.clone(), st.residual);
    let mut prev_step: Option<(GridFunction, GridFunction)> = None;
    let mut alpha = 0.1 * config.step_init * u.norm() / st.grad.norm().max(f64::MIN_POSITIVE);

    let mut window_start = st.residual;
    let mut iter = 0;
    while iter < config.max_iter && st.residual >= config.tol_residual {
        iter += 1;
        let t = unit(next.sub(&u)).add_scaled(1.0, &unit(u.sub(&prev)));
        let t = unit(t.add_scaled(-t.dot(&u) / u.dot(&u), &u));
        let d = st.grad.add_scaled(-2.0 * st.grad.dot(&t), &t);

        if let Some((u_old, d_old)) = &prev_step {
            let s = u.sub(u_old);
            let y = d.sub(d_old);
            let sy = s.dot(&y);
            if sy > 0.0 {
                alpha = s.dot(&s) / sy;
            }
        }
        alpha = alpha.min(0.2 * u.norm() / d.norm().max(f64::MIN_POSITIVE));

        let mut moved = None;
        for _ in 0..40 {
            if let Ok(v) = normalize_to_sphere(&u.add_scaled(-alpha, &d), weight, p) {
                moved = Some(v);
                break;
            }
            alpha *= 0.5;
        }
        let Some(v) = moved else { break };
        prev_step = Some((std::mem::replace(&mut u, v), d));
        st = evaluate(kernel, weight, p, &u)?;
        if iter % STALL_WINDOW == 0 {
            if best.1 > 0.5 * window_start {
                break;
            }
            window_start = best.1;
        }
        if st.residual < best.1 {
            best = (u.clone(), st.residual);
        } else if st.residual > 1e3 * best.1 {
            // diverging: restart from the best point with a shorter step
            u = best.0.clone();
            st = evaluate(kernel, weight, p, &u)?;
            prev_step = None;
            alpha *= 0.1;
        }
    }
    Ok((best.0, best.1, iter))
}

/// Point `f(ω)` of the loop spanned by the positive and negative parts.
struct NodalLoop {
    plus: GridFunction,
    minus: GridFunction,
    psi_plus: f64,
    psi_minus: f64,
    p: f64,
}

impl NodalLoop {
    fn new(weight: &WeightField, p: f64, u: &GridFunction) -> Result<Self> {
        let plus = u.positive_part();
        let minus = u.negative_part();
        if plus.is_zero() || minus.is_zero() {
            return Err(Error::Parameter("function does not change sign".into()));
        }
        let psi_plus = weighted_lp_energy(weight, p, &plus)?;
        let psi_minus = weighted_lp_energy(weight, p, &minus)?;
        if !(psi_plus > 0.0 && psi_minus > 0.0) {
            return Err(Error::Parameter(format!(
                "positive and negative parts need positive weighted mass, got {psi_plus} and {psi_minus}"
            )));
        }
        Ok(Self {
            plus,
            minus,
            psi_plus,
            psi_minus,
            p,
        })
    }

    fn at(&self, w1: f64, w2: f64) -> GridFunction {
        let k = (w1.abs().powf(self.p) * self.psi_plus + w2.abs().powf(self.p) * self.psi_minus)
            .powf(1.0 / self.p);
        self.plus.combine(w1 / k, -w2 / k, &self.minus)
    }
}

/// `Φ(f(ω))` for `f(ω) = (ω₁u⁺ - ω₂u⁻)/K(ω)`, the sphere point spanned by the
/// positive and negative parts of a nodal `u`.
pub fn nodal_loop_energy(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    u: &GridFunction,
    omega: (f64, f64),
) -> Result<f64> {
    check_sizes(kernel, weight)?;
    let (w1, w2) = omega;
    if ((w1 * w1 + w2 * w2) - 1.0).abs() > CIRCLE_TOL {
        return Err(Error::Parameter(format!(
            "({w1}, {w2}) is not on the unit circle"
        )));
    }
    let lp = NodalLoop::new(weight, p, u)?;
    gagliardo_energy(kernel, p, &lp.at(w1, w2))
}

/// Maximum of `Φ` over the loop spanned by the positive and negative parts of
/// `u_nodal`, sampled at `omega_samples` equally spaced angles starting at 0.
///
/// For an eigenfunction above `λ₁` the loop stays below its eigenvalue and
/// passes through `u_nodal / Ψ_m(u_nodal)^{1/p}` at angle `π/4`.
pub fn lambda2_upper_from_nodal(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    u_nodal: &GridFunction,
    omega_samples: usize,
) -> Result<f64> {
    check_sizes(kernel, weight)?;
    if omega_samples == 0 {
        return Err(Error::Parameter("omega_samples must be positive".into()));
    }
    let lp = NodalLoop::new(weight, p, u_nodal)?;
    let values: Vec<f64> = (0..omega_samples)
        .into_par_iter()
        .map(|j| {
            let t = 2.0 * PI * j as f64 / omega_samples as f64;
            gagliardo_energy(kernel, p, &lp.at(t.cos(), t.sin()))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// The nodal loop of `u` as a stored path, shifted so that point 0 is `u`.
fn nodal_path(weight: &WeightField, p: f64, u: &GridFunction, k: usize) -> Result<SymmetricPath> {
    let lp = NodalLoop::new(weight, p, u)?;
    let points = (0..k)
        .map(|j| {
            let t = PI / 4.0 + PI * j as f64 / k as f64;
            lp.at(t.cos(), t.sin())
        })
        .collect();
    SymmetricPath::new(points)
}

/// Maximum of `Φ` along the piecewise-linear loop through the stored
/// points, each segment sampled at `SEGMENT_SAMPLES` normalized interpolants.
fn refined_max(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    path: &SymmetricPath,
) -> Result<f64> {
    let values: Vec<f64> = (0..path.len())
        .into_par_iter()
        .map(|k| {
            let a = &path.points[k];
            let b = path.loop_point(k as i64 + 1);
            let mut best = f64::NEG_INFINITY;
            for j in 0..SEGMENT_SAMPLES {
                let t = j as f64 / SEGMENT_SAMPLES as f64;
                if let Ok(v) = normalize_to_sphere(&a.combine(1.0 - t, t, &b), weight, p) {
                    best = best.max(gagliardo_energy(kernel, p, &v)?);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn top(energies: &[f64]) -> (usize, f64) {
    energies.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (k, &e)| if e > acc.1 { (k, e) } else { acc },
    )
}

/// Second eigenvalue as the minimax of `Φ` over odd loops on the sphere.
///
/// The loop starts as the half circle from `e1` through a balanced
/// sign-changing rescaling of `e1` to `-e1`, and is lowered by projected
/// descent on a log-sum-exp smoothing of `max_k Φ(f_k)` at increasing
/// sharpness, with periodic arc-length redistribution. The highest point is
/// then driven to the saddle by a climbing-image iteration, and the loop
/// spanned by that point's positive and negative parts replaces the path when
/// it is lower.
pub fn solve_lambda2_path(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    e1: &GridFunction,
    config: &SolverConfig,
) -> Result<Lambda2Result> {
    check_sizes(kernel, weight)?;
    config.validate()?;
    let e1 = normalize_to_sphere(e1, weight, p)?;

    let mut path = initial_path(kernel, weight, p, &e1, config)?;
    let mut iterations = 0;
    for beta in config.temperatures() {
        let (next, it) = lse_stage(kernel, weight, p, path, beta, config)?;
        path = redistribute(&next, weight, p)?;
        iterations += it;
        log::debug!("stage beta = {beta}: {it} iterations");
    }

    let energies = path.energies(kernel, p)?;
    let (k_top, _) = top(&energies);
    let string_max = refined_max(kernel, weight, p, &path)?;
    let path = rotate(&path, k_top);
    let (mut saddle, mut residual, it) = climb(kernel, weight, p, &path, config)?;
    iterations += it;
    if residual >= config.tol_residual {
        let pol = polish(
            kernel,
            weight,
            p,
            &saddle,
            config.tol_residual,
            POLISH_SWEEPS,
        )?;
        if pol.residual < residual {
            saddle = pol.u;
            residual = pol.residual;
        }
        iterations += pol.sweeps;
    }

    let mut result = {
        let energies = path.energies(kernel, p)?;
        let (k, e) = top(&energies);
        Lambda2Result {
            estimate: e,
            residual: residual_norm(kernel, weight, p, e, &path.points[k])?,
            max_index: k,
            path,
            iterations,
            converged: false,
        }
    };

    if let Ok(loop_path) = nodal_path(weight, p, &saddle, config.path_points) {
        let energies = loop_path.energies(kernel, p)?;
        let (k, e) = top(&energies);
        log::debug!("saddle residual {residual:e}, loop max {e}");
        let saddle_ok = residual < config.tol_residual && e <= string_max * (1.0 + SADDLE_SLACK);
        if saddle_ok || e < result.estimate {
            result = Lambda2Result {
                estimate: e,
                residual: residual_norm(kernel, weight, p, e, &loop_path.points[k])?,
                max_index: k,
                path: loop_path,
                iterations,
                converged: saddle_ok,
            };
        }
    }
    log::debug!(
        "lambda2 = {} (string max {string_max}), residual {:e}",
        result.estimate,
        result.residual
    );
    Ok(result)
}
