//! Elementary and functional inequalities behind the variational theory, as
//! gap functions: every gap is `LHS - RHS` oriented so that the inequality
//! holds iff `gap >= 0`.
//!
//! The `sweep_*` helpers evaluate a gap on seeded random inputs and keep the
//! worst sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{build_grid, DomainSpec};
use crate::energy::{
    gagliardo_energy, pow_abs, signed_pow, weighted_lp_energy, GridFunction, WeightField,
};
use crate::error::{Error, Result};
use crate::kernel::{assemble_kernel, FractionalKernel};

/// Sweeps accept gaps down to this value as rounding.
pub const GAP_TOL: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub gap: f64,
    /// The inputs that produced `gap`, for reproduction.
    pub inputs_digest: String,
}

impl GapResult {
    fn new(gap: f64, inputs_digest: String) -> Result<Self> {
        if !gap.is_finite() {
            return Err(Error::NonFinite(format!("gap for {inputs_digest}")));
        }
        Ok(Self { gap, inputs_digest })
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("exponent {p} must exceed 1")));
    }
    Ok(())
}

/// `2^{p-1}(a+b)^p - a^p - b^p` for `a, b >= 0`.
pub fn convexity_gap(a: f64, b: f64, p: f64) -> Result<GapResult> {
    check_exponent(p)?;
    if a < 0.0 || b < 0.0 {
        return Err(Error::Parameter(format!(
            "a = {a}, b = {b} must be nonnegative"
        )));
    }
    let gap = 2f64.powf(p - 1.0) * (a + b).powf(p) - a.powf(p) - b.powf(p);
    GapResult::new(gap, format!("a={a:e} b={b:e} p={p}"))
}

/// `q max(a^{q-1}, b^{q-1}) |a - b| - |a^q - b^q|`.
///
/// Zero arguments are accepted only for `q >= 1`.
pub fn lagrange_gap(a: f64, b: f64, q: f64) -> Result<GapResult> {
    if !(q > 0.0) {
        return Err(Error::Parameter(format!("exponent {q} must be positive")));
    }
    if a < 0.0 || b < 0.0 || (q < 1.0 && (a == 0.0 || b == 0.0)) {
        return Err(Error::Parameter(format!(
            "a = {a}, b = {b} must be positive (nonnegative when q >= 1)"
        )));
    }
    let slope = q * a.powf(q - 1.0).max(b.powf(q - 1.0));
    let gap = slope * (a - b).abs() - (a.powf(q) - b.powf(q)).abs();
    GapResult::new(gap, format!("a={a:e} b={b:e} q={q}"))
}

/// Clarkson's inequalities for the weighted `p`-norm `‖u‖^p = Ψ_w(u)`,
/// `w >= 0`.
///
/// - `p >= 2`: `½‖u‖^p + ½‖v‖^p - ‖(u+v)/2‖^p - ‖(u-v)/2‖^p`.
/// - `1 < p < 2`: `[½‖u‖^p + ½‖v‖^p]^{p'-1} - ‖(u+v)/2‖^{p'} - ‖(u-v)/2‖^{p'}`
///   with `p' = p/(p-1)`.
pub fn clarkson_gap(
    u: &GridFunction,
    v: &GridFunction,
    p: f64,
    weight_positive_part: &WeightField,
) -> Result<GapResult> {
    check_exponent(p)?;
    if let Some(w) = weight_positive_part.values().iter().find(|&&w| w < 0.0) {
        return Err(Error::Weight(format!("negative weight entry {w}")));
    }
    let w = weight_positive_part;
    let half_sum = u.combine(0.5, 0.5, v);
    let half_diff = u.combine(0.5, -0.5, v);
    let pu = weighted_lp_energy(w, p, u)?;
    let pv = weighted_lp_energy(w, p, v)?;
    let ps = weighted_lp_energy(w, p, &half_sum)?;
    let pd = weighted_lp_energy(w, p, &half_diff)?;
    let gap = if p >= 2.0 {
        0.5 * (pu + pv) - ps - pd
    } else {
        // ‖·‖^{p'} = Ψ^{p'/p} = Ψ^{1/(p-1)}
        let e = 1.0 / (p - 1.0);
        (0.5 * (pu + pv)).powf(e) - ps.powf(e) - pd.powf(e)
    };
    GapResult::new(
        gap,
        format!(
            "p={p} |u|={:e} |v|={:e} cells={}",
            u.norm(),
            v.norm(),
            u.len()
        ),
    )
}

/// `(1-t)Φ(u) + tΦ(v) - Φ(w_t)` with `w_t = [(1-t)u^p + t v^p]^{1/p}` for
/// positive `u, v`.
pub fn hidden_convexity_gap(
    kernel: &FractionalKernel,
    p: f64,
    u: &GridFunction,
    v: &GridFunction,
    t: f64,
) -> Result<GapResult> {
    check_exponent(p)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("t = {t} must lie in [0, 1]")));
    }
    if u.iter().chain(v.iter()).any(|&x| !(x > 0.0)) {
        return Err(Error::Parameter(
            "u and v must be positive on every cell".into(),
        ));
    }
    if u.len() != v.len() {
        return Err(Error::SizeMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let w = GridFunction::new(
        u.iter()
            .zip(v.iter())
            .map(|(a, b)| ((1.0 - t) * a.powf(p) + t * b.powf(p)).powf(1.0 / p))
            .collect(),
    );
    let gap = (1.0 - t) * gagliardo_energy(kernel, p, u)? + t * gagliardo_energy(kernel, p, v)?
        - gagliardo_energy(kernel, p, &w)?;
    GapResult::new(
        gap,
        format!("p={p} t={t} |u|={:e} |v|={:e}", u.norm(), v.norm()),
    )
}

/// Discrete Picone inequality at one pair of points:
/// `|a_x - a_y|^p - |b_x - b_y|^{p-2}(b_x - b_y)(w_x - w_y)` with
/// `w = a^p / (b + ε)^{p-1}`.
pub fn picone_gap(ax: f64, ay: f64, bx: f64, by: f64, p: f64, eps: f64) -> Result<GapResult> {
    check_exponent(p)?;
    if ax < 0.0 || ay < 0.0 || bx < 0.0 || by < 0.0 || !(eps > 0.0) {
        return Err(Error::Parameter(format!(
            "arguments ({ax}, {ay}, {bx}, {by}, eps = {eps}) out of range"
        )));
    }
    let wx = ax.powf(p) / (bx + eps).powf(p - 1.0);
    let wy = ay.powf(p) / (by + eps).powf(p - 1.0);
    let gap = pow_abs(ax - ay, p) - signed_pow(bx - by, p) * (wx - wy);
    GapResult::new(
        gap,
        format!("ax={ax:e} ay={ay:e} bx={bx:e} by={by:e} p={p} eps={eps:e}"),
    )
}

/// Pointwise inequality behind the nodal loop bound, for `ω` on the unit
/// circle:
/// `φ(ω₁U - ω₁V)ω₁U - φ(ω₂U - ω₂V)ω₂V - |ω₁U - ω₂V|^p` with
/// `φ(t) = |t|^{p-2}t`.
///
/// `U` and `V` are differences of the positive and negative parts of one
/// function; see [`nodal_loop_inputs`].
pub fn nodal_loop_gap(u_diff: f64, v_diff: f64, omega: (f64, f64), p: f64) -> Result<GapResult> {
    check_exponent(p)?;
    let (w1, w2) = omega;
    if ((w1 * w1 + w2 * w2) - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!(
            "({w1}, {w2}) is not on the unit circle"
        )));
    }
    let (u, v) = (u_diff, v_diff);
    let gap = signed_pow(w1 * u - w1 * v, p) * w1 * u
        - signed_pow(w2 * u - w2 * v, p) * w2 * v
        - pow_abs(w1 * u - w2 * v, p);
    GapResult::new(gap, format!("U={u:e} V={v:e} omega=({w1:e}, {w2:e}) p={p}"))
}

/// `(U, V) = (u⁺(x) - u⁺(y), u⁻(x) - u⁻(y))` for function values
/// `u(x), u(y)`.
pub fn nodal_loop_inputs(ux: f64, uy: f64) -> (f64, f64) {
    (ux.max(0.0) - uy.max(0.0), (-ux).max(0.0) - (-uy).max(0.0))
}

/// `Φ(u) - Φ(|u|)`.
pub fn abs_contraction_gap(
    kernel: &FractionalKernel,
    p: f64,
    u: &GridFunction,
) -> Result<GapResult> {
    let gap = gagliardo_energy(kernel, p, u)? - gagliardo_energy(kernel, p, &u.abs())?;
    GapResult::new(gap, format!("p={p} |u|={:e} cells={}", u.norm(), u.len()))
}

/// Outcome of evaluating one gap on many seeded random inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub suite: &'static str,
    pub seed: u64,
    pub samples: usize,
    /// Samples with `gap < GAP_TOL`.
    pub violations: usize,
    pub worst: GapResult,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn sweep<F>(suite: &'static str, samples: usize, seed: u64, mut draw: F) -> Result<SweepReport>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<GapResult>,
{
    if samples == 0 {
        return Err(Error::Parameter("a sweep needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<GapResult> = None;
    let mut violations = 0;
    for _ in 0..samples {
        let g = draw(&mut rng)?;
        if g.gap < GAP_TOL {
            violations += 1;
        }
        if worst.as_ref().is_none_or(|w| g.gap < w.gap) {
            worst = Some(g);
        }
    }
    Ok(SweepReport {
        suite,
        seed,
        samples,
        violations,
        worst: worst.expect("samples > 0"),
    })
}

const SWEEP_CELLS: usize = 8;
const SWEEP_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];
/// Fractional order for sweep kernels; `p s < 1` for every sweep exponent.
const SWEEP_S: f64 = 0.3;

fn sweep_kernels() -> Result<Vec<(f64, FractionalKernel)>> {
    let d = build_grid(&DomainSpec::interval(0.0, 1.0, SWEEP_CELLS))?;
    SWEEP_EXPONENTS
        .iter()
        .map(|&p| Ok((p, assemble_kernel(&d, SWEEP_S, p)?)))
        .collect()
}

fn random_function(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> GridFunction {
    GridFunction::new((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

/// `(a, b, p)` uniform in `[0, 10]² × (1, 5]`.
pub fn sweep_convexity(samples: usize, seed: u64) -> Result<SweepReport> {
    sweep("convexity", samples, seed, |rng| {
        let a = rng.gen_range(0.0..=10.0);
        let b = rng.gen_range(0.0..=10.0);
        let p = 5.0 - rng.gen_range(0.0..4.0);
        convexity_gap(a, b, p)
    })
}

/// `(a, b, q)` uniform in `(0, 10]² × (0, 4]`.
pub fn sweep_lagrange(samples: usize, seed: u64) -> Result<SweepReport> {
    sweep("lagrange", samples, seed, |rng| {
        let a = 10.0 - rng.gen_range(0.0..10.0);
        let b = 10.0 - rng.gen_range(0.0..10.0);
        let q = 4.0 - rng.gen_range(0.0..4.0);
        lagrange_gap(a, b, q)
    })
}

/// Random `u, v` on an 8-cell grid with random nonnegative weights,
/// `p ∈ {1.5, 2, 3, 4}`.
pub fn sweep_clarkson(samples: usize, seed: u64) -> Result<SweepReport> {
    let exponents = [1.5, 2.0, 3.0, 4.0];
    let vol = 1.0 / SWEEP_CELLS as f64;
    sweep("clarkson", samples, seed, |rng| {
        let p = exponents[rng.gen_range(0..exponents.len())];
        let w = WeightField::new_unchecked(
            (0..SWEEP_CELLS).map(|_| rng.gen_range(0.0..2.0)).collect(),
            vol,
        )?;
        let u = random_function(rng, SWEEP_CELLS, -1.0, 1.0);
        let v = random_function(rng, SWEEP_CELLS, -1.0, 1.0);
        clarkson_gap(&u, &v, p, &w)
    })
}

/// Random positive `u, v` on an 8-cell interval kernel, `p ∈ {1.5, 2, 3}`,
/// `t ∈ {0.25, 0.5, 0.75}`.
pub fn sweep_hidden_convexity(samples: usize, seed: u64) -> Result<SweepReport> {
    let kernels = sweep_kernels()?;
    let ts = [0.25, 0.5, 0.75];
    sweep("hidden_convexity", samples, seed, |rng| {
        let (p, k) = &kernels[rng.gen_range(0..kernels.len())];
        let t = ts[rng.gen_range(0..ts.len())];
        let u = random_function(rng, SWEEP_CELLS, 0.01, 2.0);
        let v = random_function(rng, SWEEP_CELLS, 0.01, 2.0);
        hidden_convexity_gap(k, *p, &u, &v, t)
    })
}

/// Random nonnegative tuples and `ε ∈ [10⁻³, 1)`, `p ∈ {1.5, 2, 3}`.
pub fn sweep_picone(samples: usize, seed: u64) -> Result<SweepReport> {
    sweep("picone", samples, seed, |rng| {
        let p = SWEEP_EXPONENTS[rng.gen_range(0..SWEEP_EXPONENTS.len())];
        let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
        picone_gap(
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            p,
            eps,
        )
    })
}

/// Random `(u(x), u(y)) ∈ [-2, 2]²` mapped through [`nodal_loop_inputs`], random
/// angle, `p ∈ {1.5, 2, 3}`.
pub fn sweep_nodal_loop(samples: usize, seed: u64) -> Result<SweepReport> {
    sweep("nodal_loop", samples, seed, |rng| {
        let p = SWEEP_EXPONENTS[rng.gen_range(0..SWEEP_EXPONENTS.len())];
        let (u, v) = nodal_loop_inputs(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        nodal_loop_gap(u, v, (theta.cos(), theta.sin()), p)
    })
}

/// Random sign-changing `u` on an 8-cell interval kernel, `p ∈ {1.5, 2, 3}`.
pub fn sweep_abs_contraction(samples: usize, seed: u64) -> Result<SweepReport> {
    let kernels = sweep_kernels()?;
    sweep("abs_contraction", samples, seed, |rng| {
        let (p, k) = &kernels[rng.gen_range(0..kernels.len())];
        let u = random_function(rng, SWEEP_CELLS, -1.0, 1.0);
        abs_contraction_gap(k, *p, &u)
    })
}

/// Every sweep above with the same sample count and seed.
pub fn sweep_all(samples: usize, seed: u64) -> Result<Vec<SweepReport>> {
    Ok(vec![
        sweep_convexity(samples, seed)?,
        sweep_lagrange(samples, seed)?,
        sweep_clarkson(samples, seed)?,
        sweep_hidden_convexity(samples, seed)?,
        sweep_picone(samples, seed)?,
        sweep_nodal_loop(samples, seed)?,
        sweep_abs_contraction(samples, seed)?,
    ])
}
