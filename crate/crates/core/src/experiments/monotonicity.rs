use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::{
    load, manifest, run_dir, write_json, ReportFormat, RunOptions, RunOutcome, RunStatus,
    WeightSpec,
};
use crate::eigen::{
    compute_monotonicity_constant, p2_oracle_spectrum, solve_lambda1, solve_lambda2_path,
    SolverConfig,
};
use crate::energy::WeightField;
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;

/// Relative slack for the non-strict ordering `λ_k(m) ≥ λ_k(m̃)`.
pub const ORDER_SLACK: f64 = 1e-8;
/// Relative margin a strict decrease must exceed.
pub const STRICT_MARGIN: f64 = 1e-6;
/// Relative slack on `λ₂(m̃) ≤ λ₂(m) / C`.
pub const CONSTANT_BOUND_SLACK: f64 = 1e-3;
/// Relative agreement required of the exact solver at `p = 2`.
pub const ORACLE_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    pub residual1: f64,
    pub residual2: f64,
    pub converged: bool,
    /// Exact values, present when `p = 2`.
    pub oracle_lambda1: Option<f64>,
    pub oracle_lambda2: Option<f64>,
}

/// Each claim is `None` when its hypothesis does not hold for the pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claims {
    /// `λ_k(m) ≥ λ_k(m̃)` for `k = 1, 2`, needs `m ≤ m̃`.
    pub ordering: bool,
    /// `λ₁(m) > λ₁(m̃)`, needs `m ≤ m̃` and `m ≠ m̃`.
    pub first_strict: Option<bool>,
    /// `λ₂(m) > λ₂(m̃)`, needs `m < m̃` on every cell.
    pub second_strict: Option<bool>,
    /// `C > 1`, needs `m < m̃` on every cell.
    pub constant_exceeds_one: Option<bool>,
    /// `λ₂(m̃) ≤ λ₂(m) / C`.
    pub constant_bound: bool,
    /// Nonlinear and exact eigenvalues agree, present when `p = 2`.
    pub oracle_agrees: Option<bool>,
}

impl Claims {
    /// Names of the claims that were asserted and failed.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, v: Option<bool>| {
            if v == Some(false) {
                out.push(name.to_string());
            }
        };
        check("ordering", Some(self.ordering));
        check("first_strict", self.first_strict);
        check("second_strict", self.second_strict);
        check("constant_exceeds_one", self.constant_exceeds_one);
        check("constant_bound", Some(self.constant_bound));
        check("oracle_agrees", self.oracle_agrees);
        out
    }
}

/// `λ(m) - λ(m̃)` for both eigenvalues, absolute and relative to `λ(m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margins {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda1_relative: f64,
    pub lambda2_relative: f64,
    /// `C - 1`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub manifest: Value,
    pub weight_m: WeightSpec,
    pub weight_m_tilde: WeightSpec,
    pub weights_equal: bool,
    /// `m < m̃` on every cell.
    pub strictly_ordered: bool,
    pub m: SpectrumSummary,
    pub m_tilde: SpectrumSummary,
    /// `inf Ψ_{m̃}` over `{Ψ_m = 1, Φ ≤ constant_cap}`.
    pub constant: f64,
    pub constant_cap: f64,
    /// Smallest `Ψ_{m̃}` over random feasible points, an upper bound on
    /// `constant`.
    pub constant_sampled: f64,
    pub claims: Claims,
    pub margins: Margins,
}

fn spectrum(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    config: &SolverConfig,
) -> Result<SpectrumSummary> {
    let e1 = solve_lambda1(kernel, weight, p, config)?;
    let l2 = solve_lambda2_path(kernel, weight, p, &e1.u, config)?;
    let (oracle_lambda1, oracle_lambda2) = if p == 2.0 {
        let spec = p2_oracle_spectrum(kernel, weight, 2)?;
        (
            spec.pairs.first().map(|e| e.lambda),
            spec.pairs.get(1).map(|e| e.lambda),
        )
    } else {
        (None, None)
    };
    Ok(SpectrumSummary {
        lambda1: e1.lambda,
        lambda2: l2.estimate,
        residual1: e1.residual,
        residual2: l2.residual,
        converged: e1.converged && l2.converged,
        oracle_lambda1,
        oracle_lambda2,
    })
}

fn oracle_agrees(s: &SpectrumSummary) -> Option<bool> {
    let close = |a: f64, b: Option<f64>| b.map(|b| (a - b).abs() <= ORACLE_AGREEMENT * b.abs());
    match (
        close(s.lambda1, s.oracle_lambda1),
        close(s.lambda2, s.oracle_lambda2),
    ) {
        (Some(a), Some(b)) => Some(a && b),
        _ => None,
    }
}

/// Compares the spectra of `m` and `m̃ ≥ m` on the same grid and evaluates
/// each monotonicity claim whose hypothesis holds.
///
/// The run fails with [`RunStatus::CheckFailed`] when an asserted claim is
/// false and with [`RunStatus::NotConverged`] when a solve missed the
/// tolerance; `monotonicity.json` is written in both cases.
pub fn cmd_monotonicity(
    config_m: &Path,
    config_m_tilde: &Path,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let cfg = load(config_m, opts)?;
    let cfg_t = load(config_m_tilde, opts)?;
    if cfg.domain != cfg_t.domain {
        return Err(Error::config(
            "domain",
            "both configs must describe the same grid",
        ));
    }
    if cfg.s != cfg_t.s {
        return Err(Error::config("s", "both configs must use the same s"));
    }
    if cfg.p != cfg_t.p {
        return Err(Error::config("p", "both configs must use the same p"));
    }
    let pb = cfg.build()?;
    let pb_t = cfg_t.build()?;
    let (m, mt) = (&pb.weight, &pb_t.weight);
    if let Some(i) = (0..m.len()).find(|&i| m.values()[i] > mt.values()[i]) {
        return Err(Error::config(
            "weight",
            format!(
                "m = {} exceeds m̃ = {} at cell {i}; m ≤ m̃ is required",
                m.values()[i],
                mt.values()[i]
            ),
        ));
    }
    let dir = run_dir(config_m, &cfg, "monotonicity", opts)?;
    let p = cfg.p;
    let solver = &cfg.solver;

    let sm = spectrum(&pb.kernel, m, p, solver)?;
    let st = spectrum(&pb.kernel, mt, p, solver)?;
    let cap = sm.lambda2 + 1.0;
    let c = compute_monotonicity_constant(&pb.kernel, m, mt, p, cap, solver)?;

    let weights_equal = m == mt;
    let strictly_ordered = m.lt(mt);
    let d1 = sm.lambda1 - st.lambda1;
    let d2 = sm.lambda2 - st.lambda2;
    let strict_hyp = |h: bool, v: bool| h.then_some(v);
    let oracle = match (oracle_agrees(&sm), oracle_agrees(&st)) {
        (Some(a), Some(b)) => Some(a && b),
        _ => None,
    };
    let claims = Claims {
        ordering: d1 >= -ORDER_SLACK * sm.lambda1 && d2 >= -ORDER_SLACK * sm.lambda2,
        first_strict: strict_hyp(!weights_equal, d1 > STRICT_MARGIN * sm.lambda1),
        second_strict: strict_hyp(strictly_ordered, d2 > STRICT_MARGIN * sm.lambda2),
        constant_exceeds_one: strict_hyp(strictly_ordered, c.value > 1.0 + STRICT_MARGIN),
        constant_bound: st.lambda2 <= sm.lambda2 / c.value * (1.0 + CONSTANT_BOUND_SLACK),
        oracle_agrees: oracle,
    };
    let margins = Margins {
        lambda1: d1,
        lambda2: d2,
        lambda1_relative: d1 / sm.lambda1,
        lambda2_relative: d2 / sm.lambda2,
        constant: c.value - 1.0,
    };
    let mut man = manifest("monotonicity", &cfg, &pb.domain);
    man["weight_m_tilde"] = json!(cfg_t.weight);
    let converged = sm.converged && st.converged;
    let report = MonotonicityReport {
        manifest: man,
        weight_m: cfg.weight.clone(),
        weight_m_tilde: cfg_t.weight.clone(),
        weights_equal,
        strictly_ordered,
        m: sm,
        m_tilde: st,
        constant: c.value,
        constant_cap: cap,
        constant_sampled: c.sampled,
        claims,
        margins,
    };
    write_json(&dir.join("monotonicity.json"), &report)?;
    write_json(&dir.join("manifest.json"), &report.manifest)?;
    if cfg.output.format == ReportFormat::Csv {
        write_summary_csv(&dir.join("monotonicity.csv"), &report)?;
    }

    let failures = report.claims.failures();
    let status = if !converged {
        RunStatus::NotConverged
    } else if !failures.is_empty() {
        RunStatus::CheckFailed(failures)
    } else {
        RunStatus::Ok
    };
    Ok(RunOutcome {
        run_dir: dir,
        status,
    })
}

fn write_summary_csv(path: &Path, r: &MonotonicityReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["quantity", "value"])?;
    let rows = [
        ("lambda1_m", r.m.lambda1),
        ("lambda1_m_tilde", r.m_tilde.lambda1),
        ("lambda2_m", r.m.lambda2),
        ("lambda2_m_tilde", r.m_tilde.lambda2),
        ("constant", r.constant),
        ("constant_cap", r.constant_cap),
        ("constant_sampled", r.constant_sampled),
    ];
    for (k, v) in rows {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
