//! Experiment orchestration behind the `fracp` binary.
//!
//! Each command reads a TOML [`ExperimentConfig`], validates it completely,
//! runs the solvers and writes a run directory:
//!
//! - `eigenpairs.json`: `{manifest, eigenpairs, files}` with sorted keys,
//! - `eigenfunction_<k>.csv`: cell center coordinates then value, one row per
//!   interior cell in enumeration order,
//! - `manifest.json`: the resolved parameters and seed.
//!
//! Reports never contain timestamps or absolute run paths, so reruns with the
//! same config and seed are byte-identical.

mod config;
mod monotonicity;
mod solve;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{ExperimentConfig, OutputSpec, Problem, ReportFormat, VerifySpec, WeightSpec};
pub use monotonicity::{cmd_monotonicity, Claims, MonotonicityReport, SpectrumSummary};
pub use solve::{cmd_oracle, cmd_solve};
pub use verify::{cmd_verify, SuiteRow, VerifyReport};

use crate::domain::Domain;
use crate::eigen::EigenPair;
use crate::error::{Error, Result};

/// Environment variable naming the default parent of run directories.
pub const OUTPUT_ROOT_ENV: &str = "FRACP_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// Command-line overrides shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Cross-check the nonlinear solves against the exact `p = 2` solver.
    pub oracle: bool,
    /// Also write the assembled kernel as `kernel.csv`.
    pub dump_kernel: bool,
    /// Test hook: perturb one kernel entry before `verify` runs.
    pub inject_asymmetry: bool,
}

/// What a command produced and how the process should exit.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// A verification suite or a monotonicity claim failed.
    CheckFailed(Vec<String>),
    /// Outputs were written but some solve missed the residual tolerance.
    NotConverged,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::CheckFailed(_) => 1,
            RunStatus::NotConverged => 3,
        }
    }
}

/// Exit code for a command that failed before producing its outputs.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Solver(_) => 3,
        _ => 2,
    }
}

/// Loads a config and applies the seed override.
pub(crate) fn load(path: &Path, opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = opts.seed {
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

/// `--out`, else `output.dir`, else `$FRACP_OUTPUT_ROOT/<stem>-<command>-s<seed>`.
pub(crate) fn run_dir(
    config_path: &Path,
    cfg: &ExperimentConfig,
    command: &str,
    opts: &RunOptions,
) -> Result<PathBuf> {
    let dir = match (&opts.out, &cfg.output.dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => {
            let root = std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            root.join(format!("{stem}-{command}-s{}", cfg.solver.seed))
        }
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Everything needed to reproduce a run; no paths outside the config.
pub(crate) fn manifest(command: &str, cfg: &ExperimentConfig, domain: &Domain) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.solver.seed,
        "s": cfg.s,
        "p": cfg.p,
        "domain": cfg.domain,
        "grid": {
            "dim": domain.dim(),
            "h": domain.h(),
            "cells_per_axis": domain.cells_per_axis(),
            "interior_cells": domain.num_cells(),
        },
        "weight": cfg.weight,
        "solver": cfg.solver,
        "oracle_count": cfg.oracle_count,
    })
}

/// One `eigenpairs` entry.
pub(crate) fn pair_entry(pair: &EigenPair) -> Value {
    json!({
        "lambda": pair.lambda,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "converged": pair.converged,
    })
}

/// Writes pretty JSON with sorted keys and a trailing newline.
pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    // Value maps are BTreeMaps, so the round trip sorts every object's keys
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Cell center coordinates then value, one row per interior cell.
pub(crate) fn write_function_csv(path: &Path, domain: &Domain, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..domain.dim()).map(|a| format!("x{a}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (x, v) in domain.cell_centers().iter().zip(values) {
        let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `index,lambda,residual,iterations,converged` for the `csv` report format.
pub(crate) fn write_pairs_csv(path: &Path, pairs: &[EigenPair]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "lambda", "residual", "iterations", "converged"])?;
    for (k, e) in pairs.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            e.lambda.to_string(),
            e.residual.to_string(),
            e.iterations.to_string(),
            e.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the eigenpair bundle shared by `solve` and `oracle` and returns the
/// names of the files written.
#[allow(clippy::too_many_arguments)]
pub(crate) fn write_bundle(
    dir: &Path,
    report_name: &str,
    function_prefix: &str,
    manifest: &Value,
    domain: &Domain,
    pairs: &[EigenPair],
    format: ReportFormat,
    extra_files: &[String],
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for (k, e) in pairs.iter().enumerate() {
        let name = format!("{function_prefix}eigenfunction_{}.csv", k + 1);
        write_function_csv(&dir.join(&name), domain, e.u.values())?;
        files.push(name);
    }
    if format == ReportFormat::Csv {
        let name = format!("{report_name}.csv");
        write_pairs_csv(&dir.join(&name), pairs)?;
        files.push(name);
    }
    files.extend(extra_files.iter().cloned());
    files.push("manifest.json".into());
    let report = json!({
        "manifest": manifest,
        "eigenpairs": pairs.iter().map(pair_entry).collect::<Vec<_>>(),
        "files": files,
    });
    write_json(&dir.join(format!("{report_name}.json")), &report)?;
    Ok(files)
}
