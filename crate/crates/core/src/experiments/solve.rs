use std::path::Path;

use serde_json::{json, Value};

use super::{load, manifest, run_dir, write_bundle, write_json, RunOptions, RunOutcome, RunStatus};
use crate::eigen::{p2_oracle_spectrum, solve_lambda1, solve_lambda2_path, EigenPair};
use crate::error::{Error, Result};

fn require_p2(p: f64, what: &str) -> Result<()> {
    if p != 2.0 {
        return Err(Error::config(
            "p",
            format!("{what} needs p = 2, got p = {p}"),
        ));
    }
    Ok(())
}

/// Solves for `λ₁` and `λ₂` and writes the run bundle.
///
/// With `--oracle` (only for `p = 2`) the exact spectrum is written to
/// `oracle.json` and the relative differences to `comparison.json`. A
/// non-converged solve still writes every file and yields
/// [`RunStatus::NotConverged`].
pub fn cmd_solve(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = load(config_path, opts)?;
    let pb = cfg.build()?;
    if opts.oracle {
        require_p2(cfg.p, "--oracle")?;
    }
    let dir = run_dir(config_path, &cfg, "solve", opts)?;
    let mut man = manifest("solve", &cfg, &pb.domain);
    man["oracle"] = json!(opts.oracle);
    write_json(&dir.join("manifest.json"), &man)?;

    let mut extra = Vec::new();
    if opts.dump_kernel {
        pb.kernel.write_csv(dir.join("kernel.csv"))?;
        extra.push("kernel.csv".to_string());
    }

    log::info!("solving for lambda1 on {} cells", pb.domain.num_cells());
    let e1 = solve_lambda1(&pb.kernel, &pb.weight, cfg.p, &cfg.solver)?;
    log::info!("lambda1 = {} (residual {:e})", e1.lambda, e1.residual);
    let l2 = solve_lambda2_path(&pb.kernel, &pb.weight, cfg.p, &e1.u, &cfg.solver)?;
    log::info!("lambda2 = {} (residual {:e})", l2.estimate, l2.residual);
    let e2 = EigenPair {
        lambda: l2.estimate,
        u: l2.eigenfunction().clone(),
        residual: l2.residual,
        iterations: l2.iterations,
        converged: l2.converged,
    };
    let pairs = [e1, e2];

    if opts.oracle {
        let spec = p2_oracle_spectrum(&pb.kernel, &pb.weight, cfg.oracle_count.max(2))?;
        let mut oman = man.clone();
        oman["truncated"] = json!(spec.truncated);
        let ofiles = write_bundle(
            &dir,
            "oracle",
            "oracle_",
            &oman,
            &pb.domain,
            &spec.pairs,
            cfg.output.format,
            &[],
        )?;
        extra.extend(ofiles.into_iter().filter(|f| f != "manifest.json"));
        extra.push("oracle.json".into());
        write_json(
            &dir.join("comparison.json"),
            &comparison(&pairs, &spec.pairs),
        )?;
        extra.push("comparison.json".into());
    }

    write_bundle(
        &dir,
        "eigenpairs",
        "",
        &man,
        &pb.domain,
        &pairs,
        cfg.output.format,
        &extra,
    )?;
    let status = if pairs.iter().all(|e| e.converged) {
        RunStatus::Ok
    } else {
        RunStatus::NotConverged
    };
    Ok(RunOutcome {
        run_dir: dir,
        status,
    })
}

fn comparison(solver: &[EigenPair], oracle: &[EigenPair]) -> Value {
    let rows: Vec<Value> = solver
        .iter()
        .zip(oracle)
        .enumerate()
        .map(|(k, (a, b))| {
            json!({
                "index": k + 1,
                "solver": a.lambda,
                "oracle": b.lambda,
                "relative_difference": (a.lambda - b.lambda).abs() / b.lambda,
            })
        })
        .collect();
    json!({ "pairs": rows })
}

/// Writes the exact `p = 2` spectrum in the `solve` schema. The manifest
/// records whether fewer positive eigenvalues exist than `oracle_count`.
pub fn cmd_oracle(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = load(config_path, opts)?;
    require_p2(cfg.p, "the oracle command")?;
    let pb = cfg.build()?;
    let dir = run_dir(config_path, &cfg, "oracle", opts)?;

    let spec = p2_oracle_spectrum(&pb.kernel, &pb.weight, cfg.oracle_count)?;
    if spec.truncated {
        log::warn!(
            "only {} positive eigenvalues exist, {} requested",
            spec.pairs.len(),
            cfg.oracle_count
        );
    }
    let mut man = manifest("oracle", &cfg, &pb.domain);
    man["truncated"] = json!(spec.truncated);
    man["returned_count"] = json!(spec.pairs.len());
    write_json(&dir.join("manifest.json"), &man)?;

    let mut extra = Vec::new();
    if opts.dump_kernel {
        pb.kernel.write_csv(dir.join("kernel.csv"))?;
        extra.push("kernel.csv".to_string());
    }
    write_bundle(
        &dir,
        "eigenpairs",
        "",
        &man,
        &pb.domain,
        &spec.pairs,
        cfg.output.format,
        &extra,
    )?;
    let status = if spec.pairs.iter().all(|e| e.converged) {
        RunStatus::Ok
    } else {
        RunStatus::NotConverged
    };
    Ok(RunOutcome {
        run_dir: dir,
        status,
    })
}
