use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_grid, Domain, DomainSpec};
use crate::eigen::SolverConfig;
use crate::energy::WeightField;
use crate::error::{Error, Result};
use crate::kernel::{assemble_kernel, FractionalKernel};

/// Weight families accepted in experiment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    /// `below` where coordinate `axis` is under `threshold`, `above` elsewhere.
    Step {
        #[serde(default)]
        axis: usize,
        threshold: f64,
        below: f64,
        above: f64,
    },
    /// `c·|x - center|^{-alpha} + offset`.
    Singular {
        c: f64,
        center: Vec<f64>,
        alpha: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `base + slope · x`.
    Affine {
        base: f64,
        slope: Vec<f64>,
    },
    /// `base + amplitude · exp(-|x - center|² / (2 width²))`.
    Bump {
        base: f64,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// One value per interior cell, last field of each record.
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Run directory; the CLI `--out` flag takes precedence.
    pub dir: Option<PathBuf>,
    pub format: ReportFormat,
}

/// Sample counts for the `verify` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub samples: usize,
    pub gradient_points: usize,
    pub simplicity_trials: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            samples: 10_000,
            gradient_points: 20,
            simplicity_trials: 5,
        }
    }
}

/// One experiment: a grid, the fractional parameters, a weight, and solver
/// settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub s: f64,
    pub p: f64,
    pub domain: DomainSpec,
    pub weight: WeightSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "default_oracle_count")]
    pub oracle_count: usize,
    #[serde(default)]
    pub verify: VerifySpec,
}

fn default_oracle_count() -> usize {
    5
}

/// Validated inputs ready for the solvers.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: Domain,
    pub kernel: FractionalKernel,
    pub weight: WeightField,
}

impl ExperimentConfig {
    /// Parses a TOML file. Relative weight CSV paths are resolved against the
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        let mut cfg = Self::from_toml(&text)?;
        if let WeightSpec::Csv { path: csv } = &mut cfg.weight {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("(document)", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().to_string())
        })
    }

    /// Checks every field against the module preconditions and builds the
    /// grid, kernel and weight.
    pub fn build(&self) -> Result<Problem> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::config("s", format!("{} must lie in (0, 1)", self.s)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::config("p", format!("{} must exceed 1", self.p)));
        }
        if self.oracle_count == 0 {
            return Err(Error::config("oracle_count", "must be at least 1"));
        }
        self.solver.validate()?;
        let domain =
            build_grid(&self.domain).map_err(|e| Error::config("domain", e.to_string()))?;
        let kernel = assemble_kernel(&domain, self.s, self.p)
            .map_err(|e| Error::config("p", e.to_string()))?;
        let weight = self.build_weight(&domain)?;
        Ok(Problem {
            domain,
            kernel,
            weight,
        })
    }

    fn build_weight(&self, domain: &Domain) -> Result<WeightField> {
        let at = |field: &str, e: Error| Error::config(format!("weight.{field}"), e.to_string());
        let dim = domain.dim();
        let check_len = |field: &str, v: &[f64]| -> Result<()> {
            if v.len() != dim {
                return Err(Error::config(
                    format!("weight.{field}"),
                    format!("needs {dim} coordinates, got {}", v.len()),
                ));
            }
            Ok(())
        };
        let from_fn = |f: &dyn Fn(&[f64]) -> f64| -> Result<WeightField> {
            let values = domain.cell_centers().iter().map(|x| f(x)).collect();
            WeightField::new(values, domain.cell_volume()).map_err(|e| at("kind", e))
        };
        match &self.weight {
            WeightSpec::Constant { value } => {
                WeightField::constant(domain, *value).map_err(|e| at("value", e))
            }
            WeightSpec::Step {
                axis,
                threshold,
                below,
                above,
            } => WeightField::step(domain, *axis, *threshold, *below, *above)
                .map_err(|e| at("axis", e)),
            WeightSpec::Singular {
                c,
                center,
                alpha,
                offset,
            } => {
                check_len("center", center)?;
                WeightField::singular(domain, self.s, self.p, *c, center, *alpha, *offset)
                    .map_err(|e| at("alpha", e))
            }
            WeightSpec::Affine { base, slope } => {
                check_len("slope", slope)?;
                from_fn(&|x| base + x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>())
            }
            WeightSpec::Bump {
                base,
                amplitude,
                center,
                width,
            } => {
                check_len("center", center)?;
                if !(*width > 0.0) {
                    return Err(Error::config("weight.width", "must be positive"));
                }
                from_fn(&|x| {
                    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    base + amplitude * (-r2 / (2.0 * width * width)).exp()
                })
            }
            WeightSpec::Csv { path } => {
                WeightField::from_csv(domain, path).map_err(|e| at("path", e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
s = 0.4
p = 2.0

[domain]
shape = "interval"
lo = [0.0]
hi = [1.0]
cells = [16]

[weight]
kind = "constant"
value = 1.0
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.output.format, ReportFormat::Json);
        let pb = cfg.build().unwrap();
        assert_eq!(pb.kernel.num_cells(), 16);
        assert_eq!(pb.weight.len(), 16);
    }

    #[test]
    fn unknown_field_names_its_path() {
        let text = BASIC.replace("value = 1.0", "value = 1.0\ncolour = 3");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "weight"),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{BASIC}\n[solver]\ntol_residual = \"small\"\n");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "solver.tol_residual"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrability_guard_is_reported() {
        let text = BASIC.replace(
            "kind = \"constant\"\nvalue = 1.0",
            "kind = \"singular\"\nc = 1.0\ncenter = [0.5]\nalpha = 0.9",
        );
        let err = ExperimentConfig::from_toml(&text)
            .unwrap()
            .build()
            .unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "weight.alpha");
                assert!(message.contains("integrability"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_parameters_fail_fast() {
        let text = BASIC.replace("s = 0.4", "s = 1.4");
        assert!(matches!(
            ExperimentConfig::from_toml(&text).unwrap().build(),
            Err(Error::Config { path, .. }) if path == "s"
        ));
        let text = BASIC.replace("cells = [16]", "cells = [1]");
        assert!(matches!(
            ExperimentConfig::from_toml(&text).unwrap().build(),
            Err(Error::Config { path, .. }) if path == "domain"
        ));
    }

    #[test]
    fn sample_configs_build() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                ExperimentConfig::from_file(&path).unwrap().build().unwrap();
                seen += 1;
            }
        }
        assert!(seen > 0);
    }
}
