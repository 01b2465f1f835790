//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::builders::{build_named_model, complex_matrix, NamedBuilder};
use crate::asymptotics::{GammaGrid, LimitMode, ScanAxis};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, HermitianObservable};
use crate::model::{build_model, OpenSystemModel};

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModel {
    pub h_s: MatrixRows,
    pub rho_s: MatrixRows,
    pub h_r: MatrixRows,
    pub v: MatrixRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderModel {
    pub system: NamedBuilder,
    pub reservoir: NamedBuilder,
}

/// Exactly one of `inline` or `builder`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Inline(InlineModel),
    Builder(BuilderModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Single(f64),
    List(Vec<f64>),
}

impl LambdaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LambdaSpec::Single(x) => vec![*x],
            LambdaSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    /// Times, couplings or reservoir sizes, depending on the axis.
    pub values: Vec<f64>,
    #[serde(default = "default_limit")]
    pub limit: LimitMode,
    #[serde(default)]
    pub gamma_grid: GammaGrid,
}

fn default_limit() -> LimitMode {
    LimitMode::CesaroExact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub beta: f64,
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub time_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Checks that do not require building a model.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::validation("beta", format!("must be positive and finite, got {}", self.beta)));
        }
        let lambdas = self.lambda.values();
        if lambdas.is_empty() {
            return Err(Error::validation("lambda", "list is empty"));
        }
        if let Some(bad) = lambdas.iter().find(|x| !x.is_finite()) {
            return Err(Error::validation("lambda", format!("{bad} is not finite")));
        }
        if let Some(bad) = self.time_grid.iter().find(|x| !x.is_finite()) {
            return Err(Error::validation("time_grid", format!("{bad} is not finite")));
        }
        if let Some(scan) = &self.scan {
            if scan.values.is_empty() {
                return Err(Error::validation("scan.values", "list is empty"));
            }
            if let Some(bad) = scan.values.iter().find(|x| !x.is_finite()) {
                return Err(Error::validation("scan.values", format!("{bad} is not finite")));
            }
            if scan.axis == ScanAxis::Size {
                if matches!(self.model, ModelSpec::Inline(_)) {
                    return Err(Error::validation("scan.axis", "size scans need a builder model"));
                }
                if let Some(bad) = scan.values.iter().find(|x| x.fract() != 0.0 || **x < 1.0) {
                    return Err(Error::validation("scan.values", format!("size {bad} is not a positive integer")));
                }
            }
            let g = scan.gamma_grid;
            if g.points == 0 || !g.min.is_finite() || !g.max.is_finite() || g.min > g.max {
                return Err(Error::validation("scan.gamma_grid", "needs points ≥ 1 and finite min ≤ max"));
            }
        }
        Ok(())
    }

    /// Times at which fixed-time checks run; `[1]` when the grid is empty.
    pub fn times(&self) -> Vec<f64> {
        if self.time_grid.is_empty() {
            vec![1.0]
        } else {
            self.time_grid.clone()
        }
    }

    pub fn gamma_grid(&self) -> GammaGrid {
        self.scan.as_ref().map(|s| s.gamma_grid).unwrap_or_default()
    }

    /// The model at coupling `lambda`, with the reservoir size replaced when
    /// `size` is given.
    pub fn model_at(&self, lambda: f64, size: Option<usize>) -> Result<OpenSystemModel> {
        match &self.model {
            ModelSpec::Inline(inline) => {
                if size.is_some() {
                    return Err(Error::validation("scan.axis", "size scans need a builder model"));
                }
                let h_s = HermitianObservable::new(complex_matrix("model.inline.h_s", &inline.h_s)?)
                    .map_err(|e| e.in_field("model.inline.h_s"))?;
                let rho_s = DensityMatrix::new(complex_matrix("model.inline.rho_s", &inline.rho_s)?)
                    .map_err(|e| e.in_field("model.inline.rho_s"))?;
                let h_r = HermitianObservable::new(complex_matrix("model.inline.h_r", &inline.h_r)?)
                    .map_err(|e| e.in_field("model.inline.h_r"))?;
                let v = HermitianObservable::new(complex_matrix("model.inline.v", &inline.v)?)
                    .map_err(|e| e.in_field("model.inline.v"))?;
                let d = h_s.dim() * h_r.dim();
                if d > super::builders::MODEL_DIM_CAP {
                    return Err(Error::ResourceCap {
                        what: "model dimension".into(),
                        dim: d,
                        cap: super::builders::MODEL_DIM_CAP,
                    });
                }
                build_model(h_s, rho_s, h_r, v, lambda, self.beta).map_err(|e| match e {
                    Error::Validation { field, reason } => {
                        Error::Validation { field: format!("model.inline.{field}"), reason }
                    }
                    other => other,
                })
            }
            ModelSpec::Builder(b) => {
                let reservoir = match size {
                    Some(n) => b.reservoir.with_size(n)?,
                    None => b.reservoir.clone(),
                };
                build_named_model(&b.system, &reservoir, self.beta, lambda, self.seed)
            }
        }
    }

    /// The model at the first listed coupling.
    pub fn primary_model(&self) -> Result<OpenSystemModel> {
        self.model_at(self.lambda.values()[0], None)
    }
}
