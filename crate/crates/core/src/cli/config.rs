//! Run configuration: a TOML file with `command`, `method` and the tables
//! `[model]`, `[prior]`, `[numerics]`, `[task]` and `[output]`.

use super::CliError;
use crate::bounds::{BoundKind, Estimator};
use crate::expansions::ClaimId;
use crate::fisher::FisherForm;
use crate::info::CeForm;
use crate::numerics::{Method, Numerics};
use crate::{Model, Prior};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fi,
    Bfi,
    Fim,
    Roc,
    Auc,
    Mpe,
    Entropy,
    Si,
    Emse,
    Bounds,
    Zivzakai,
    Expansions,
    Regularity,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_ladder: Option<Vec<f64>>,
}

/// Task and grid parameters; which ones are needed depends on the command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    /// Shifts: tasks `(theta, theta + delta)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    /// Fixed prior odds `y`; otherwise from the prior, or 1 without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub odds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<ClaimId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<Estimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_form: Option<FisherForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce_form: Option<CeForm>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub method: Method,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub numerics: NumericsSpec,
    #[serde(default)]
    pub task: TaskSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// The configuration turned into library values.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub model: Model,
    pub prior: Option<Prior>,
    pub numerics: Numerics,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::schema("", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            CliError::schema(if key == "." { "" } else { &key }, e.into_inner().message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::schema("--config", format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    /// Checks the schema invariants and builds the model, prior and numerics.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let model = self.model.build()?;
        let prior = self.prior.as_ref().map(|p| p.build()).transpose()?;
        if let (Some(p), false) = (&prior, model.is_vector()) {
            p.check_model(&model).map_err(|e| CliError::schema("prior.family", e.to_string()))?;
        }
        let numerics = self.numerics.build()?;
        let stochastic = self.method == Method::MonteCarlo
            || matches!(self.command, Command::Bounds | Command::Regularity | Command::All);
        if stochastic && self.numerics.seed.is_none() {
            return Err(CliError::schema(
                "numerics.seed",
                "a seed is required when results may come from Monte Carlo",
            ));
        }
        self.task.validate(&model, prior.as_ref())?;
        if self.output.format == Format::Csv && self.command != Command::Roc {
            return Err(CliError::schema("output.format", "csv output is only produced by the roc command"));
        }
        Ok(Resolved { model, prior, numerics })
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model, CliError> {
        let sigma = || self.sigma.ok_or_else(|| CliError::schema("model.sigma", "required for this family"));
        let unused = |key: &str, present: bool| {
            if present {
                Err(CliError::schema(key, format!("not a parameter of {}", self.family)))
            } else {
                Ok(())
            }
        };
        let model = match self.family.as_str() {
            "gaussian_location" => {
                unused("model.dim", self.dim.is_some())?;
                Model::GaussianLocation { sigma: sigma()? }
            }
            "gaussian_scale" => {
                unused("model.sigma", self.sigma.is_some())?;
                unused("model.dim", self.dim.is_some())?;
                Model::GaussianScale
            }
            "poisson_rate" => {
                unused("model.sigma", self.sigma.is_some())?;
                unused("model.dim", self.dim.is_some())?;
                Model::PoissonRate
            }
            "gaussian_location_vector" => Model::GaussianLocationVector {
                sigma: sigma()?,
                dim: self.dim.ok_or_else(|| CliError::schema("model.dim", "required for this family"))?,
            },
            other => return Err(CliError::schema("model.family", format!("unknown model family '{other}'"))),
        };
        model.validate().map_err(|e| CliError::schema("model", e.to_string()))?;
        Ok(model)
    }
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior, CliError> {
        let fields = [
            ("mean", self.mean),
            ("sd", self.sd),
            ("center", self.center),
            ("half_width", self.half_width),
            ("mu", self.mu),
            ("s", self.s),
        ];
        let names: &[&str] = match self.family.as_str() {
            "gaussian" => &["mean", "sd"],
            "scaled_cosine_squared_bump" => &["center", "half_width"],
            "lognormal" => &["mu", "s"],
            other => return Err(CliError::schema("prior.family", format!("unknown prior family '{other}'"))),
        };
        for (k, v) in fields {
            if v.is_some() && !names.contains(&k) {
                return Err(CliError::schema(&format!("prior.{k}"), format!("not a parameter of {}", self.family)));
            }
        }
        let params = names
            .iter()
            .map(|k| {
                fields
                    .iter()
                    .find(|(n, _)| n == k)
                    .and_then(|(_, v)| *v)
                    .ok_or_else(|| CliError::schema(&format!("prior.{k}"), "required for this family"))
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        Prior::from_params(&self.family, &params).map_err(|e| CliError::schema("prior", e.to_string()))
    }
}

impl NumericsSpec {
    pub fn build(&self) -> Result<Numerics, CliError> {
        let mut n = Numerics::default();
        if let Some(t) = self.quad_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::schema("numerics.quad_tol", "must be positive and finite"));
            }
            n.quad_tol = t;
        }
        if let Some(m) = self.mc_samples {
            if m < 2 {
                return Err(CliError::schema("numerics.mc_samples", "must be at least 2"));
            }
            n.mc_samples = m;
        }
        if let Some(s) = self.seed {
            n.seed = s;
        }
        if let Some(l) = &self.curvature_ladder {
            let ok = l.len() >= 3 && l.iter().all(|h| h.is_finite() && *h > 0.0) && l.windows(2).all(|w| w[1] < w[0]);
            if !ok {
                return Err(CliError::schema(
                    "numerics.curvature_ladder",
                    "need at least 3 positive, strictly decreasing steps",
                ));
            }
            n.curvature_ladder = l.clone();
        }
        Ok(n)
    }
}

impl TaskSpec {
    fn validate(&self, model: &Model, prior: Option<&Prior>) -> Result<(), CliError> {
        let scalar = |key: &str, t: Option<f64>| -> Result<(), CliError> {
            match t {
                Some(t) if model.is_vector() => Err(CliError::schema(key, format!("{t} given for a vector family; use task.theta_vector"))),
                Some(t) => model.check_theta(t).map_err(|e| CliError::schema(key, e.to_string())),
                None => Ok(()),
            }
        };
        scalar("task.theta", self.theta)?;
        scalar("task.theta0", self.theta0)?;
        scalar("task.theta1", self.theta1)?;
        if let Some(ds) = &self.deltas {
            let theta = self
                .theta
                .ok_or_else(|| CliError::schema("task.theta", "required with task.deltas"))?;
            for (i, d) in ds.iter().enumerate() {
                scalar(&format!("task.deltas[{i}]"), Some(theta + d))?;
                if !d.is_finite() {
                    return Err(CliError::schema(&format!("task.deltas[{i}]"), "must be finite"));
                }
            }
        }
        if let (Some(p), None) = (prior, self.odds) {
            for (key, t) in [("task.theta", self.theta), ("task.theta0", self.theta0), ("task.theta1", self.theta1)] {
                if let Some(t) = t {
                    if !p.contains(t) && !model.is_vector() {
                        return Err(CliError::schema(key, format!("{t} is outside the prior support")));
                    }
                }
            }
        }
        if let Some(y) = self.odds {
            if !(y > 0.0 && y.is_finite()) {
                return Err(CliError::schema("task.odds", "must be positive and finite"));
            }
        }
        let dim = match *model {
            Model::GaussianLocationVector { dim, .. } => Some(dim),
            _ => None,
        };
        for (key, v) in [("task.theta_vector", &self.theta_vector), ("task.direction", &self.direction)] {
            if let Some(v) = v {
                if dim != Some(v.len()) {
                    return Err(CliError::schema(key, "length must equal the vector family's dim"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::schema(key, "entries must be finite"));
                }
            }
        }
        if let Some(u) = &self.direction {
            if u.iter().all(|x| *x == 0.0) {
                return Err(CliError::schema("task.direction", "must be nonzero"));
            }
        }
        Ok(())
    }
}
