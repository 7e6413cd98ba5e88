//! Shared numeric machinery: adaptive quadrature, seeded Monte Carlo,
//! Richardson-extrapolated curvature and error-function utilities.

mod montecarlo;
mod quadrature;
mod richardson;
pub mod special;

pub use montecarlo::{derive_seed, mc_mean, mc_means, sample_blocks, substream, Rng, BLOCK_SIZE};
pub use quadrature::{gauss_legendre, integrate_1d, integrate_with_breaks, QuadOptions};
pub use richardson::{curvature_at_zero, first_derivative_at_zero, richardson_curvature};

use serde::{Deserialize, Serialize};

/// How an [`Estimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Requested evaluation route for an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form if available, then quadrature, then Monte Carlo.
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Method {
    /// Picks the evaluation route: an explicit request is honoured if the
    /// route exists, `Auto` takes the first available of closed form,
    /// quadrature, Monte Carlo.
    pub fn resolve(self, closed_form: bool, quadrature: bool) -> crate::Result<EstimateMethod> {
        let unavailable = |what: &str| {
            Err(crate::FomError::config(
                "method",
                format!("no {what} route for this quantity"),
            ))
        };
        match self {
            Method::Auto if closed_form => Ok(EstimateMethod::ClosedForm),
            Method::Auto if quadrature => Ok(EstimateMethod::Quadrature),
            Method::Auto | Method::MonteCarlo => Ok(EstimateMethod::MonteCarlo),
            Method::ClosedForm if closed_form => Ok(EstimateMethod::ClosedForm),
            Method::ClosedForm => unavailable("closed-form"),
            Method::Quadrature if quadrature => Ok(EstimateMethod::Quadrature),
            Method::Quadrature => unavailable("quadrature"),
        }
    }
}

/// A numeric result with its uncertainty and provenance.
///
/// Monte Carlo estimates carry a positive standard error and the seed used;
/// quadrature estimates report the requested tolerance as `std_error`;
/// closed forms carry zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub method: EstimateMethod,
    /// Quadrature nodes, summation terms or Monte Carlo samples.
    pub effort: u64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Estimate {
    pub fn closed_form(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            method: EstimateMethod::ClosedForm,
            effort: 0,
            seed: None,
            warnings: Vec::new(),
        }
    }

    pub fn quadrature(value: f64, tol: f64, effort: u64) -> Self {
        Estimate {
            value,
            std_error: tol,
            method: EstimateMethod::Quadrature,
            effort,
            seed: None,
            warnings: Vec::new(),
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64, samples: u64, seed: u64) -> Self {
        Estimate {
            value,
            std_error,
            method: EstimateMethod::MonteCarlo,
            effort: samples,
            seed: Some(seed),
            warnings: Vec::new(),
        }
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }

    /// Applies an affine map `a * value + b`, scaling the uncertainty.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Estimate {
            value: a * self.value + b,
            std_error: a.abs() * self.std_error,
            ..self.clone()
        }
    }

    /// Combines independent estimates with `value = f(values)`; the standard
    /// error is the root-sum-square of the weighted inputs.
    pub fn combine(parts: &[(&Estimate, f64)], value: f64) -> Self {
        let std_error = parts
            .iter()
            .map(|(e, w)| (w * e.std_error).powi(2))
            .sum::<f64>()
            .sqrt();
        let method = if parts.iter().any(|(e, _)| e.method == EstimateMethod::MonteCarlo) {
            EstimateMethod::MonteCarlo
        } else if parts.iter().any(|(e, _)| e.method == EstimateMethod::Quadrature) {
            EstimateMethod::Quadrature
        } else {
            EstimateMethod::ClosedForm
        };
        let effort = parts.iter().map(|(e, _)| e.effort).sum();
        let seed = parts.iter().find_map(|(e, _)| e.seed);
        let mut warnings: Vec<String> = Vec::new();
        for (e, _) in parts {
            for w in &e.warnings {
                if !warnings.contains(w) {
                    warnings.push(w.clone());
                }
            }
        }
        Estimate {
            value,
            std_error,
            method,
            effort,
            seed,
            warnings,
        }
    }

    /// True when `self` and `other` agree within `k` combined standard errors
    /// or the absolute floor `abs`, whichever is larger.
    pub fn agrees_with(&self, other: &Estimate, k: f64, abs: f64) -> bool {
        let se = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        (self.value - other.value).abs() <= (k * se).max(abs)
    }
}

/// Tolerances and sampling controls shared by all operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub quad_tol: f64,
    pub mc_samples: usize,
    pub seed: u64,
    /// Step ladder for curvature measurements, in units of the
    /// characteristic parameter scale.
    pub curvature_ladder: Vec<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            quad_tol: 1e-9,
            mc_samples: 1_000_000,
            seed: 0x5eed_f0a1,
            curvature_ladder: vec![0.16, 0.08, 0.04, 0.02],
        }
    }
}

impl Numerics {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.mc_samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn quad(&self) -> QuadOptions {
        QuadOptions::new(self.quad_tol)
    }
}
