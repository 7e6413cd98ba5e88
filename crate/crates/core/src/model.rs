//! Parametric data models `pr(g|θ)` with exact derivatives and samplers.

use crate::error::{FomError, Result};
use crate::numerics::special::ln_gamma;
use crate::numerics::{integrate_with_breaks, sample_blocks, Estimate, QuadOptions, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Half-width, in standard deviations, of the data window used for
/// quadrature over continuous data.
const DATA_WINDOW: f64 = 12.0;

/// Tail mass allowed beyond the Poisson summation cut-off.
const POISSON_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    /// `g ~ Normal(θ, σ²)`.
    GaussianLocation { sigma: f64 },
    /// `g ~ Normal(0, θ²)`, `θ > 0`.
    GaussianScale,
    /// `g ~ Poisson(θ)`, `θ > 0`.
    PoissonRate,
    /// `g ~ Normal(θ, σ² I)` with `θ, g ∈ R^dim`.
    GaussianLocationVector { sigma: f64, dim: usize },
}

/// Log-density and parameter derivatives at one `(g, θ)` for scalar families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDerivatives {
    pub log_pdf: f64,
    pub score: f64,
    pub curvature: f64,
    /// `pr'(g|θ) / pr(g|θ)`; equals the score.
    pub lr_d1: f64,
    /// `pr''(g|θ) / pr(g|θ)`; equals curvature plus score squared.
    pub lr_d2: f64,
}

impl ModelDerivatives {
    fn new(log_pdf: f64, score: f64, curvature: f64) -> Self {
        ModelDerivatives {
            log_pdf,
            score,
            curvature,
            lr_d1: score,
            lr_d2: curvature + score * score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDerivatives {
    pub log_pdf: f64,
    pub score: Vec<f64>,
    pub curvature: Vec<Vec<f64>>,
}

/// Where a scalar family's data live, for quadrature or summation.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpan {
    Continuous { breaks: Vec<f64> },
    Counts { lo: u64, hi: u64 },
}

impl Model {
    pub fn gaussian_location(sigma: f64) -> Result<Self> {
        let m = Model::GaussianLocation { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian_location_vector(sigma: f64, dim: usize) -> Result<Self> {
        let m = Model::GaussianLocationVector { sigma, dim };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::GaussianLocation { sigma } | Model::GaussianLocationVector { sigma, .. }
                if !(sigma.is_finite() && sigma > 0.0) =>
            {
                Err(FomError::config("model.sigma", format!("sigma must be positive, got {sigma}")))
            }
            Model::GaussianLocationVector { dim: 0, .. } => {
                Err(FomError::config("model.dim", "dimension must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Model::GaussianLocation { .. } => "gaussian_location",
            Model::GaussianScale => "gaussian_scale",
            Model::PoissonRate => "poisson_rate",
            Model::GaussianLocationVector { .. } => "gaussian_location_vector",
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Model::GaussianLocationVector { dim, .. } => *dim,
            _ => 1,
        }
    }

    pub fn data_dim(&self) -> usize {
        self.param_dim()
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, Model::GaussianLocationVector { .. })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Model::PoissonRate)
    }

    fn require_scalar(&self) -> Result<()> {
        if self.is_vector() {
            Err(FomError::config("model.family", "operation needs a scalar-parameter family"))
        } else {
            Ok(())
        }
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let ok = match self {
            Model::GaussianLocation { .. } | Model::GaussianLocationVector { .. } => theta.is_finite(),
            Model::GaussianScale | Model::PoissonRate => theta.is_finite() && theta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(FomError::domain(format!(
                "theta = {theta} is not admissible for {}",
                self.family_name()
            )))
        }
    }

    pub fn admits(&self, theta: f64) -> bool {
        self.check_theta(theta).is_ok()
    }

    pub fn check_data(&self, g: f64) -> Result<()> {
        let ok = match self {
            Model::PoissonRate => g >= 0.0 && g.fract() == 0.0 && g.is_finite(),
            _ => g.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(FomError::domain(format!("data value {g} outside the support of {}", self.family_name())))
        }
    }

    /// Log-density for scalar families without argument checks.
    pub fn log_pdf(&self, g: f64, theta: f64) -> f64 {
        match *self {
            Model::GaussianLocation { sigma } | Model::GaussianLocationVector { sigma, .. } => {
                let z = (g - theta) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
            }
            Model::GaussianScale => {
                let z = g / theta;
                -0.5 * z * z - theta.ln() - 0.5 * (2.0 * PI).ln()
            }
            Model::PoissonRate => g * theta.ln() - theta - ln_gamma(g + 1.0),
        }
    }

    /// Exact log-density, score, curvature and likelihood-ratio derivatives.
    pub fn eval_derivatives(&self, g: f64, theta: f64) -> Result<ModelDerivatives> {
        self.require_scalar()?;
        self.check_theta(theta)?;
        self.check_data(g)?;
        let lp = self.log_pdf(g, theta);
        let d = match *self {
            Model::GaussianLocation { sigma } => {
                let s2 = sigma * sigma;
                ModelDerivatives::new(lp, (g - theta) / s2, -1.0 / s2)
            }
            Model::GaussianScale => {
                let t2 = theta * theta;
                ModelDerivatives::new(lp, -1.0 / theta + g * g / (t2 * theta), 1.0 / t2 - 3.0 * g * g / (t2 * t2))
            }
            Model::PoissonRate => ModelDerivatives::new(lp, g / theta - 1.0, -g / (theta * theta)),
            Model::GaussianLocationVector { .. } => unreachable!(),
        };
        Ok(d)
    }

    /// Score only; unchecked.
    pub fn score(&self, g: f64, theta: f64) -> f64 {
        match *self {
            Model::GaussianLocation { sigma } | Model::GaussianLocationVector { sigma, .. } => {
                (g - theta) / (sigma * sigma)
            }
            Model::GaussianScale => -1.0 / theta + g * g / (theta * theta * theta),
            Model::PoissonRate => g / theta - 1.0,
        }
    }

    /// Closed-form Fisher information `F(θ)` (per component for the vector family).
    pub fn fisher_closed_form(&self, theta: f64) -> f64 {
        match *self {
            Model::GaussianLocation { sigma } | Model::GaussianLocationVector { sigma, .. } => {
                1.0 / (sigma * sigma)
            }
            Model::GaussianScale => 2.0 / (theta * theta),
            Model::PoissonRate => 1.0 / theta,
        }
    }

    /// Parameter scale over which the likelihood changes appreciably, `1/sqrt(F(θ))`.
    pub fn theta_scale(&self, theta: f64) -> f64 {
        1.0 / self.fisher_closed_form(theta).sqrt()
    }

    /// Maximum-likelihood estimate from a single observation, where it is
    /// unbiased (location and rate families).
    pub fn mle(&self, g: f64) -> Result<f64> {
        match self {
            Model::GaussianLocation { .. } | Model::PoissonRate => Ok(g),
            _ => Err(FomError::Precondition(format!(
                "no unbiased closed-form MLE shipped for {}",
                self.family_name()
            ))),
        }
    }

    pub fn sample_one(&self, rng: &mut Rng, theta: f64) -> f64 {
        match *self {
            Model::GaussianLocation { sigma } | Model::GaussianLocationVector { sigma, .. } => {
                theta + sigma * rng.sample::<f64, _>(StandardNormal)
            }
            Model::GaussianScale => theta * rng.sample::<f64, _>(StandardNormal),
            Model::PoissonRate => Poisson::new(theta)
                .map(|p| p.sample(rng))
                .unwrap_or(f64::NAN),
        }
    }

    /// `n` independent draws from `pr(g|θ)`, deterministic in `seed`.
    pub fn sample(&self, theta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.require_scalar()?;
        self.check_theta(theta)?;
        if n == 0 {
            return Err(FomError::config("n", "sample count must be at least 1"));
        }
        let m = *self;
        Ok(sample_blocks(move |rng: &mut Rng| m.sample_one(rng, theta), n, seed))
    }

    // ---- vector family ----

    fn check_vector(&self, g: &[f64], theta: &[f64]) -> Result<f64> {
        match *self {
            Model::GaussianLocationVector { sigma, dim } => {
                if g.len() != dim || theta.len() != dim {
                    return Err(FomError::config(
                        "model.dim",
                        format!("expected length {dim}, got data {} and theta {}", g.len(), theta.len()),
                    ));
                }
                if g.iter().chain(theta).any(|v| !v.is_finite()) {
                    return Err(FomError::domain("vector data and parameters must be finite"));
                }
                Ok(sigma)
            }
            _ => Err(FomError::config("model.family", "operation needs the vector family")),
        }
    }

    pub fn log_pdf_vec(&self, g: &[f64], theta: &[f64]) -> f64 {
        g.iter().zip(theta).map(|(&gi, &ti)| self.log_pdf(gi, ti)).sum()
    }

    pub fn eval_derivatives_vec(&self, g: &[f64], theta: &[f64]) -> Result<VectorDerivatives> {
        let sigma = self.check_vector(g, theta)?;
        let s2 = sigma * sigma;
        let dim = g.len();
        let curvature = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { -1.0 / s2 } else { 0.0 }).collect())
            .collect();
        Ok(VectorDerivatives {
            log_pdf: self.log_pdf_vec(g, theta),
            score: g.iter().zip(theta).map(|(gi, ti)| (gi - ti) / s2).collect(),
            curvature,
        })
    }

    pub fn sample_one_vec(&self, rng: &mut Rng, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|&t| self.sample_one(rng, t)).collect()
    }

    pub fn sample_vec(&self, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.check_vector(theta, theta)?;
        if n == 0 {
            return Err(FomError::config("n", "sample count must be at least 1"));
        }
        let m = *self;
        let theta = theta.to_vec();
        Ok(sample_blocks(move |rng: &mut Rng| m.sample_one_vec(rng, &theta), n, seed))
    }

    // ---- data-space integration ----

    /// Data region that carries all but negligible mass under every `θ` in `thetas`.
    pub fn data_span(&self, thetas: &[f64]) -> Result<DataSpan> {
        self.require_scalar()?;
        if thetas.is_empty() {
            return Err(FomError::config("theta", "need at least one parameter value"));
        }
        for &t in thetas {
            self.check_theta(t)?;
        }
        let lo_t = thetas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi_t = thetas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(match *self {
            Model::GaussianLocation { sigma } | Model::GaussianLocationVector { sigma, .. } => {
                let mut breaks = vec![lo_t - DATA_WINDOW * sigma];
                breaks.extend(sorted_unique(thetas));
                breaks.push(hi_t + DATA_WINDOW * sigma);
                DataSpan::Continuous { breaks }
            }
            Model::GaussianScale => {
                let w = DATA_WINDOW * hi_t;
                let mut pts: Vec<f64> = thetas.iter().flat_map(|&t| [-t, t]).collect();
                pts.push(0.0);
                let mut breaks = vec![-w];
                breaks.extend(sorted_unique(&pts));
                breaks.push(w);
                DataSpan::Continuous { breaks }
            }
            Model::PoissonRate => DataSpan::Counts {
                lo: poisson_lower(lo_t),
                hi: poisson_upper(hi_t),
            },
        })
    }

    /// `∫ h(g) dg` (or `Σ_g h(g)` for counts) over the span of `thetas`.
    pub fn integrate_data<H: Fn(f64) -> f64>(&self, thetas: &[f64], h: H, tol: f64) -> Result<Estimate> {
        match self.data_span(thetas)? {
            DataSpan::Continuous { breaks } => integrate_with_breaks(h, &breaks, QuadOptions::new(tol)),
            DataSpan::Counts { lo, hi } => {
                let mut sum = 0.0;
                let mut comp = 0.0;
                for k in lo..=hi {
                    let v = h(k as f64);
                    if !v.is_finite() {
                        return Err(FomError::data(format!("summand not finite at g = {k} ({v})")));
                    }
                    // Kahan summation
                    let y = v - comp;
                    let t = sum + y;
                    comp = (t - sum) - y;
                    sum = t;
                }
                Ok(Estimate::quadrature(sum, tol, hi - lo + 1))
            }
        }
    }

    /// `⟨f(g)⟩_{g|θ}` by quadrature or exact summation.
    pub fn expect<F: Fn(f64) -> f64>(&self, theta: f64, f: F, tol: f64) -> Result<Estimate> {
        self.integrate_data(&[theta], |g| self.log_pdf(g, theta).exp() * f(g), tol)
    }
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Chernoff bound on `P(X ≥ k)` for `X ~ Poisson(λ)`, `k > λ`.
fn poisson_upper_tail_bound(lambda: f64, k: f64) -> f64 {
    (-lambda + k - k * (k / lambda).ln()).exp()
}

/// Summation cut-off: `λ + 40 sqrt(λ)`, extended until the tail is certified below 1e-12.
pub fn poisson_upper(lambda: f64) -> u64 {
    let mut k = (lambda + 40.0 * lambda.sqrt()).ceil().max(1.0);
    while poisson_upper_tail_bound(lambda, k + 1.0) > POISSON_TAIL {
        k += 1.0;
    }
    k as u64
}

fn poisson_lower(lambda: f64) -> u64 {
    let lo = lambda - 40.0 * lambda.sqrt();
    if lo <= 0.0 {
        0
    } else {
        lo.floor() as u64
    }
}
