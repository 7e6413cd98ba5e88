//! Priors `pr(θ)`: log-derivatives, prior odds, sampling and quadrature grids.

use crate::error::{FomError, Result};
use crate::model::Model;
use crate::numerics::special::{normal_ln_pdf, sigmoid};
use crate::numerics::{gauss_legendre, sample_blocks, Rng};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Half-width in standard units of the truncation used for prior averages;
/// leaves about 2e-19 of the mass outside, so moderately tilted integrands
/// (prior scores, inverse moments) are still captured.
pub const TRUNCATION_Z: f64 = 9.0;

const GL_ORDER: usize = 20;
const BASE_PANELS: usize = 16;
const MAX_PANELS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Prior {
    Gaussian { mean: f64, sd: f64 },
    /// `cos²(π(θ-c)/(2w)) / w` on `(c-w, c+w)`: smooth, compactly supported,
    /// vanishing at both ends.
    ScaledCosineSquaredBump { center: f64, half_width: f64 },
    /// `ln θ ~ Normal(mu, s²)`.
    Lognormal { mu: f64, s: f64 },
}

/// Values of the prior at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorDerivatives {
    pub log_pdf: f64,
    /// `pr'(θ) / pr(θ)`.
    pub score: f64,
    /// `pr''(θ) / pr(θ)`.
    pub ratio_d2: f64,
}

/// Prior odds `y = pr(θ₀)/pr(θ₁)` and the hypothesis probabilities it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorOdds {
    pub y: f64,
    pub ln_y: f64,
    pub pr0: f64,
    pub pr1: f64,
}

impl PriorOdds {
    pub fn from_ln(ln_y: f64) -> Self {
        PriorOdds {
            y: ln_y.exp(),
            ln_y,
            pr0: sigmoid(ln_y),
            pr1: sigmoid(-ln_y),
        }
    }
}

impl Prior {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Prior::from_params("gaussian", &[mean, sd])
    }

    pub fn bump(center: f64, half_width: f64) -> Result<Self> {
        Prior::from_params("scaled_cosine_squared_bump", &[center, half_width])
    }

    pub fn lognormal(mu: f64, s: f64) -> Result<Self> {
        Prior::from_params("lognormal", &[mu, s])
    }

    /// Builds a prior from a family name and its hyper-parameter list
    /// (`[mean, sd]`, `[center, half_width]` or `[mu, s]`).
    pub fn from_params(family: &str, params: &[f64]) -> Result<Self> {
        let need2 = || -> Result<(f64, f64)> {
            match params {
                [a, b] if a.is_finite() && b.is_finite() && *b > 0.0 => Ok((*a, *b)),
                _ => Err(FomError::config(
                    "prior.params",
                    format!("{family} needs two finite parameters with a positive scale, got {params:?}"),
                )),
            }
        };
        match family {
            "gaussian" => need2().map(|(mean, sd)| Prior::Gaussian { mean, sd }),
            "scaled_cosine_squared_bump" => {
                need2().map(|(center, half_width)| Prior::ScaledCosineSquaredBump { center, half_width })
            }
            "lognormal" => need2().map(|(mu, s)| Prior::Lognormal { mu, s }),
            other => Err(FomError::config("prior.family", format!("unknown prior family `{other}`"))),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Prior::Gaussian { .. } => "gaussian",
            Prior::ScaledCosineSquaredBump { .. } => "scaled_cosine_squared_bump",
            Prior::Lognormal { .. } => "lognormal",
        }
    }

    pub fn params(&self) -> [f64; 2] {
        match *self {
            Prior::Gaussian { mean, sd } => [mean, sd],
            Prior::ScaledCosineSquaredBump { center, half_width } => [center, half_width],
            Prior::Lognormal { mu, s } => [mu, s],
        }
    }

    /// Open support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Prior::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Prior::ScaledCosineSquaredBump { center, half_width } => (center - half_width, center + half_width),
            Prior::Lognormal { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        let (lo, hi) = self.support();
        theta.is_finite() && theta > lo && theta < hi
    }

    /// Log-density; `-inf` outside the support.
    pub fn log_pdf(&self, theta: f64) -> f64 {
        if !self.contains(theta) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Gaussian { mean, sd } => normal_ln_pdf((theta - mean) / sd) - sd.ln(),
            Prior::ScaledCosineSquaredBump { center, half_width } => {
                let a = PI * (theta - center) / (2.0 * half_width);
                2.0 * a.cos().ln() - half_width.ln()
            }
            Prior::Lognormal { mu, s } => {
                let l = theta.ln();
                normal_ln_pdf((l - mu) / s) - s.ln() - l
            }
        }
    }

    /// `d/dθ ln pr(θ)`; unchecked.
    pub fn score(&self, theta: f64) -> f64 {
        match *self {
            Prior::Gaussian { mean, sd } => -(theta - mean) / (sd * sd),
            Prior::ScaledCosineSquaredBump { center, half_width } => {
                let a = PI * (theta - center) / (2.0 * half_width);
                -(PI / half_width) * a.tan()
            }
            Prior::Lognormal { mu, s } => -(1.0 + (theta.ln() - mu) / (s * s)) / theta,
        }
    }

    fn log_curvature(&self, theta: f64) -> f64 {
        match *self {
            Prior::Gaussian { sd, .. } => -1.0 / (sd * sd),
            Prior::ScaledCosineSquaredBump { center, half_width } => {
                let a = PI * (theta - center) / (2.0 * half_width);
                let c = a.cos();
                -PI * PI / (2.0 * half_width * half_width * c * c)
            }
            Prior::Lognormal { mu, s } => {
                let t2 = theta * theta;
                1.0 / t2 - (1.0 - theta.ln() + mu) / (s * s * t2)
            }
        }
    }

    pub fn eval(&self, theta: f64) -> Result<PriorDerivatives> {
        if !self.contains(theta) {
            return Err(FomError::domain(format!(
                "theta = {theta} outside the support of the {} prior",
                self.family_name()
            )));
        }
        let score = self.score(theta);
        Ok(PriorDerivatives {
            log_pdf: self.log_pdf(theta),
            score,
            ratio_d2: self.log_curvature(theta) + score * score,
        })
    }

    /// Log prior odds `ln pr(θ₀) - ln pr(θ₁)`, possibly infinite; unchecked.
    pub fn log_odds(&self, theta0: f64, theta1: f64) -> f64 {
        if theta0 == theta1 {
            return 0.0;
        }
        let (a, b) = (self.log_pdf(theta0), self.log_pdf(theta1));
        match (a.is_finite(), b.is_finite()) {
            (true, true) => a - b,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => f64::NAN,
        }
    }

    /// Prior odds for the task `(θ₀, θ₁)`; zero density at either point is an error.
    pub fn odds(&self, theta0: f64, theta1: f64) -> Result<PriorOdds> {
        for t in [theta0, theta1] {
            if !self.contains(t) {
                return Err(FomError::domain(format!(
                    "prior density is zero at theta = {t}; prior odds undefined"
                )));
            }
        }
        Ok(PriorOdds::from_ln(self.log_odds(theta0, theta1)))
    }

    /// Rejects priors that put mass where the model is not defined
    /// (e.g. a Gaussian prior on a Poisson rate).
    pub fn check_model(&self, model: &Model) -> Result<()> {
        let (lo, _) = self.support();
        if matches!(model, Model::PoissonRate | Model::GaussianScale) && lo < 0.0 {
            return Err(FomError::config(
                "prior.family",
                format!(
                    "{} prior has mass at theta <= 0, outside the domain of {}",
                    self.family_name(),
                    model.family_name()
                ),
            ));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Prior::Gaussian { mean, .. } => mean,
            Prior::ScaledCosineSquaredBump { center, .. } => center,
            Prior::Lognormal { mu, s } => (mu + 0.5 * s * s).exp(),
        }
    }

    /// Closed-form `⟨(pr'/pr)²⟩_θ`.
    pub fn fisher_term(&self) -> f64 {
        match *self {
            Prior::Gaussian { sd, .. } => 1.0 / (sd * sd),
            Prior::ScaledCosineSquaredBump { half_width, .. } => (PI / half_width).powi(2),
            Prior::Lognormal { mu, s } => (2.0 * s * s - 2.0 * mu).exp() * (1.0 + 1.0 / (s * s)),
        }
    }

    /// A characteristic width of the prior in `θ`.
    pub fn scale(&self) -> f64 {
        match *self {
            Prior::Gaussian { sd, .. } => sd,
            Prior::ScaledCosineSquaredBump { half_width, .. } => half_width,
            Prior::Lognormal { mu, s } => {
                let m = (mu + 0.5 * s * s).exp();
                m * ((s * s).exp() - 1.0).sqrt()
            }
        }
    }

    pub fn sample_one(&self, rng: &mut Rng) -> f64 {
        match *self {
            Prior::Gaussian { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            Prior::ScaledCosineSquaredBump { center, half_width } => loop {
                // rejection from the uniform envelope
                let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
                let accept: f64 = rng.random();
                let c = (0.5 * PI * u).cos();
                if accept < c * c && u.abs() < 1.0 {
                    break center + half_width * u;
                }
            },
            Prior::Lognormal { mu, s } => (mu + s * rng.sample::<f64, _>(StandardNormal)).exp(),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(FomError::config("n", "sample count must be at least 1"));
        }
        let p = *self;
        Ok(sample_blocks(move |rng: &mut Rng| p.sample_one(rng), n, seed))
    }

    /// Integration coordinate `u` and its range: `θ = u` except for the
    /// lognormal, which is integrated in `u = ln θ`.
    fn coordinate_range(&self) -> (f64, f64) {
        match *self {
            Prior::Gaussian { mean, sd } => (mean - TRUNCATION_Z * sd, mean + TRUNCATION_Z * sd),
            Prior::ScaledCosineSquaredBump { center, half_width } => (center - half_width, center + half_width),
            Prior::Lognormal { mu, s } => (mu - TRUNCATION_Z * s, mu + TRUNCATION_Z * s),
        }
    }

    /// `(θ(u), dθ/du)`.
    fn theta_at(&self, u: f64) -> (f64, f64) {
        match self {
            Prior::Lognormal { .. } => {
                let t = u.exp();
                (t, t)
            }
            _ => (u, 1.0),
        }
    }

    /// Truncated support `[lo, hi]` used for prior averages.
    pub fn truncation(&self) -> (f64, f64) {
        let (a, b) = self.coordinate_range();
        (self.theta_at(a).0, self.theta_at(b).0)
    }

    /// Composite Gauss-Legendre grid over the truncated support.
    pub fn grid(&self) -> PriorGrid {
        PriorGrid::build(self, BASE_PANELS, None::<fn(f64) -> f64>)
    }

    /// Grid with `panels` equal panels (at least one) in the grid coordinate.
    pub fn grid_with_panels(&self, panels: usize) -> PriorGrid {
        PriorGrid::build(self, panels.max(1), None::<fn(f64) -> f64>)
    }

    /// Grid whose panels are no wider than `resolution(θ)`, e.g. the
    /// likelihood width `1/sqrt(F(θ))`, so posterior integrands are resolved.
    pub fn grid_resolving<R: Fn(f64) -> f64>(&self, resolution: R) -> PriorGrid {
        PriorGrid::build(self, BASE_PANELS, Some(resolution))
    }
}

/// Where the prior average was truncated and how much mass it captured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub lo: f64,
    pub hi: f64,
    pub captured_mass: f64,
}

/// Quadrature nodes in `θ` with weights normalised to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Panel edges in `θ`, ascending.
    pub edges: Vec<f64>,
    pub truncation: Truncation,
}

impl PriorGrid {
    fn build<R: Fn(f64) -> f64>(prior: &Prior, panels: usize, resolution: Option<R>) -> PriorGrid {
        let (ulo, uhi) = prior.coordinate_range();
        let base = (uhi - ulo) / panels as f64;
        let min_width = (uhi - ulo) / MAX_PANELS as f64;
        let width_at = |u: f64| -> f64 {
            match &resolution {
                None => base,
                Some(r) => {
                    let (t, jac) = prior.theta_at(u);
                    let s = r(t) / jac;
                    if s.is_finite() && s > 0.0 {
                        base.min(s).max(min_width)
                    } else {
                        base
                    }
                }
            }
        };
        let mut edges_u = vec![ulo];
        let mut u = ulo;
        while u < uhi {
            let mut w = width_at(u);
            w = w.min(width_at((u + w).min(uhi)));
            let next = if u + w >= uhi - 1e-12 * (uhi - ulo) { uhi } else { u + w };
            edges_u.push(next);
            u = next;
        }
        let (gx, gw) = gauss_legendre(GL_ORDER);
        let mut nodes = Vec::with_capacity(GL_ORDER * edges_u.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for e in edges_u.windows(2) {
            let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            for (x, w) in gx.iter().zip(&gw) {
                let (t, jac) = prior.theta_at(c + h * x);
                let dens = prior.log_pdf(t).exp();
                if dens > 0.0 {
                    nodes.push(t);
                    weights.push(w * h * jac * dens);
                }
            }
        }
        let mass: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= mass;
        }
        let edges: Vec<f64> = edges_u.iter().map(|&u| prior.theta_at(u).0).collect();
        let truncation = Truncation {
            lo: edges[0],
            hi: *edges.last().unwrap(),
            captured_mass: mass,
        };
        PriorGrid {
            nodes,
            weights,
            edges,
            truncation,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(θ_i)` in node order.
    pub fn average<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, w)| w * f(t)).sum()
    }
}

/// Product of independent scalar priors for vector parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPrior {
    pub components: Vec<Prior>,
}

impl ProductPrior {
    pub fn new(components: Vec<Prior>) -> Result<Self> {
        if components.is_empty() {
            return Err(FomError::config("prior", "product prior needs at least one component"));
        }
        Ok(ProductPrior { components })
    }

    pub fn iid(prior: Prior, dim: usize) -> Result<Self> {
        ProductPrior::new(vec![prior; dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.components.iter().zip(theta).map(|(p, &t)| p.log_pdf(t)).sum()
    }

    pub fn score(&self, theta: &[f64]) -> Vec<f64> {
        self.components.iter().zip(theta).map(|(p, &t)| p.score(t)).collect()
    }

    pub fn log_odds(&self, theta0: &[f64], theta1: &[f64]) -> f64 {
        let (a, b) = (self.log_pdf(theta0), self.log_pdf(theta1));
        if a.is_finite() && b.is_finite() {
            a - b
        } else if a.is_finite() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn sample_one(&self, rng: &mut Rng) -> Vec<f64> {
        self.components.iter().map(|p| p.sample_one(rng)).collect()
    }

    /// Tensor-product grid built from each component's grid with `panels`
    /// panels; returns `(θ, weight)` pairs.
    pub fn tensor_grid(&self, panels: usize) -> Vec<(Vec<f64>, f64)> {
        let grids: Vec<PriorGrid> = self.components.iter().map(|p| p.grid_with_panels(panels)).collect();
        let mut out: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for g in &grids {
            out = out
                .into_iter()
                .flat_map(|(t, w)| {
                    g.nodes.iter().zip(&g.weights).map(move |(&x, &wx)| {
                        let mut t2 = t.clone();
                        t2.push(x);
                        (t2, w * wx)
                    })
                })
                .collect();
        }
        out
    }
}
