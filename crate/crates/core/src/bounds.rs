//! Posterior quantities, estimator EMSE, and the CRB, van Trees and
//! Ziv-Zakai lower bounds.

use crate::error::{FomError, Result};
use crate::fisher::{bayesian_fi, fisher_scalar, FisherForm};
use crate::model::{DataSpan, Model};
use crate::numerics::special::{ln_gamma, log_add_exp};
use crate::numerics::{
    derive_seed, integrate_with_breaks, mc_means, Estimate, EstimateMethod, Method, Numerics, QuadOptions,
    Rng,
};
use crate::observer::{mpe_task, DetectionTask};
use crate::prior::{Prior, PriorGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Evidence below `e^-700` is treated as incompatible with the prior.
const LN_EVIDENCE_FLOOR: f64 = -700.0;

/// Prior quadrature grid fine enough to resolve the likelihood, for
/// posterior averages at any data point.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    model: Model,
    prior: Prior,
    grid: PriorGrid,
    ln_w: Vec<f64>,
    ln_theta: Vec<f64>,
}

impl PosteriorGrid {
    pub fn new(model: &Model, prior: &Prior) -> Result<Self> {
        if model.is_vector() {
            return Err(FomError::config("model.family", "posterior machinery is scalar-only"));
        }
        prior.check_model(model)?;
        let m = *model;
        let grid = prior.grid_resolving(|t| if m.admits(t) { m.theta_scale(t) } else { f64::INFINITY });
        let ln_w = grid.weights.iter().map(|w| w.ln()).collect();
        let ln_theta = grid.nodes.iter().map(|t| t.ln()).collect();
        Ok(PosteriorGrid {
            model: *model,
            prior: *prior,
            grid,
            ln_w,
            ln_theta,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn grid(&self) -> &PriorGrid {
        &self.grid
    }

    fn log_likelihoods(&self, g: f64) -> Vec<f64> {
        match self.model {
            Model::PoissonRate => {
                let c = ln_gamma(g + 1.0);
                self.grid
                    .nodes
                    .iter()
                    .zip(&self.ln_theta)
                    .map(|(t, lt)| g * lt - t - c)
                    .collect()
            }
            m => self.grid.nodes.iter().map(|&t| m.log_pdf(g, t)).collect(),
        }
    }

    /// `ln pr(g)` and the normalised posterior weights at the grid nodes.
    pub fn posterior_weights(&self, g: f64) -> Result<(f64, Vec<f64>)> {
        let lj: Vec<f64> = self
            .log_likelihoods(g)
            .iter()
            .zip(&self.ln_w)
            .map(|(l, w)| l + w)
            .collect();
        let ln_ev = lj.iter().cloned().fold(f64::NEG_INFINITY, log_add_exp);
        if !(ln_ev > LN_EVIDENCE_FLOOR) {
            return Err(FomError::data(format!(
                "evidence pr(g) underflows at g = {g} (ln pr(g) = {ln_ev}); data incompatible with the prior"
            )));
        }
        Ok((ln_ev, lj.iter().map(|l| (l - ln_ev).exp()).collect()))
    }

    /// `ln pr(θ|g)` given `ln pr(g)`.
    pub fn log_posterior(&self, theta: f64, g: f64, ln_evidence: f64) -> f64 {
        self.model.log_pdf(g, theta) + self.prior.log_pdf(theta) - ln_evidence
    }

    /// `d/dθ ln pr(θ|g)`: the evidence does not depend on `θ`.
    pub fn log_posterior_score(&self, g: f64, theta: f64) -> f64 {
        self.model.score(g, theta) + self.prior.score(theta)
    }

    /// `∫ h(g) dg` (or a sum over counts) over data reachable from the prior's
    /// truncated support, with breakpoints at the grid's panel edges.
    pub fn integrate_over_data<H: Fn(f64) -> f64>(&self, h: H, tol: f64) -> Result<Estimate> {
        let edges: Vec<f64> = self.grid.edges.iter().cloned().filter(|&t| self.model.admits(t)).collect();
        self.model.integrate_data(&edges, h, tol)
    }
}

/// Posterior summary at one data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub g: f64,
    pub ln_evidence: f64,
    pub evidence: Estimate,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// `∫ pr(θ|g) dθ` by an independent adaptive quadrature.
    pub normalization: Estimate,
}

pub fn posterior_stats(model: &Model, prior: &Prior, g: f64, num: &Numerics) -> Result<Posterior> {
    model.check_data(g)?;
    let post = PosteriorGrid::new(model, prior)?;
    posterior_on_grid(&post, g, num)
}

fn posterior_on_grid(post: &PosteriorGrid, g: f64, num: &Numerics) -> Result<Posterior> {
    let (ln_ev, w) = post.posterior_weights(g)?;
    let mean: f64 = post.nodes().iter().zip(&w).map(|(t, wi)| wi * t).sum();
    let second: f64 = post.nodes().iter().zip(&w).map(|(t, wi)| wi * t * t).sum();
    let var: f64 = post.nodes().iter().zip(&w).map(|(t, wi)| wi * (t - mean).powi(2)).sum();
    let edges = &post.grid().edges;
    let normalization = integrate_with_breaks(
        |t| {
            if post.prior.contains(t) && post.model.admits(t) {
                post.log_posterior(t, g, ln_ev).exp()
            } else {
                0.0
            }
        },
        edges,
        QuadOptions::new(num.quad_tol),
    )?;
    Ok(Posterior {
        g,
        ln_evidence: ln_ev,
        evidence: Estimate::quadrature(ln_ev.exp(), num.quad_tol, post.nodes().len() as u64),
        mean,
        second_moment: second,
        variance: var,
        normalization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PosteriorMean,
    Mle,
}

fn conjugate(model: &Model, prior: &Prior) -> Option<(f64, f64)> {
    match (model, prior) {
        (Model::GaussianLocation { sigma }, Prior::Gaussian { sd, .. }) => Some((*sigma, *sd)),
        _ => None,
    }
}

fn emse_closed_form(model: &Model, prior: &Prior, est: Estimator) -> Option<f64> {
    match est {
        Estimator::PosteriorMean => conjugate(model, prior).map(|(s, p)| (s * s * p * p) / (s * s + p * p)),
        Estimator::Mle => match model {
            Model::GaussianLocation { sigma } => Some(sigma * sigma),
            Model::PoissonRate => Some(prior.mean()),
            _ => None,
        },
    }
}

/// Ensemble mean squared error `⟨⟨(θ̂(g) − θ)²⟩_{g|θ}⟩_θ`.
pub fn emse(model: &Model, prior: &Prior, estimator: Estimator, method: Method, num: &Numerics) -> Result<Estimate> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "EMSE is computed for scalar parameters"));
    }
    prior.check_model(model)?;
    if estimator == Estimator::Mle {
        model.mle(0.0)?;
    }
    let closed = emse_closed_form(model, prior, estimator);
    match method.resolve(closed.is_some(), true)? {
        EstimateMethod::ClosedForm => Ok(Estimate::closed_form(closed.unwrap_or(f64::NAN))),
        EstimateMethod::Quadrature => {
            // ∫ pr(g) ⟨(θ̂(g) − θ)²⟩_{θ|g} dg
            let post = PosteriorGrid::new(model, prior)?;
            let m = *model;
            let mut e = post.integrate_over_data(
                |g| match post.posterior_weights(g) {
                    Ok((ln_ev, w)) => {
                        let nodes = post.nodes();
                        let est = match estimator {
                            Estimator::PosteriorMean => nodes.iter().zip(&w).map(|(t, wi)| wi * t).sum(),
                            Estimator::Mle => m.mle(g).unwrap_or(f64::NAN),
                        };
                        ln_ev.exp() * nodes.iter().zip(&w).map(|(t, wi)| wi * (est - t).powi(2)).sum::<f64>()
                    }
                    Err(_) => 0.0,
                },
                num.quad_tol,
            )?;
            e.effort *= post.nodes().len() as u64;
            Ok(e)
        }
        _ => {
            let post = match estimator {
                Estimator::PosteriorMean => Some(PosteriorGrid::new(model, prior)?),
                Estimator::Mle => None,
            };
            let m = *model;
            let p = *prior;
            let seed = derive_seed(num.seed, 0xe35e);
            mc_means(
                move |rng: &mut Rng| {
                    let t = p.sample_one(rng);
                    (t, m.sample_one(rng, t))
                },
                |&(t, g): &(f64, f64), out: &mut [f64]| {
                    let est = match &post {
                        Some(pg) => pg
                            .posterior_weights(g)
                            .map(|(_, w)| pg.nodes().iter().zip(&w).map(|(a, b)| a * b).sum())
                            .unwrap_or(f64::NAN),
                        None => m.mle(g).unwrap_or(f64::NAN),
                    };
                    out[0] = (est - t).powi(2);
                },
                1,
                num.mc_samples,
                seed,
            )
            .map(|mut v| v.remove(0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Crb,
    VanTrees,
    ZivZakaiStandard,
    ZivZakaiExpectation,
}

/// An error metric against a lower bound. For the CRB `emse` holds the
/// estimator's variance at the fixed `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_kind: BoundKind,
    pub emse: Estimate,
    pub bound_value: Estimate,
    pub satisfied: bool,
    pub slack: f64,
    pub method: EstimateMethod,
    pub seed: Option<u64>,
}

impl BoundReport {
    fn new(bound_kind: BoundKind, emse: Estimate, bound_value: Estimate) -> Self {
        let tol = 3.0 * (emse.std_error.powi(2) + bound_value.std_error.powi(2)).sqrt() + 1e-9;
        BoundReport {
            bound_kind,
            satisfied: emse.value >= bound_value.value - tol,
            slack: emse.value - bound_value.value,
            method: emse.method,
            seed: emse.seed.or(bound_value.seed),
            emse,
            bound_value,
        }
    }
}

/// Bias and variance of the MLE at a fixed `θ` by Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMoments {
    pub theta: f64,
    pub bias: Estimate,
    pub variance: Estimate,
}

pub fn estimator_moments(
    model: &Model,
    prior: Option<&Prior>,
    estimator: Estimator,
    theta: f64,
    num: &Numerics,
) -> Result<EstimatorMoments> {
    model.check_theta(theta)?;
    let post = match (estimator, prior) {
        (Estimator::PosteriorMean, Some(p)) => Some(PosteriorGrid::new(model, p)?),
        (Estimator::PosteriorMean, None) => {
            return Err(FomError::config("prior", "the posterior-mean estimator needs a prior"))
        }
        (Estimator::Mle, _) => {
            model.mle(0.0)?;
            None
        }
    };
    let m = *model;
    let seed = derive_seed(num.seed, 0xc4b ^ theta.to_bits());
    let est = mc_means(
        move |rng: &mut Rng| m.sample_one(rng, theta),
        |&g: &f64, out: &mut [f64]| {
            let e = match &post {
                Some(pg) => pg
                    .posterior_weights(g)
                    .map(|(_, w)| pg.nodes().iter().zip(&w).map(|(a, b)| a * b).sum())
                    .unwrap_or(f64::NAN),
                None => m.mle(g).unwrap_or(f64::NAN),
            };
            out[0] = e - theta;
            out[1] = (e - theta).powi(2);
        },
        2,
        num.mc_samples,
        seed,
    )?;
    let bias = est[0].clone();
    // Var = E[(θ̂−θ)²] − bias²; the bias term is within noise for unbiased estimators
    let variance = est[1].affine(1.0, -bias.value * bias.value);
    Ok(EstimatorMoments { theta, bias, variance })
}

/// Samples used to screen for bias around `θ` before the CRB comparison.
const BIAS_SCREEN_SAMPLES: usize = 50_000;

/// Error metric and bound of the requested kind.
///
/// The CRB needs `theta` and an estimator that is unbiased around it: the
/// bias is screened at `θ ± 1/sqrt(F(θ))` and measured at `θ` with the full
/// sample count; any value beyond 3 standard errors is a precondition error.
pub fn bound_report(
    model: &Model,
    prior: Option<&Prior>,
    estimator: Estimator,
    kind: BoundKind,
    theta: Option<f64>,
    method: Method,
    num: &Numerics,
) -> Result<BoundReport> {
    if kind == BoundKind::Crb {
        let theta = theta.ok_or_else(|| FomError::config("theta", "the CRB needs a fixed theta"))?;
        let scale = model.theta_scale(theta);
        let screen = num.clone().with_samples(num.mc_samples.min(BIAS_SCREEN_SAMPLES));
        let biased = |m: &EstimatorMoments| m.bias.value.abs() > 3.0 * m.bias.std_error;
        let precondition = |m: &EstimatorMoments| {
            FomError::Precondition(format!(
                "estimator is biased at theta = {}: measured bias {:.6} (standard error {:.2e})",
                m.theta, m.bias.value, m.bias.std_error
            ))
        };
        for t in [theta - scale, theta + scale] {
            if model.admits(t) {
                let mom = estimator_moments(model, prior, estimator, t, &screen)?;
                if biased(&mom) {
                    return Err(precondition(&mom));
                }
            }
        }
        let mom = estimator_moments(model, prior, estimator, theta, num)?;
        if biased(&mom) {
            return Err(precondition(&mom));
        }
        let f = fisher_scalar(model, theta, Method::Auto, num)?.value;
        let bound = Estimate::closed_form(1.0 / f.value);
        return Ok(BoundReport::new(kind, mom.variance, bound));
    }
    let prior = prior.ok_or_else(|| FomError::config("prior", "Bayesian bounds need a prior"))?;
    let error = emse(model, prior, estimator, method, num)?;
    let bound = match kind {
        BoundKind::VanTrees => {
            let f = bayesian_fi(model, prior, FisherForm::ConditionalForm, Method::Auto, num)?.value;
            let v = 1.0 / f.value;
            Estimate::combine(&[(&f, v * v)], v)
        }
        BoundKind::ZivZakaiStandard => ziv_zakai(model, prior, ZzForm::Standard, Method::Auto, num)?,
        BoundKind::ZivZakaiExpectation => ziv_zakai(model, prior, ZzForm::Expectation, Method::Auto, num)?,
        BoundKind::Crb => unreachable!(),
    };
    Ok(BoundReport::new(kind, error, bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZzForm {
    /// `½ ∫₀^∞ x ∫ [pr(θ) + pr(θ+x)] P_e(θ, θ+x) dθ dx`.
    Standard,
    /// `½ ⟨∫ P_e(θ, θ̃) |θ̃ − θ| dθ̃⟩_θ`.
    Expectation,
}

/// Minimum error of the task `(θ, θ̃)` with prior-density odds; zero when
/// either point has zero prior density.
pub fn pair_error(model: &Model, prior: &Prior, theta: f64, theta_t: f64, num: &Numerics) -> Result<f64> {
    let ln_y = prior.log_odds(theta, theta_t);
    if ln_y.is_nan() || ln_y.is_infinite() {
        return Ok(0.0);
    }
    let task = DetectionTask::with_ln_odds(theta, theta_t, ln_y)?;
    Ok(mpe_task(model, &task, Method::Auto, num)?.value)
}

fn merged_breaks(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&p| p > lo && p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Ziv-Zakai lower bound on the EMSE, as printed (no valley filling).
pub fn ziv_zakai(model: &Model, prior: &Prior, form: ZzForm, method: Method, num: &Numerics) -> Result<Estimate> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "the Ziv-Zakai bound is computed for scalar parameters"));
    }
    prior.check_model(model)?;
    if method == Method::MonteCarlo || method == Method::ClosedForm {
        return Err(FomError::config("method", "the Ziv-Zakai bound is evaluated by quadrature only"));
    }
    let grid = prior.grid();
    if model.is_discrete() {
        return ziv_zakai_counts(model, prior, &grid, form, num);
    }
    let (lo, hi) = (grid.truncation.lo, grid.truncation.hi);
    let edges = grid.edges.clone();
    let opts = QuadOptions::new(num.quad_tol);
    let pe = |a: f64, b: f64| pair_error(model, prior, a, b, num).unwrap_or(f64::NAN);
    let density = |t: f64| prior.log_pdf(t).exp();
    match form {
        ZzForm::Standard => {
            let x_breaks = merged_breaks(edges.iter().map(|e| e - lo).collect(), 0.0, hi - lo);
            let inner = |x: f64| -> f64 {
                if x == 0.0 {
                    return 0.0;
                }
                let breaks = merged_breaks(edges.iter().flat_map(|&e| [e, e - x]).collect(), lo - x, hi);
                match integrate_with_breaks(
                    |t| {
                        let w = density(t) + density(t + x);
                        if w == 0.0 {
                            0.0
                        } else {
                            w * pe(t, t + x)
                        }
                    },
                    &breaks,
                    opts,
                ) {
                    Ok(e) => x * e.value,
                    Err(_) => f64::NAN,
                }
            };
            let e = integrate_with_breaks(inner, &x_breaks, opts)?;
            Ok(e.affine(0.5, 0.0))
        }
        ZzForm::Expectation => {
            let per_node: Vec<Result<f64>> = grid
                .nodes
                .par_iter()
                .map(|&t| {
                    let breaks = merged_breaks(edges.iter().cloned().chain([t]).collect(), lo, hi);
                    integrate_with_breaks(|s| pe(t, s) * (s - t).abs(), &breaks, opts).map(|e| e.value)
                })
                .collect();
            let mut acc = 0.0;
            for (r, w) in per_node.into_iter().zip(&grid.weights) {
                acc += w * r?;
            }
            let mut e = Estimate::quadrature(0.5 * acc, num.quad_tol, grid.len() as u64);
            e.effort = grid.len() as u64;
            Ok(e)
        }
    }
}

/// Root of `f` in `[a, b]` given `f(a) > 0 > f(b)`, by bisection.
fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            break;
        }
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Ziv-Zakai bound for count data.
///
/// With `q_g(θ) = pr(θ) pr(g|θ)`, `[pr(θ) + pr(s)] P_e(θ, s) = Σ_g min(q_g(θ), q_g(s))`.
/// Each `q_g` is unimodal for the supported model/prior pairs, so every
/// count contributes a single kink, located by bisection and passed to the
/// quadrature as a breakpoint. Both forms integrate over `[lo, hi]²` of the
/// truncated prior.
fn ziv_zakai_counts(model: &Model, prior: &Prior, grid: &PriorGrid, form: ZzForm, num: &Numerics) -> Result<Estimate> {
    let (lo, hi) = (grid.truncation.lo, grid.truncation.hi);
    let (g_lo, g_hi) = match model.data_span(&[lo, hi])? {
        DataSpan::Counts { lo, hi } => (lo, hi),
        DataSpan::Continuous { .. } => unreachable!("count model"),
    };
    let lq = |g: f64, t: f64| -> f64 {
        if t < lo || t > hi {
            f64::NEG_INFINITY
        } else {
            prior.log_pdf(t) + model.log_pdf(g, t)
        }
    };
    // marginal pr(g) and the grid node closest to each q_g's mode
    let counts: Vec<(f64, f64, f64)> = (g_lo..=g_hi)
        .into_par_iter()
        .map(|k| {
            let g = k as f64;
            let mut best = (f64::NEG_INFINITY, lo);
            let mut marginal = 0.0;
            for (&t, &w) in grid.nodes.iter().zip(&grid.weights) {
                let l = model.log_pdf(g, t);
                marginal += w * l.exp();
                let v = prior.log_pdf(t) + l;
                if v > best.0 {
                    best = (v, t);
                }
            }
            (g, marginal, best.1)
        })
        .collect();
    let span = hi - lo;
    // drop counts whose whole contribution is far below the tolerance
    let cut = 1e-3 * num.quad_tol / (span * span);
    let active: Vec<(f64, f64)> = counts.iter().filter(|c| c.1 > cut).map(|c| (c.0, c.2)).collect();
    let n_active = active.len().max(1) as f64;
    match form {
        ZzForm::Standard => {
            let inner = |x: f64| -> Result<f64> {
                if x <= 0.0 || x >= span {
                    return Ok(0.0);
                }
                let (a, b) = (lo, hi - x);
                let mut total = 0.0;
                for &(g, _) in &active {
                    let psi = |t: f64| lq(g, t + x) - lq(g, t);
                    let mut breaks = vec![a, b];
                    let (pa, pb) = (psi(a), psi(b));
                    if pa > 0.0 && pb < 0.0 {
                        breaks.insert(1, bisect(psi, a, b));
                    }
                    let opts = QuadOptions::new(num.quad_tol / (span * n_active));
                    let v = integrate_with_breaks(|t| lq(g, t).min(lq(g, t + x)).exp(), &breaks, opts)?;
                    total += v.value;
                }
                Ok(x * total)
            };
            let x_breaks = merged_breaks(grid.edges.iter().map(|e| e - lo).collect(), 0.0, span);
            let e = integrate_with_breaks(|x| inner(x).unwrap_or(f64::NAN), &x_breaks, QuadOptions::new(num.quad_tol))?;
            Ok(e.affine(0.5, 0.0))
        }
        ZzForm::Expectation => {
            let n = grid.len() as f64;
            let per_node: Vec<Result<f64>> = grid
                .nodes
                .par_iter()
                .zip(&grid.weights)
                .map(|(&t, &w)| {
                    let lp_t = prior.log_pdf(t);
                    let opts = QuadOptions::new((num.quad_tol / (n * w.max(f64::MIN_POSITIVE) * n_active)).min(1.0));
                    let mut total = 0.0;
                    for &(g, mode) in &active {
                        let lq_t = lq(g, t);
                        if lq_t - lp_t + 2.0 * span.ln() < cut.ln() {
                            continue;
                        }
                        let mut breaks = vec![lo, t, hi];
                        let f = |s: f64| lq(g, s) - lq_t;
                        if f(mode) > 0.0 {
                            if mode > t && f(hi) < 0.0 {
                                breaks.push(bisect(f, mode, hi));
                            } else if mode < t && f(lo) < 0.0 {
                                breaks.push(bisect(|s| -f(s), lo, mode));
                            }
                        }
                        breaks.sort_by(f64::total_cmp);
                        breaks.dedup();
                        let v = integrate_with_breaks(
                            |s| {
                                let num = lq_t.min(lq(g, s));
                                let den = log_add_exp(lp_t, prior.log_pdf(s));
                                if num == f64::NEG_INFINITY {
                                    0.0
                                } else {
                                    (num - den).exp() * (s - t).abs()
                                }
                            },
                            &breaks,
                            opts,
                        )?;
                        total += v.value;
                    }
                    Ok(w * total)
                })
                .collect();
            let mut acc = 0.0;
            for r in per_node {
                acc += r?;
            }
            Ok(Estimate::quadrature(0.5 * acc, num.quad_tol, grid.len() as u64))
        }
    }
}
