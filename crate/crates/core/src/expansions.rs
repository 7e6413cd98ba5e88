//! Small-change expansions of detectability, conditional entropy and Shannon
//! information, checked as measured curvatures at `Δ = 0`, plus the
//! regularity identities behind them.

use crate::error::{FomError, Result};
use crate::fisher::{bayesian_fi, bayesian_fim, fisher_scalar, FisherForm};
use crate::info::{averaged_metrics, binary_entropy_ln, conditional_entropy, shannon_info, CeForm, Integrands};
use crate::model::Model;
use crate::numerics::{derive_seed, mc_means, richardson_curvature, Estimate, EstimateMethod, Method, Numerics, Rng};
use crate::observer::{reduce_vector_task, roc_auc, DetectionTask};
use crate::prior::{Prior, ProductPrior};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

/// Panels per component for the tensor prior grid of the vector claim.
const VECTOR_PANELS: usize = 4;

/// Step, in units of `1/sqrt(F)`, for first differences at `Δ = 0`.
pub const FIRST_DIFFERENCE_STEP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimId {
    DetectabilitySq,
    CeAvg,
    SiPointwise,
    SiAvg,
    CeDirectionalVector,
    HOfY,
}

impl ClaimId {
    pub const ALL: [ClaimId; 6] = [
        ClaimId::DetectabilitySq,
        ClaimId::CeAvg,
        ClaimId::SiPointwise,
        ClaimId::SiAvg,
        ClaimId::CeDirectionalVector,
        ClaimId::HOfY,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClaimId::DetectabilitySq => "detectability_sq",
            ClaimId::CeAvg => "ce_avg",
            ClaimId::SiPointwise => "si_pointwise",
            ClaimId::SiAvg => "si_avg",
            ClaimId::CeDirectionalVector => "ce_directional_vector",
            ClaimId::HOfY => "h_of_y",
        }
    }
}

/// Where the expansion is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Fixed `θ`; a prior, when given, sets the odds `y(θ, θ + Δ)`,
    /// otherwise `y = 1`.
    Point { theta: f64, prior: Option<Prior> },
    /// Average over `θ` from the prior, odds `y(θ, θ + Δ)`.
    Averaged { prior: Prior },
    /// Vector parameter under a product prior, shifted by `t·u`.
    Vector { prior: ProductPrior, direction: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub claim_id: ClaimId,
    pub grid: Vec<f64>,
    pub values: Vec<Estimate>,
    pub fitted_curvature: Estimate,
    pub predicted_curvature: f64,
    pub rel_error: f64,
    /// Half the fitted curvature: the `Δ²` coefficient of the expansion.
    pub quadratic_coefficient_fitted: f64,
    /// The `Δ²` coefficient as conventionally displayed for the claim, where
    /// one is displayed.
    pub quadratic_coefficient_paper_display: Option<f64>,
}

impl ExpansionFit {
    /// Whether the displayed coefficient matches the fitted one within
    /// `rel_tol`; `None` when nothing is displayed.
    pub fn display_consistent(&self, rel_tol: f64) -> Option<bool> {
        self.quadratic_coefficient_paper_display.map(|d| {
            let f = self.quadratic_coefficient_fitted;
            (d - f).abs() <= rel_tol * f.abs().max(d.abs())
        })
    }
}

/// `|fitted − predicted| / |predicted|`, or `|fitted|` when nothing is predicted.
pub fn relative_error(fitted: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        fitted.abs()
    } else {
        (fitted - predicted).abs() / predicted.abs()
    }
}

/// Richardson-extrapolated second derivative at 0 of a `(Δ, value)` series.
///
/// Magnitudes present with both signs use the central difference; a
/// magnitude present with one sign is treated as an even function.
pub fn fit_curvature(series: &[(f64, f64)], value_at_zero: f64) -> Result<Estimate> {
    if let Some((d, v)) = series.iter().find(|(d, v)| !d.is_finite() || !v.is_finite()) {
        return Err(FomError::data(format!("series point ({d}, {v}) is not finite")));
    }
    if !value_at_zero.is_finite() {
        return Err(FomError::data(format!("value at zero is not finite ({value_at_zero})")));
    }
    let mut mags: Vec<f64> = series.iter().filter(|(d, _)| *d != 0.0).map(|(d, _)| d.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.dedup();
    if mags.len() < 3 {
        return Err(FomError::config("grid", "need at least 3 distinct nonzero |delta| values"));
    }
    let at = |d: f64| series.iter().find(|(x, _)| *x == d).map(|(_, v)| *v);
    let diffs: Vec<f64> = mags
        .iter()
        .map(|&h| {
            let sum = match (at(h), at(-h)) {
                (Some(p), Some(m)) => p + m,
                (Some(v), None) | (None, Some(v)) => 2.0 * v,
                (None, None) => unreachable!(),
            };
            (sum - 2.0 * value_at_zero) / (h * h)
        })
        .collect();
    richardson_curvature(&mags, &diffs)
}

struct Target {
    predicted: f64,
    /// Fisher quantity whose inverse square root scales the grid.
    fisher: f64,
    display: Option<f64>,
}

fn mismatch(claim: ClaimId, need: &str) -> FomError {
    FomError::config("claim", format!("claim {} needs {need}", claim.name()))
}

fn target(model: &Model, anchor: &Anchor, claim: ClaimId, num: &Numerics) -> Result<Target> {
    match (claim, anchor) {
        (ClaimId::DetectabilitySq, Anchor::Point { theta, .. }) => {
            let f = fisher_scalar(model, *theta, Method::Auto, num)?.value.value;
            Ok(Target {
                predicted: 2.0 * f,
                fisher: f,
                display: Some(f),
            })
        }
        (ClaimId::SiPointwise, Anchor::Point { theta, .. }) => {
            let f = fisher_scalar(model, *theta, Method::Auto, num)?.value.value;
            Ok(Target {
                predicted: f / 4.0,
                fisher: f,
                display: Some(f / 4.0),
            })
        }
        (ClaimId::HOfY, Anchor::Point { theta, prior }) => {
            let prior = prior.as_ref().ok_or_else(|| mismatch(claim, "a prior"))?;
            model.check_theta(*theta)?;
            let s = prior.eval(*theta)?.score;
            Ok(Target {
                predicted: -s * s / 4.0,
                fisher: prior.fisher_term(),
                display: None,
            })
        }
        (ClaimId::CeAvg, Anchor::Averaged { prior }) => {
            let fb = bayesian_fi(model, prior, FisherForm::ConditionalForm, Method::Auto, num)?.value.value;
            Ok(Target {
                predicted: -fb / 4.0,
                fisher: fb,
                display: Some(-fb / 4.0),
            })
        }
        (ClaimId::SiAvg, Anchor::Averaged { prior }) => {
            let fb = bayesian_fi(model, prior, FisherForm::ConditionalForm, Method::Auto, num)?.value.value;
            let f = fb - prior.fisher_term();
            Ok(Target {
                predicted: f / 4.0,
                fisher: f,
                display: Some(f / 4.0),
            })
        }
        (ClaimId::CeDirectionalVector, Anchor::Vector { prior, direction }) => {
            let u = unit(direction)?;
            let q = bayesian_fim(model, prior, Method::Auto, num)?.quadratic_form(&u)?;
            Ok(Target {
                predicted: -q / 4.0,
                fisher: q,
                display: Some(-q / 4.0),
            })
        }
        (ClaimId::DetectabilitySq | ClaimId::SiPointwise | ClaimId::HOfY, _) => Err(mismatch(claim, "a fixed theta")),
        (ClaimId::CeAvg | ClaimId::SiAvg, _) => Err(mismatch(claim, "a prior to average over")),
        (ClaimId::CeDirectionalVector, _) => Err(mismatch(claim, "a product prior and a direction")),
    }
}

fn unit(direction: &[f64]) -> Result<Vec<f64>> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(FomError::config("direction", "direction must be a nonzero finite vector"));
    }
    Ok(direction.iter().map(|x| x / norm).collect())
}

fn at_delta(e: FomError, delta: f64) -> FomError {
    match e {
        FomError::Convergence { message, best } => FomError::Convergence {
            message: format!("{message} (at delta = {delta})"),
            best,
        },
        FomError::Data(m) => FomError::Data(format!("{m} (at delta = {delta})")),
        FomError::Domain(m) => FomError::Domain(format!("{m} (at delta = {delta})")),
        other => other,
    }
}

fn check_grid(model: &Model, anchor: &Anchor, grid: &[f64]) -> Result<()> {
    if let Anchor::Point { theta, prior } = anchor {
        for &d in grid {
            let t = theta + d;
            let inside = model.admits(t) && prior.as_ref().is_none_or(|p| p.contains(t));
            if !inside {
                return Err(FomError::config(
                    "curvature_ladder",
                    format!("grid point theta + delta = {t} (delta = {d}) is outside the admissible domain"),
                ));
            }
        }
    }
    Ok(())
}

fn metric(model: &Model, anchor: &Anchor, claim: ClaimId, d: f64, method: Method, num: &Numerics) -> Result<Estimate> {
    match (claim, anchor) {
        (ClaimId::DetectabilitySq, Anchor::Point { theta, .. }) => {
            let task = DetectionTask::equal_odds(*theta, theta + d)?;
            let roc = roc_auc(model, &task, method, num)?;
            let dv = roc.detectability;
            // d = 2 erfinv(2 AUC − 1), so dd/dAUC = 2 sqrt(π) exp(d²/4)
            let slope = 2.0 * dv * 2.0 * PI.sqrt() * (dv * dv / 4.0).exp();
            Ok(Estimate {
                value: dv * dv,
                std_error: slope * roc.auc.std_error,
                ..roc.auc
            })
        }
        (ClaimId::SiPointwise, Anchor::Point { theta, prior }) => {
            let task = match prior {
                Some(p) => DetectionTask::from_prior(p, *theta, theta + d)?,
                None => DetectionTask::equal_odds(*theta, theta + d)?,
            };
            Ok(shannon_info(model, &task, method, num)?.value)
        }
        (ClaimId::HOfY, Anchor::Point { theta, prior: Some(p) }) => {
            Ok(Estimate::closed_form(binary_entropy_ln(p.log_odds(*theta, theta + d))))
        }
        (ClaimId::CeAvg, Anchor::Averaged { prior }) => Ok(averaged_metrics(model, prior, d, method, num)?.avg_ce),
        (ClaimId::SiAvg, Anchor::Averaged { prior }) => Ok(averaged_metrics(model, prior, d, method, num)?.avg_si),
        (ClaimId::CeDirectionalVector, Anchor::Vector { prior, direction }) => {
            vector_average_ce(model, prior, &unit(direction)?, d, method, num)
        }
        _ => unreachable!("claim and anchor are validated by target()"),
    }
}

/// `⟨C_e(θ, θ + t·u)⟩` over a product prior for the isotropic vector family.
pub fn vector_average_ce(
    model: &Model,
    prior: &ProductPrior,
    u: &[f64],
    t: f64,
    method: Method,
    num: &Numerics,
) -> Result<Estimate> {
    let dim = match *model {
        Model::GaussianLocationVector { dim, .. } => dim,
        _ => return Err(FomError::config("model.family", "the directional claim needs the vector family")),
    };
    if prior.dim() != dim || u.len() != dim {
        return Err(FomError::config(
            "prior",
            format!("prior and direction must have dimension {dim}"),
        ));
    }
    if t == 0.0 {
        return Ok(Estimate::closed_form(LN_2));
    }
    let zero = vec![0.0; dim];
    let shift: Vec<f64> = u.iter().map(|x| t * x).collect();
    let (scalar, t0, t1) = reduce_vector_task(model, &zero, &shift)?;
    let shifted = |theta: &[f64]| -> Vec<f64> { theta.iter().zip(&shift).map(|(a, b)| a + b).collect() };
    match method.resolve(false, true)? {
        EstimateMethod::Quadrature => {
            let grid = prior.tensor_grid(VECTOR_PANELS);
            let parts: Vec<Result<f64>> = grid
                .par_iter()
                .map(|(theta, w)| {
                    let task = DetectionTask::with_ln_odds(t0, t1, prior.log_odds(theta, &shifted(theta)))?;
                    let ce = conditional_entropy(&scalar, &task, Method::Quadrature, CeForm::TwoExpectation, num)?;
                    Ok(w * ce.value.value)
                })
                .collect();
            let mut total = 0.0;
            for p in parts {
                total += p?;
            }
            Ok(Estimate::quadrature(total, num.quad_tol, grid.len() as u64))
        }
        _ => {
            let p = prior.clone();
            let m = scalar;
            let est = mc_means(
                move |rng: &mut Rng| {
                    let theta = p.sample_one(rng);
                    (theta, m.sample_one(rng, t0), m.sample_one(rng, t1))
                },
                |(theta, g0, g1): &(Vec<f64>, f64, f64), out: &mut [f64]| {
                    out[0] = match DetectionTask::with_ln_odds(t0, t1, prior.log_odds(theta, &shifted(theta))) {
                        Ok(task) if task.pr0 > 0.0 && task.pr1 > 0.0 => {
                            let k = Integrands::new(&task);
                            let llr = |g: f64| m.log_pdf(g, t1) - m.log_pdf(g, t0);
                            k.ce_two(llr(*g0)).0 + k.ce_two(llr(*g1)).1
                        }
                        Ok(_) => 0.0,
                        Err(_) => f64::NAN,
                    };
                },
                1,
                num.mc_samples,
                derive_seed(num.seed, 0x7ec),
            )?;
            Ok(est.into_iter().next().expect("one mean requested"))
        }
    }
}

/// Measured curvature of the claim's metric on the scaled ladder against its
/// prediction from Fisher quantities.
pub fn expansion_report(
    model: &Model,
    anchor: &Anchor,
    claim: ClaimId,
    method: Method,
    num: &Numerics,
) -> Result<ExpansionFit> {
    let tgt = target(model, anchor, claim, num)?;
    if !(tgt.fisher > 0.0 && tgt.fisher.is_finite()) {
        return Err(FomError::Precondition(format!(
            "claim {} needs a positive finite Fisher scale, got {}",
            claim.name(),
            tgt.fisher
        )));
    }
    let step = 1.0 / tgt.fisher.sqrt();
    let ladder: Vec<f64> = num.curvature_ladder.iter().map(|h| h * step).collect();
    let mut grid: Vec<f64> = ladder.iter().map(|h| -h).collect();
    grid.push(0.0);
    grid.extend(ladder.iter().rev());
    check_grid(model, anchor, &grid)?;
    let values = grid
        .par_iter()
        .map(|&d| metric(model, anchor, claim, d, method, num).map_err(|e| at_delta(e, d)))
        .collect::<Result<Vec<Estimate>>>()?;
    let zero = ladder.len();
    let series: Vec<(f64, f64)> = grid.iter().zip(&values).map(|(&d, e)| (d, e.value)).collect();
    let mut fitted = fit_curvature(&series, values[zero].value)?;
    let finest = ladder[ladder.len() - 1];
    let (lo, hi) = (&values[zero - 1], &values[zero + 1]);
    let propagated =
        (lo.std_error.powi(2) + hi.std_error.powi(2) + 4.0 * values[zero].std_error.powi(2)).sqrt() / (finest * finest);
    fitted.std_error = fitted.std_error.hypot(propagated);
    if let Some(mc) = values.iter().find(|v| v.method == EstimateMethod::MonteCarlo) {
        fitted.method = EstimateMethod::MonteCarlo;
        fitted.seed = mc.seed;
    }
    fitted.effort = values.iter().map(|v| v.effort).sum();
    for v in &values {
        for w in &v.warnings {
            if !fitted.warnings.contains(w) {
                fitted.warnings.push(w.clone());
            }
        }
    }
    let rel_error = relative_error(fitted.value, tgt.predicted);
    Ok(ExpansionFit {
        claim_id: claim,
        grid,
        quadratic_coefficient_fitted: 0.5 * fitted.value,
        values,
        fitted_curvature: fitted,
        predicted_curvature: tgt.predicted,
        rel_error,
        quadratic_coefficient_paper_display: tgt.display,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityCheck {
    pub name: String,
    pub value: Estimate,
    /// One-sigma noise bar used for the pass decision.
    pub noise: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub theta: f64,
    pub checks: Vec<RegularityCheck>,
    pub all_pass: bool,
}

impl RegularityCheck {
    fn new(name: &str, value: Estimate, noise: f64) -> Self {
        RegularityCheck {
            name: name.into(),
            pass: value.value.abs() <= 3.0 * noise,
            value,
            noise,
        }
    }
}

/// Central first difference at 0 from steps `h` and `h/2`, extrapolated.
/// The noise bar adds the extrapolation step to the propagated evaluation
/// error and rounding.
fn first_difference<F: Fn(f64) -> Result<Estimate>>(f: F, h: f64) -> Result<(Estimate, f64)> {
    let pts = [h, -h, 0.5 * h, -0.5 * h];
    let v = pts
        .iter()
        .map(|&d| f(d).map_err(|e| at_delta(e, d)))
        .collect::<Result<Vec<Estimate>>>()?;
    let coarse = (v[0].value - v[1].value) / (2.0 * h);
    let fine = (v[2].value - v[3].value) / h;
    let value = (4.0 * fine - coarse) / 3.0;
    let se = v.iter().map(|e| e.std_error).fold(0.0, f64::max);
    let scale = v.iter().map(|e| e.value.abs()).fold(0.0, f64::max);
    let eval_noise = 2.0 * (se + 8.0 * f64::EPSILON * scale) / h;
    let noise = (value - fine).abs() + eval_noise;
    let mut est = Estimate::combine(&[(&v[0], 1.0), (&v[1], 1.0), (&v[2], 1.0), (&v[3], 1.0)], value);
    est.std_error = noise;
    Ok((est, noise))
}

/// Zero-mean identities `⟨Λ′⟩ = ⟨Λ″⟩ = 0` under `g|θ` by Monte Carlo
/// (`num.mc_samples`, `num.seed`), and vanishing first differences at
/// `θ̃ = θ` of `C_e`, `H(y)` and the prior-averaged `C_e`.
pub fn regularity_checks(model: &Model, prior: &Prior, theta: f64, num: &Numerics) -> Result<RegularityReport> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "regularity checks need a scalar family"));
    }
    model.check_theta(theta)?;
    prior.check_model(model)?;
    let m = *model;
    let lr = mc_means(
        move |rng: &mut Rng| m.sample_one(rng, theta),
        |g: &f64, out: &mut [f64]| match m.eval_derivatives(*g, theta) {
            Ok(d) => {
                out[0] = d.lr_d1;
                out[1] = d.lr_d2;
            }
            Err(_) => out.fill(f64::NAN),
        },
        2,
        num.mc_samples,
        derive_seed(num.seed, 0x4e9),
    )?;
    let mut checks = Vec::new();
    for (name, e) in ["lr_d1_mean", "lr_d2_mean"].iter().zip(lr) {
        let se = e.std_error;
        checks.push(RegularityCheck::new(name, e, se));
    }

    let h = FIRST_DIFFERENCE_STEP * model.theta_scale(theta);
    let (ce, noise) = first_difference(
        |d| {
            let task = DetectionTask::from_prior(prior, theta, theta + d)?;
            Ok(conditional_entropy(model, &task, Method::Quadrature, CeForm::TwoExpectation, num)?.value)
        },
        h,
    )?;
    checks.push(RegularityCheck::new("ce_first_derivative", ce, noise));
    let (hy, noise) = first_difference(
        |d| Ok(Estimate::closed_form(binary_entropy_ln(prior.log_odds(theta, theta + d)))),
        h,
    )?;
    checks.push(RegularityCheck::new("h_first_derivative", hy, noise));

    let fb = bayesian_fi(model, prior, FisherForm::ConditionalForm, Method::Auto, num)?.value.value;
    let (avg, noise) = first_difference(
        |d| Ok(averaged_metrics(model, prior, d, Method::Quadrature, num)?.avg_ce),
        FIRST_DIFFERENCE_STEP / fb.sqrt(),
    )?;
    checks.push(RegularityCheck::new("avg_ce_first_derivative", avg, noise));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(RegularityReport { theta, checks, all_pass })
}

/// Curvatures of `I`, `H` and `C_e` at a fixed `θ` and the residual of
/// `I″ = H″ − C_e″`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureIdentity {
    pub si: Estimate,
    pub entropy: Estimate,
    pub conditional_entropy: Estimate,
    pub residual: f64,
    pub pass: bool,
}

pub fn curvature_identity(model: &Model, prior: &Prior, theta: f64, method: Method, num: &Numerics) -> Result<CurvatureIdentity> {
    model.check_theta(theta)?;
    let step = model.theta_scale(theta);
    let ladder: Vec<f64> = num.curvature_ladder.iter().map(|h| h * step).collect();
    let mut grid: Vec<f64> = ladder.iter().map(|h| -h).collect();
    grid.extend(ladder.iter().rev());
    check_grid(model, &Anchor::Point { theta, prior: Some(*prior) }, &grid)?;
    let rows = grid
        .par_iter()
        .map(|&d| -> Result<(f64, f64, f64)> {
            let task = DetectionTask::from_prior(prior, theta, theta + d)?;
            let i = shannon_info(model, &task, method, num)?.value.value;
            let c = conditional_entropy(model, &task, method, CeForm::TwoExpectation, num)?.value.value;
            Ok((i, binary_entropy_ln(task.ln_y), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = |k: usize, zero: f64| {
        let series: Vec<(f64, f64)> = grid
            .iter()
            .zip(&rows)
            .map(|(&d, r)| (d, [r.0, r.1, r.2][k]))
            .collect();
        fit_curvature(&series, zero)
    };
    let si = fit(0, 0.0)?;
    let entropy = fit(1, LN_2)?;
    let ce = fit(2, LN_2)?;
    let residual = si.value - (entropy.value - ce.value);
    let noise = (si.std_error.powi(2) + entropy.std_error.powi(2) + ce.std_error.powi(2)).sqrt();
    let floor = 1e-6 * si.value.abs().max(entropy.value.abs()).max(ce.value.abs());
    Ok(CurvatureIdentity {
        pass: residual.abs() <= (3.0 * noise).max(floor),
        si,
        entropy,
        conditional_entropy: ce,
        residual,
    })
}
