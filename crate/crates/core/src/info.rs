//! Shannon information, binary entropy and conditional entropy of the
//! two-point detection task, pointwise and averaged over a prior. Nats.

use crate::error::{FomError, Result};
use crate::model::Model;
use crate::numerics::special::{log_add_exp, sigmoid, softplus};
use crate::numerics::{derive_seed, mc_means, Estimate, EstimateMethod, Method, Numerics, Rng};
use crate::observer::DetectionTask;
use crate::prior::Prior;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    ShannonInfo,
    BinaryEntropy,
    ConditionalEntropy,
}

/// Which algebraic form of the conditional entropy to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeForm {
    /// Expectations under `H₀` only.
    H0Only,
    /// One expectation under each hypothesis.
    #[default]
    TwoExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoValue {
    pub value: Estimate,
    pub kind: InfoKind,
    pub task: DetectionTask,
    /// For Shannon information: direct value minus `H − C_e`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<f64>,
}

/// `H(y)` from `ln y`, stable for any magnitude: with `l = |ln y|`,
/// `H = ln(1 + e^{-l}) + l σ(-l)`.
pub fn binary_entropy_ln(ln_y: f64) -> f64 {
    let l = ln_y.abs();
    if l == f64::INFINITY {
        return 0.0;
    }
    (-l).exp().ln_1p() + l * sigmoid(-l)
}

pub fn binary_entropy(y: f64) -> Result<f64> {
    if !(y > 0.0) || y.is_nan() {
        return Err(FomError::domain(format!("binary entropy needs y > 0, got {y}")));
    }
    Ok(binary_entropy_ln(y.ln()))
}

/// `ln(softplus(x))` without underflow for very negative `x`.
fn ln_softplus(x: f64) -> f64 {
    if x < -30.0 {
        x
    } else {
        softplus(x).ln()
    }
}

/// Per-point integrands: `f0` is weighted by `pr(g|θ₀)`, `f1` by `pr(g|θ₁)`.
pub(crate) struct Integrands {
    ln_y: f64,
    pr0: f64,
    pr1: f64,
}

impl Integrands {
    pub(crate) fn new(task: &DetectionTask) -> Self {
        Integrands {
            ln_y: task.ln_y,
            pr0: task.pr0,
            pr1: task.pr1,
        }
    }

    /// Two-expectation conditional entropy: `Pr₁ ln((Λ+y)/Λ)` under `H₁`,
    /// `Pr₀ ln((Λ+y)/y)` under `H₀`.
    pub(crate) fn ce_two(&self, a: f64) -> (f64, f64) {
        (self.pr0 * softplus(a - self.ln_y), self.pr1 * softplus(self.ln_y - a))
    }

    /// `H₀`-only conditional entropy integrand,
    /// `Pr₁[(Λ+y)ln(Λ+y) − Λ ln Λ]`, written as `Pr₁ Λ ln(1 + y/Λ) + Pr₀ ln(Λ+y)`;
    /// the constant `−Pr₀ ln y` is added after integration.
    fn ce_h0(&self, a: f64) -> f64 {
        self.pr1 * (a + ln_softplus(self.ln_y - a)).exp() + self.pr0 * log_add_exp(a, self.ln_y)
    }

    /// Shannon information: `Pr₁ ln(Λ(1+y)/(Λ+y))` under `H₁`,
    /// `Pr₀ ln((1+y)/(Λ+y))` under `H₀`.
    pub(crate) fn si(&self, a: f64) -> (f64, f64) {
        let lse = log_add_exp(a, self.ln_y);
        let l1y = softplus(self.ln_y);
        (self.pr0 * (l1y - lse), self.pr1 * (l1y - softplus(self.ln_y - a)))
    }
}

fn require_scalar(model: &Model) -> Result<()> {
    if model.is_vector() {
        Err(FomError::config(
            "model.family",
            "reduce vector tasks with observer::reduce_vector_task first",
        ))
    } else {
        Ok(())
    }
}

/// `∫ [pr(g|θ₀) f0(g) + pr(g|θ₁) f1(g)] dg` with `f` given `ln Λ(g)`.
fn integrate_pair<F: Fn(f64) -> (f64, f64)>(model: &Model, task: &DetectionTask, f: F, tol: f64) -> Result<Estimate> {
    let (t0, t1) = (task.theta0, task.theta1);
    model.integrate_data(
        &[t0, t1],
        |g| {
            let (l0, l1) = (model.log_pdf(g, t0), model.log_pdf(g, t1));
            let (f0, f1) = f(l1 - l0);
            let mut v = 0.0;
            if f0 != 0.0 {
                v += l0.exp() * f0;
            }
            if f1 != 0.0 {
                v += l1.exp() * f1;
            }
            v
        },
        tol,
    )
}

/// Paired Monte Carlo: `g₀ ~ H₀`, `g₁ ~ H₁`, mean of `f0(ln Λ(g₀)) + f1(ln Λ(g₁))`.
fn mc_pair<F>(model: &Model, task: &DetectionTask, f: F, num: &Numerics, tag: u64) -> Result<Estimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let m = *model;
    let (t0, t1) = (task.theta0, task.theta1);
    let llr = move |g: f64| m.log_pdf(g, t1) - m.log_pdf(g, t0);
    mc_means(
        move |rng: &mut Rng| (m.sample_one(rng, t0), m.sample_one(rng, t1)),
        |&(g0, g1): &(f64, f64), out: &mut [f64]| out[0] = f(llr(g0), llr(g1)),
        1,
        num.mc_samples,
        derive_seed(num.seed, tag),
    )
    .map(|mut v| v.remove(0))
}

/// Conditional entropy `C_e = H(y) − I(y)` of the task.
pub fn conditional_entropy(
    model: &Model,
    task: &DetectionTask,
    method: Method,
    form: CeForm,
    num: &Numerics,
) -> Result<InfoValue> {
    require_scalar(model)?;
    let out = |value: Estimate| InfoValue {
        value,
        kind: InfoKind::ConditionalEntropy,
        task: *task,
        consistency: None,
    };
    if task.pr0 == 0.0 || task.pr1 == 0.0 {
        return Ok(out(Estimate::closed_form(0.0)));
    }
    task.check(model)?;
    if task.is_degenerate() {
        return Ok(out(Estimate::closed_form(binary_entropy_ln(task.ln_y))));
    }
    let k = Integrands::new(task);
    let shift = -task.pr0 * task.ln_y;
    let value = match (method.resolve(false, true)?, form) {
        (EstimateMethod::Quadrature, CeForm::TwoExpectation) => integrate_pair(model, task, |a| k.ce_two(a), num.quad_tol)?,
        (EstimateMethod::Quadrature, CeForm::H0Only) => {
            let (t0, t1) = (task.theta0, task.theta1);
            model
                .integrate_data(
                    &[t0, t1],
                    |g| {
                        let l0 = model.log_pdf(g, t0);
                        l0.exp() * k.ce_h0(model.log_pdf(g, t1) - l0)
                    },
                    num.quad_tol,
                )?
                .affine(1.0, shift)
        }
        (_, CeForm::TwoExpectation) => mc_pair(
            model,
            task,
            |a0, a1| k.ce_two(a0).0 + k.ce_two(a1).1,
            num,
            0xce2,
        )?,
        (_, CeForm::H0Only) => {
            let m = *model;
            let (t0, t1) = (task.theta0, task.theta1);
            mc_means(
                move |rng: &mut Rng| m.sample_one(rng, t0),
                |g: &f64, o: &mut [f64]| o[0] = k.ce_h0(m.log_pdf(*g, t1) - m.log_pdf(*g, t0)),
                1,
                num.mc_samples,
                derive_seed(num.seed, 0xce0),
            )?
            .remove(0)
            .affine(1.0, shift)
        }
    };
    Ok(out(value))
}

/// Shannon information of the task by its direct expression; the difference
/// from `H(y) − C_e` (`H₀`-only form) is kept as a diagnostic.
pub fn shannon_info(model: &Model, task: &DetectionTask, method: Method, num: &Numerics) -> Result<InfoValue> {
    require_scalar(model)?;
    let out = |value: Estimate, consistency: Option<f64>| InfoValue {
        value,
        kind: InfoKind::ShannonInfo,
        task: *task,
        consistency,
    };
    if task.pr0 == 0.0 || task.pr1 == 0.0 || task.is_degenerate() {
        return Ok(out(Estimate::closed_form(0.0), Some(0.0)));
    }
    task.check(model)?;
    let k = Integrands::new(task);
    let route = method.resolve(false, true)?;
    let value = match route {
        EstimateMethod::Quadrature => integrate_pair(model, task, |a| k.si(a), num.quad_tol)?,
        _ => mc_pair(model, task, |a0, a1| k.si(a0).0 + k.si(a1).1, num, 0x51)?,
    };
    let route_method = match route {
        EstimateMethod::Quadrature => Method::Quadrature,
        _ => Method::MonteCarlo,
    };
    let ce = conditional_entropy(model, task, route_method, CeForm::H0Only, num)?;
    let h = binary_entropy_ln(task.ln_y);
    let diff = value.value - (h - ce.value.value);
    Ok(out(value, Some(diff)))
}

/// Prior averages of conditional entropy and Shannon information over tasks
/// `(θ, θ + δ)` with prior odds `y(θ, θ + δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub delta: f64,
    pub avg_ce: Estimate,
    pub avg_si: Estimate,
    /// Prior mass of nodes whose shifted point `θ + δ` lies outside the prior
    /// support or the model domain; those tasks have `y = ∞`, so both metrics
    /// are zero there.
    pub excluded_mass: f64,
}

pub fn averaged_metrics(model: &Model, prior: &Prior, delta: f64, method: Method, num: &Numerics) -> Result<AveragedMetrics> {
    require_scalar(model)?;
    prior.check_model(model)?;
    if !delta.is_finite() {
        return Err(FomError::config("delta", format!("delta must be finite, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(AveragedMetrics {
            delta,
            avg_ce: Estimate::closed_form(LN_2),
            avg_si: Estimate::closed_form(0.0),
            excluded_mass: 0.0,
        });
    }
    let grid = prior.grid();
    let mut result = match method.resolve(false, true)? {
        EstimateMethod::Quadrature => {
            let per_node: Vec<Result<Option<(f64, f64)>>> = grid
                .nodes
                .par_iter()
                .map(|&t| {
                    let t1 = t + delta;
                    if !prior.contains(t1) || !model.admits(t1) {
                        return Ok(None);
                    }
                    let task = DetectionTask::with_ln_odds(t, t1, prior.log_odds(t, t1))?;
                    let ce = conditional_entropy(model, &task, Method::Quadrature, CeForm::TwoExpectation, num)?;
                    let si = shannon_info_direct(model, &task, num.quad_tol)?;
                    Ok(Some((ce.value.value, si)))
                })
                .collect();
            let (mut ce, mut si, mut excluded) = (0.0, 0.0, 0.0);
            for (r, w) in per_node.into_iter().zip(&grid.weights) {
                match r.map_err(|e| tag_delta(e, delta))? {
                    Some((c, s)) => {
                        ce += w * c;
                        si += w * s;
                    }
                    None => excluded += w,
                }
            }
            let effort = grid.len() as u64;
            AveragedMetrics {
                delta,
                avg_ce: Estimate::quadrature(ce, num.quad_tol, effort),
                avg_si: Estimate::quadrature(si, num.quad_tol, effort),
                excluded_mass: excluded,
            }
        }
        _ => averaged_monte_carlo(model, prior, delta, num)?,
    };
    if result.excluded_mass > 1e-6 {
        let w = format!(
            "prior mass {:.3e} excluded: theta + delta outside the prior support or model domain",
            result.excluded_mass
        );
        result.avg_ce.warnings.push(w.clone());
        result.avg_si.warnings.push(w);
    }
    Ok(result)
}

fn tag_delta(e: FomError, delta: f64) -> FomError {
    match e {
        FomError::Convergence { message, best } => FomError::Convergence {
            message: format!("{message} (delta = {delta})"),
            best,
        },
        FomError::Data(m) => FomError::Data(format!("{m} (delta = {delta})")),
        other => other,
    }
}

fn shannon_info_direct(model: &Model, task: &DetectionTask, tol: f64) -> Result<f64> {
    let k = Integrands::new(task);
    Ok(integrate_pair(model, task, |a| k.si(a), tol)?.value)
}

/// Joint Monte Carlo over `θ ~ prior` and paired data under both hypotheses.
fn averaged_monte_carlo(model: &Model, prior: &Prior, delta: f64, num: &Numerics) -> Result<AveragedMetrics> {
    let m = *model;
    let p = *prior;
    let seed = derive_seed(num.seed, 0xa7e);
    let est = mc_means(
        move |rng: &mut Rng| {
            let t = p.sample_one(rng);
            let t1 = t + delta;
            if !p.contains(t1) || !m.admits(t1) {
                return None;
            }
            Some((t, m.sample_one(rng, t), m.sample_one(rng, t1)))
        },
        |s: &Option<(f64, f64, f64)>, out: &mut [f64]| match *s {
            None => out.iter_mut().for_each(|o| *o = 0.0),
            Some((t, g0, g1)) => {
                let t1 = t + delta;
                let ln_y = p.log_odds(t, t1);
                let pr0 = sigmoid(ln_y);
                let k = Integrands {
                    ln_y,
                    pr0,
                    pr1: sigmoid(-ln_y),
                };
                let llr = |g: f64| m.log_pdf(g, t1) - m.log_pdf(g, t);
                let (a0, a1) = (llr(g0), llr(g1));
                out[0] = k.ce_two(a0).0 + k.ce_two(a1).1;
                out[1] = k.si(a0).0 + k.si(a1).1;
            }
        },
        2,
        num.mc_samples,
        seed,
    )?;
    Ok(AveragedMetrics {
        delta,
        avg_ce: est[0].clone(),
        avg_si: est[1].clone(),
        excluded_mass: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn num() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn binary_entropy_examples() {
        assert!((binary_entropy(1.0).unwrap() - LN_2).abs() < 1e-15);
        assert!((binary_entropy(1.648_72).unwrap() - 0.662_847).abs() < 1e-6);
        assert!(binary_entropy(1e8).unwrap() <= 2e-7);
        assert!(binary_entropy(0.0).is_err());
        assert!(binary_entropy(-1.0).is_err());
    }

    #[test]
    fn degenerate_task_gives_entropy() {
        let g = Model::gaussian_location(1.0).unwrap();
        let t = DetectionTask::with_odds(0.3, 0.3, 2.5).unwrap();
        for form in [CeForm::H0Only, CeForm::TwoExpectation] {
            let c = conditional_entropy(&g, &t, Method::Auto, form, &num()).unwrap();
            assert_eq!(c.value.value, binary_entropy(2.5).unwrap());
        }
        assert_eq!(shannon_info(&g, &t, Method::Auto, &num()).unwrap().value.value, 0.0);
    }

    #[test]
    fn small_separation_oracle() {
        let g = Model::gaussian_location(1.0).unwrap();
        let t = DetectionTask::equal_odds(-0.05, 0.05).unwrap();
        for form in [CeForm::H0Only, CeForm::TwoExpectation] {
            let c = conditional_entropy(&g, &t, Method::Quadrature, form, &num()).unwrap();
            assert!((c.value.value - 0.691_898_7).abs() < 1e-7, "{form:?} {c:?}");
        }
        let i = shannon_info(&g, &t, Method::Quadrature, &num()).unwrap();
        assert!((i.value.value - 0.001_248_44).abs() < 1e-8, "{i:?}");
        assert!(i.consistency.unwrap().abs() < 1e-9);
    }

    #[test]
    fn large_separation_oracle() {
        let g = Model::gaussian_location(1.0).unwrap();
        let t = DetectionTask::equal_odds(0.0, 5.0).unwrap();
        let c = conditional_entropy(&g, &t, Method::Quadrature, CeForm::H0Only, &num()).unwrap();
        assert!((c.value.value - 0.017_204_6).abs() < 1e-7, "{c:?}");
        assert!(c.value.value <= 0.02);
        let i = shannon_info(&g, &t, Method::Quadrature, &num()).unwrap();
        assert!((i.value.value - (LN_2 - 0.017_204_6)).abs() < 1e-7);
    }

    #[test]
    fn forms_and_routes_agree() {
        let n = num().with_samples(300_000);
        for (m, a, b, y) in [
            (Model::gaussian_location(1.0).unwrap(), 0.0, 0.8, 0.4),
            (Model::GaussianScale, 1.0, 1.7, 2.0),
            (Model::PoissonRate, 2.0, 3.1, 1.5),
        ] {
            let t = DetectionTask::with_odds(a, b, y).unwrap();
            let h0 = conditional_entropy(&m, &t, Method::Quadrature, CeForm::H0Only, &n).unwrap();
            let two = conditional_entropy(&m, &t, Method::Quadrature, CeForm::TwoExpectation, &n).unwrap();
            assert!((h0.value.value - two.value.value).abs() < 1e-8, "{m:?}");
            let mc = conditional_entropy(&m, &t, Method::MonteCarlo, CeForm::TwoExpectation, &n).unwrap();
            assert!(mc.value.agrees_with(&two.value, 3.0, 0.0), "{m:?} {mc:?} {two:?}");
            let mc0 = conditional_entropy(&m, &t, Method::MonteCarlo, CeForm::H0Only, &n).unwrap();
            assert!(mc0.value.agrees_with(&two.value, 3.0, 0.0), "{m:?} {mc0:?} {two:?}");
            let i = shannon_info(&m, &t, Method::Quadrature, &n).unwrap();
            let h = binary_entropy(y).unwrap();
            assert!((i.value.value - (h - two.value.value)).abs() < 1e-8);
            assert!(0.0 <= i.value.value && i.value.value <= h && h <= LN_2 + 1e-12);
        }
    }

    #[test]
    fn info_grows_with_separation() {
        let g = Model::gaussian_location(1.0).unwrap();
        let mut last = 0.0;
        for d in [0.1, 0.3, 0.7, 1.2, 2.0, 3.5] {
            let i = shannon_info(&g, &DetectionTask::equal_odds(0.0, d).unwrap(), Method::Auto, &num()).unwrap();
            assert!(i.value.value > last);
            last = i.value.value;
        }
    }

    #[test]
    fn averaged_examples() {
        let g = Model::gaussian_location(1.0).unwrap();
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        let z = averaged_metrics(&g, &p, 0.0, Method::Auto, &num()).unwrap();
        assert_eq!((z.avg_ce.value, z.avg_si.value), (LN_2, 0.0));
        let a = averaged_metrics(&g, &p, 0.1, Method::Auto, &num()).unwrap();
        assert!((a.avg_ce.value - 0.690_653_4).abs() < 1e-6, "{a:?}");
        assert!((a.avg_si.value - 0.001_25).abs() < 2e-5, "{a:?}");
        let mc = averaged_metrics(&g, &p, 0.1, Method::MonteCarlo, &num().with_samples(200_000)).unwrap();
        assert!(mc.avg_ce.agrees_with(&a.avg_ce, 3.0, 0.0), "{mc:?}");
    }

    #[test]
    fn bump_edges_are_excluded() {
        let g = Model::gaussian_location(0.5).unwrap();
        let p = Prior::bump(0.0, 1.0).unwrap();
        let a = averaged_metrics(&g, &p, 0.3, Method::Auto, &num()).unwrap();
        assert!(a.excluded_mass > 1e-3);
        assert!(!a.avg_ce.warnings.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn entropy_bounds(ln_y in -30.0f64..30.0, a in -2.0f64..2.0, d in 0.05f64..3.0) {
            let h = binary_entropy_ln(ln_y);
            prop_assert!((0.0..=LN_2 + 1e-12).contains(&h));
            prop_assert!((h - binary_entropy_ln(-ln_y)).abs() < 1e-15);
            let g = Model::gaussian_location(1.0).unwrap();
            let t = DetectionTask::with_ln_odds(a, a + d, ln_y.clamp(-5.0, 5.0)).unwrap();
            let c = conditional_entropy(&g, &t, Method::Quadrature, CeForm::TwoExpectation, &num()).unwrap().value.value;
            let i = shannon_info(&g, &t, Method::Quadrature, &num()).unwrap().value.value;
            let h = binary_entropy_ln(t.ln_y);
            prop_assert!(i >= -1e-12 && i <= h + 1e-12);
            prop_assert!(c >= -1e-12 && c <= h + 1e-12);
        }
    }
}
