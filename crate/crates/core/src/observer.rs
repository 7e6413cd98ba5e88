//! Ideal (likelihood-ratio) observer for the two-point task `θ₀` vs `θ₁`:
//! ROC curve, AUC, detectability and minimum probability of error.

use crate::error::{FomError, Result};
use crate::model::{DataSpan, Model};
use crate::numerics::special::{erf, erfc, erfinv, normal_cdf, normal_sf};
use crate::numerics::{derive_seed, mc_means, sample_blocks, Estimate, EstimateMethod, Method, Numerics, Rng};
use crate::prior::{Prior, PriorOdds};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

/// Thresholds on the ROC grid, between the end points.
pub const ROC_THRESHOLDS: usize = 513;
const ROC_TAIL: f64 = 1e-6;

/// Ordered hypothesis pair with the prior odds `y = Pr₀/Pr₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionTask {
    pub theta0: f64,
    pub theta1: f64,
    pub y: f64,
    pub ln_y: f64,
    pub pr0: f64,
    pub pr1: f64,
}

impl DetectionTask {
    /// Task with explicit log-odds; `±inf` is allowed and means one class has
    /// zero prior probability.
    pub fn with_ln_odds(theta0: f64, theta1: f64, ln_y: f64) -> Result<Self> {
        if !(theta0.is_finite() && theta1.is_finite()) || ln_y.is_nan() {
            return Err(FomError::domain(format!(
                "task needs finite parameters and odds, got ({theta0}, {theta1}, ln y = {ln_y})"
            )));
        }
        let o = PriorOdds::from_ln(ln_y);
        Ok(DetectionTask {
            theta0,
            theta1,
            y: o.y,
            ln_y,
            pr0: o.pr0,
            pr1: o.pr1,
        })
    }

    pub fn with_odds(theta0: f64, theta1: f64, y: f64) -> Result<Self> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(FomError::domain(format!("prior odds must be positive and finite, got {y}")));
        }
        DetectionTask::with_ln_odds(theta0, theta1, y.ln())
    }

    pub fn equal_odds(theta0: f64, theta1: f64) -> Result<Self> {
        DetectionTask::with_ln_odds(theta0, theta1, 0.0)
    }

    /// Odds from the prior densities at the two points.
    pub fn from_prior(prior: &Prior, theta0: f64, theta1: f64) -> Result<Self> {
        let o = prior.odds(theta0, theta1)?;
        DetectionTask::with_ln_odds(theta0, theta1, o.ln_y)
    }

    pub fn is_degenerate(&self) -> bool {
        self.theta0 == self.theta1
    }

    /// The same task with the hypotheses exchanged.
    pub fn swapped(&self) -> Self {
        DetectionTask {
            theta0: self.theta1,
            theta1: self.theta0,
            y: 1.0 / self.y,
            ln_y: -self.ln_y,
            pr0: self.pr1,
            pr1: self.pr0,
        }
    }

    pub(crate) fn check(&self, model: &Model) -> Result<()> {
        model.check_theta(self.theta0)?;
        model.check_theta(self.theta1)
    }
}

/// `ln Λ(g) = ln pr(g|θ₁) − ln pr(g|θ₀)`, with infinite ratios tagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLr {
    Finite(f64),
    /// `g` impossible under `H₀` but possible under `H₁`.
    PlusInfinity,
    MinusInfinity,
}

impl LogLr {
    pub fn value(&self) -> f64 {
        match *self {
            LogLr::Finite(v) => v,
            LogLr::PlusInfinity => f64::INFINITY,
            LogLr::MinusInfinity => f64::NEG_INFINITY,
        }
    }
}

pub fn log_lr(model: &Model, g: f64, task: &DetectionTask) -> Result<LogLr> {
    task.check(model)?;
    model.check_data(g)?;
    if task.is_degenerate() {
        return Ok(LogLr::Finite(0.0));
    }
    let (l0, l1) = (model.log_pdf(g, task.theta0), model.log_pdf(g, task.theta1));
    Ok(match (l0.is_finite(), l1.is_finite()) {
        (true, true) => LogLr::Finite(l1 - l0),
        (false, true) => LogLr::PlusInfinity,
        (true, false) => LogLr::MinusInfinity,
        (false, false) => {
            return Err(FomError::domain(format!("g = {g} has zero density under both hypotheses")))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpf: f64,
    pub tpf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: Estimate,
    pub detectability: f64,
}

impl RocCurve {
    fn chance() -> Self {
        RocCurve {
            points: vec![RocPoint { fpf: 0.0, tpf: 0.0 }, RocPoint { fpf: 1.0, tpf: 1.0 }],
            auc: Estimate::closed_form(0.5),
            detectability: 0.0,
        }
    }

    /// Trapezoidal area under the stored points.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[1].fpf - w[0].fpf) * (w[1].tpf + w[0].tpf))
            .sum()
    }

    /// `fpf,tpf` rows with a header, 10 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpf,tpf\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", sig10(p.fpf), sig10(p.tpf)));
        }
        out
    }
}

/// Ten significant digits, locale-free.
pub fn sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.9e}", x);
    match s.parse::<f64>() {
        Ok(v) if (1e-4..1e10).contains(&v.abs()) => {
            let digits = 9 - v.abs().log10().floor() as i32;
            format!("{:.*}", digits.max(0) as usize, v)
        }
        _ => s,
    }
}

/// Detectability from the AUC: `AUC = ½ + ½ erf(d/2)`.
pub fn detectability_from_auc(auc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&auc) {
        return Err(FomError::domain(format!("AUC must lie in [0, 1], got {auc}")));
    }
    if auc >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * erfinv(2.0 * auc - 1.0)?)
}

/// For the isotropic vector family, the likelihood ratio depends on the data
/// only through the projection on `θ₁ − θ₀`, which is normal with the same
/// `σ`; returns the equivalent scalar model and hypothesis pair.
pub fn reduce_vector_task(model: &Model, theta0: &[f64], theta1: &[f64]) -> Result<(Model, f64, f64)> {
    match *model {
        Model::GaussianLocationVector { sigma, dim } => {
            if theta0.len() != dim || theta1.len() != dim {
                return Err(FomError::config("theta", format!("vector parameters must have length {dim}")));
            }
            let sep = theta0.iter().zip(theta1).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
            Ok((Model::GaussianLocation { sigma }, 0.0, sep))
        }
        _ => Err(FomError::config("model.family", "vector reduction needs the vector family")),
    }
}

fn increasing(task: &DetectionTask) -> bool {
    task.theta1 > task.theta0
}

/// ROC curve and AUC of the ideal observer.
pub fn roc_auc(model: &Model, task: &DetectionTask, method: Method, num: &Numerics) -> Result<RocCurve> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "reduce vector tasks with reduce_vector_task first"));
    }
    task.check(model)?;
    if task.is_degenerate() {
        return Ok(RocCurve::chance());
    }
    let closed = !model.is_discrete();
    let (points, auc) = match method.resolve(closed, true)? {
        EstimateMethod::ClosedForm => (analytic_points(model, task), auc_closed_form(model, task)),
        EstimateMethod::Quadrature => (analytic_points(model, task), auc_quadrature(model, task, num)?),
        EstimateMethod::MonteCarlo => roc_monte_carlo(model, task, num)?,
    };
    let detectability = match (model, auc.method) {
        (Model::GaussianLocation { .. }, EstimateMethod::ClosedForm) if auc.value >= 1.0 => {
            (task.theta1 - task.theta0).abs() * model.fisher_closed_form(task.theta0).sqrt()
        }
        _ => detectability_from_auc(auc.value)?,
    };
    Ok(RocCurve {
        points,
        auc,
        detectability,
    })
}

fn auc_closed_form(model: &Model, task: &DetectionTask) -> Estimate {
    let v = match *model {
        Model::GaussianLocation { sigma } => normal_cdf((task.theta1 - task.theta0).abs() / (sigma * SQRT_2)),
        Model::GaussianScale => {
            // ratio of half-normal magnitudes is half-Cauchy
            let (a, b) = (task.theta0.max(task.theta1), task.theta0.min(task.theta1));
            std::f64::consts::FRAC_2_PI * (a / b).atan()
        }
        _ => f64::NAN,
    };
    Estimate::closed_form(v)
}

/// `P₀(Λ(g') < Λ(g))` and `P₀(Λ(g') = Λ(g))` for the scalar families.
fn h0_rank(model: &Model, task: &DetectionTask, g: f64) -> f64 {
    let up = increasing(task);
    match *model {
        Model::GaussianLocation { sigma } => {
            let z = (g - task.theta0) / sigma;
            if up {
                normal_cdf(z)
            } else {
                normal_sf(z)
            }
        }
        Model::GaussianScale => {
            let z = g.abs() / (task.theta0 * SQRT_2);
            if up {
                erf(z)
            } else {
                erfc(z)
            }
        }
        _ => f64::NAN,
    }
}

fn poisson_pmfs(task: &DetectionTask) -> Result<(u64, Vec<f64>, Vec<f64>)> {
    let (lo, hi) = match Model::PoissonRate.data_span(&[task.theta0, task.theta1])? {
        DataSpan::Counts { lo, hi } => (lo, hi),
        DataSpan::Continuous { .. } => unreachable!(),
    };
    let pmf = |t: f64| -> Vec<f64> { (lo..=hi).map(|k| Model::PoissonRate.log_pdf(k as f64, t).exp()).collect() };
    Ok((lo, pmf(task.theta0), pmf(task.theta1)))
}

/// AUC as `P(Λ₁ > Λ₀) + ½ P(Λ₁ = Λ₀)`: quadrature over `g ~ H₁` against the
/// `H₀` distribution of the likelihood ratio, or exact summation for counts.
fn auc_quadrature(model: &Model, task: &DetectionTask, num: &Numerics) -> Result<Estimate> {
    if model.is_discrete() {
        let (_, p0, p1) = poisson_pmfs(task)?;
        let order: Vec<usize> = if increasing(task) {
            (0..p0.len()).collect()
        } else {
            (0..p0.len()).rev().collect()
        };
        let mut below = 0.0;
        let mut auc = 0.0;
        for &k in &order {
            auc += p1[k] * (below + 0.5 * p0[k]);
            below += p0[k];
        }
        return Ok(Estimate::quadrature(auc, num.quad_tol, p0.len() as u64));
    }
    let t1 = task.theta1;
    model.integrate_data(
        &[task.theta0, task.theta1],
        |g| model.log_pdf(g, t1).exp() * h0_rank(model, task, g),
        num.quad_tol,
    )
}

/// Points on the analytic ROC, ascending in FPF, with both end points.
fn analytic_points(model: &Model, task: &DetectionTask) -> Vec<RocPoint> {
    let up = increasing(task);
    let (t0, t1) = (task.theta0, task.theta1);
    let mut pts: Vec<RocPoint> = match *model {
        Model::GaussianLocation { sigma } => {
            let z = -crate::numerics::special::erfinv(2.0 * ROC_TAIL - 1.0).unwrap_or(-4.75) * SQRT_2;
            let (lo, hi) = (t0.min(t1) - z * sigma, t0.max(t1) + z * sigma);
            (0..ROC_THRESHOLDS)
                .map(|i| {
                    let c = lo + (hi - lo) * i as f64 / (ROC_THRESHOLDS - 1) as f64;
                    let (f, t) = ((c - t0) / sigma, (c - t1) / sigma);
                    if up {
                        RocPoint { fpf: normal_sf(f), tpf: normal_sf(t) }
                    } else {
                        RocPoint { fpf: normal_cdf(f), tpf: normal_cdf(t) }
                    }
                })
                .collect()
        }
        Model::GaussianScale => {
            let (lo, hi) = (t0.min(t1) * 1e-6, t0.max(t1) * 5.5);
            (0..ROC_THRESHOLDS)
                .map(|i| {
                    let c = lo * (hi / lo).powf(i as f64 / (ROC_THRESHOLDS - 1) as f64);
                    let (f, t) = (c / (t0 * SQRT_2), c / (t1 * SQRT_2));
                    if up {
                        RocPoint { fpf: erfc(f), tpf: erfc(t) }
                    } else {
                        RocPoint { fpf: erf(f), tpf: erf(t) }
                    }
                })
                .collect()
        }
        _ => {
            let (_, p0, p1) = poisson_pmfs(task).unwrap_or_default();
            let n = p0.len();
            let order: Vec<usize> = if up { (0..n).rev().collect() } else { (0..n).collect() };
            let (mut f, mut t) = (0.0, 0.0);
            order
                .iter()
                .map(|&k| {
                    f += p0[k];
                    t += p1[k];
                    RocPoint { fpf: f.min(1.0), tpf: t.min(1.0) }
                })
                .collect()
        }
    };
    pts.push(RocPoint { fpf: 0.0, tpf: 0.0 });
    pts.push(RocPoint { fpf: 1.0, tpf: 1.0 });
    pts.sort_by(|a, b| a.fpf.total_cmp(&b.fpf).then(a.tpf.total_cmp(&b.tpf)));
    pts.dedup();
    pts
}

/// Mid-ranks (1-based) of `v`, ties sharing the average rank.
fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sample rank statistic with ties counted ½ and its DeLong standard error.
pub fn rank_auc(neg: &[f64], pos: &[f64]) -> Result<(f64, f64)> {
    let (n0, n1) = (neg.len() as f64, pos.len() as f64);
    if neg.len() < 2 || pos.len() < 2 {
        return Err(FomError::config("mc_samples", "rank AUC needs at least 2 samples per class"));
    }
    let pooled: Vec<f64> = neg.iter().chain(pos).cloned().collect();
    let r = mid_ranks(&pooled);
    let (r0, r1) = r.split_at(neg.len());
    let (own0, own1) = (mid_ranks(neg), mid_ranks(pos));
    let rank_sum: f64 = r1.iter().sum();
    let auc = (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1);
    // structural components
    let v10: Vec<f64> = r1.iter().zip(&own1).map(|(a, b)| (a - b) / n0).collect();
    let v01: Vec<f64> = r0.iter().zip(&own0).map(|(a, b)| 1.0 - (a - b) / n1).collect();
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let se = (var(&v10) / n1 + var(&v01) / n0).sqrt();
    Ok((auc, se))
}

fn roc_monte_carlo(model: &Model, task: &DetectionTask, num: &Numerics) -> Result<(Vec<RocPoint>, Estimate)> {
    let m = *model;
    let (t0, t1) = (task.theta0, task.theta1);
    let llr = move |g: f64| m.log_pdf(g, t1) - m.log_pdf(g, t0);
    let seed0 = derive_seed(num.seed, 0xa0c0);
    let seed1 = derive_seed(num.seed, 0xa0c1);
    let mut neg = sample_blocks(move |rng: &mut Rng| llr(m.sample_one(rng, t0)), num.mc_samples, seed0);
    let mut pos = sample_blocks(move |rng: &mut Rng| llr(m.sample_one(rng, t1)), num.mc_samples, seed1);
    if let Some(bad) = neg.iter().chain(&pos).find(|v| v.is_nan()) {
        return Err(FomError::data(format!("log likelihood ratio sample is {bad}")));
    }
    let (auc, se) = rank_auc(&neg, &pos)?;
    neg.sort_by(f64::total_cmp);
    pos.sort_by(f64::total_cmp);
    let frac_above = |v: &[f64], c: f64| (v.len() - v.partition_point(|x| *x <= c)) as f64 / v.len() as f64;
    let mut points: Vec<RocPoint> = (0..ROC_THRESHOLDS)
        .map(|i| {
            let q = ((i as f64 + 0.5) / ROC_THRESHOLDS as f64 * neg.len() as f64) as usize;
            let c = neg[q.min(neg.len() - 1)];
            RocPoint {
                fpf: frac_above(&neg, c),
                tpf: frac_above(&pos, c),
            }
        })
        .collect();
    points.push(RocPoint { fpf: 0.0, tpf: 0.0 });
    points.push(RocPoint { fpf: 1.0, tpf: 1.0 });
    points.sort_by(|a, b| a.fpf.total_cmp(&b.fpf).then(a.tpf.total_cmp(&b.tpf)));
    points.dedup();
    let mut est = Estimate::monte_carlo(auc, se, 2 * num.mc_samples as u64, num.seed);
    est.seed = Some(num.seed);
    Ok((points, est))
}

/// Minimum probability of error with the prior-odds threshold from `prior`.
pub fn mpe(model: &Model, prior: &Prior, theta0: f64, theta1: f64, method: Method, num: &Numerics) -> Result<Estimate> {
    let task = DetectionTask::from_prior(prior, theta0, theta1)?;
    mpe_task(model, &task, method, num)
}

/// `Pr₀·FPF + Pr₁·(1 − TPF)` for the observer deciding `H₁` when `Λ > y`
/// (ties go to `H₀`).
pub fn mpe_task(model: &Model, task: &DetectionTask, method: Method, num: &Numerics) -> Result<Estimate> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "reduce vector tasks with reduce_vector_task first"));
    }
    if task.pr0 == 0.0 || task.pr1 == 0.0 {
        return Ok(Estimate::closed_form(0.0));
    }
    task.check(model)?;
    if task.is_degenerate() {
        return Ok(Estimate::closed_form(task.pr0.min(task.pr1)));
    }
    match method.resolve(!model.is_discrete(), true)? {
        EstimateMethod::ClosedForm => Ok(Estimate::closed_form(mpe_closed_form(model, task))),
        EstimateMethod::Quadrature => mpe_quadrature(model, task, num.quad_tol),
        EstimateMethod::MonteCarlo => mpe_monte_carlo(model, task, num),
    }
}

/// Closed-form minimum error for the Gaussian families.
pub(crate) fn mpe_closed_form(model: &Model, task: &DetectionTask) -> f64 {
    let (t0, t1) = (task.theta0, task.theta1);
    let (pr0, pr1) = (task.pr0, task.pr1);
    if pr0 == 0.0 || pr1 == 0.0 {
        return 0.0;
    }
    if t0 == t1 {
        return pr0.min(pr1);
    }
    match *model {
        Model::GaussianLocation { sigma } => {
            let d = t1 - t0;
            let c = 0.5 * (t0 + t1) + sigma * sigma * task.ln_y / d;
            let (z0, z1) = ((c - t0) / sigma, (c - t1) / sigma);
            if d > 0.0 {
                pr0 * normal_sf(z0) + pr1 * normal_cdf(z1)
            } else {
                pr0 * normal_cdf(z0) + pr1 * normal_sf(z1)
            }
        }
        Model::GaussianScale => {
            // decide H₁ when k g² > r
            let k = 0.5 * (1.0 / (t0 * t0) - 1.0 / (t1 * t1));
            let r = task.ln_y + (t1 / t0).ln();
            let c2 = r / k;
            if k > 0.0 {
                if c2 <= 0.0 {
                    return pr0;
                }
                let c = c2.sqrt();
                pr0 * erfc(c / (t0 * SQRT_2)) + pr1 * erf(c / (t1 * SQRT_2))
            } else {
                if c2 <= 0.0 {
                    return pr1;
                }
                let c = c2.sqrt();
                pr0 * erf(c / (t0 * SQRT_2)) + pr1 * erfc(c / (t1 * SQRT_2))
            }
        }
        _ => f64::NAN,
    }
}

/// `∫ min(Pr₀ pr(g|θ₀), Pr₁ pr(g|θ₁)) dg`: the error of the threshold-`y`
/// observer, whichever way ties are broken.
pub(crate) fn mpe_quadrature(model: &Model, task: &DetectionTask, tol: f64) -> Result<Estimate> {
    let (a, b) = (task.pr0.ln(), task.pr1.ln());
    let (t0, t1) = (task.theta0, task.theta1);
    model.integrate_data(
        &[t0, t1],
        |g| (a + model.log_pdf(g, t0)).min(b + model.log_pdf(g, t1)).exp(),
        tol,
    )
}

fn mpe_monte_carlo(model: &Model, task: &DetectionTask, num: &Numerics) -> Result<Estimate> {
    let m = *model;
    let (t0, t1, ln_y) = (task.theta0, task.theta1, task.ln_y);
    let seed = derive_seed(num.seed, 0x3be);
    // paired draws: FPF indicator under H₀ and FNF indicator under H₁
    let est = mc_means(
        move |rng: &mut Rng| (m.sample_one(rng, t0), m.sample_one(rng, t1)),
        |&(g0, g1): &(f64, f64), out: &mut [f64]| {
            let d1 = |g: f64| m.log_pdf(g, t1) - m.log_pdf(g, t0) > ln_y;
            out[0] = if d1(g0) { 1.0 } else { 0.0 };
            out[1] = if d1(g1) { 0.0 } else { 1.0 };
        },
        2,
        num.mc_samples,
        seed,
    )?;
    let v = task.pr0 * est[0].value + task.pr1 * est[1].value;
    Ok(Estimate::combine(&[(&est[0], task.pr0), (&est[1], task.pr1)], v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn log_lr_examples() {
        let g = Model::gaussian_location(1.0).unwrap();
        let t = DetectionTask::equal_odds(0.0, 1.0).unwrap();
        assert!((log_lr(&g, 1.0, &t).unwrap().value() - 0.5).abs() < 1e-15);
        let same = DetectionTask::equal_odds(0.4, 0.4).unwrap();
        assert_eq!(log_lr(&g, 3.0, &same).unwrap(), LogLr::Finite(0.0));
        let p = DetectionTask::equal_odds(1.0, 2.0).unwrap();
        assert!((log_lr(&Model::PoissonRate, 0.0, &p).unwrap().value() + 1.0).abs() < 1e-15);
        assert!(log_lr(&Model::PoissonRate, -1.0, &p).is_err());
    }

    #[test]
    fn task_odds() {
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        let t = DetectionTask::from_prior(&p, 0.0, 1.0).unwrap();
        assert!((t.y - 1.648_721_270_700_128).abs() < 1e-14);
        assert!((t.pr0 + t.pr1 - 1.0).abs() < 1e-15);
        assert!((t.pr0 / t.pr1 - t.y).abs() < 1e-12);
    }

    #[test]
    fn gaussian_auc_examples() {
        let g = Model::gaussian_location(1.0).unwrap();
        let r = roc_auc(&g, &DetectionTask::equal_odds(0.0, 1.0).unwrap(), Method::Auto, &num()).unwrap();
        assert!((r.auc.value - 0.760_249_938_906_523_2).abs() < 1e-12);
        assert!((r.detectability - 1.0).abs() < 1e-10);
        let r = roc_auc(&g, &DetectionTask::equal_odds(0.0, 3.0).unwrap(), Method::Auto, &num()).unwrap();
        assert!((r.auc.value - 0.983_052_573_237_749_6).abs() < 1e-12);
        assert!((r.detectability - 3.0).abs() < 1e-9);
        let r = roc_auc(&g, &DetectionTask::equal_odds(1.0, 1.0).unwrap(), Method::Auto, &num()).unwrap();
        assert_eq!((r.auc.value, r.detectability), (0.5, 0.0));
        // reversed direction has the same AUC
        let r = roc_auc(&g, &DetectionTask::equal_odds(1.0, 0.0).unwrap(), Method::Auto, &num()).unwrap();
        assert!((r.auc.value - 0.760_249_938_906_523_2).abs() < 1e-12);
    }

    #[test]
    fn routes_agree() {
        let cases = [
            (Model::gaussian_location(1.0).unwrap(), 0.0, 1.3),
            (Model::GaussianScale, 1.0, 1.6),
            (Model::GaussianScale, 2.0, 1.2),
            (Model::PoissonRate, 2.0, 3.5),
            (Model::PoissonRate, 4.0, 2.5),
        ];
        let n = num().with_samples(200_000);
        for (m, a, b) in cases {
            let t = DetectionTask::equal_odds(a, b).unwrap();
            let q = roc_auc(&m, &t, Method::Quadrature, &n).unwrap();
            let mc = roc_auc(&m, &t, Method::MonteCarlo, &n).unwrap();
            assert!((q.auc.value - mc.auc.value).abs() < 3.0 * mc.auc.std_error, "{m:?} {q:?} {:?}", mc.auc);
            if !m.is_discrete() {
                let c = roc_auc(&m, &t, Method::ClosedForm, &n).unwrap();
                assert!((c.auc.value - q.auc.value).abs() < 1e-9, "{m:?}");
            }
            assert!((q.trapezoid_area() - q.auc.value).abs() < 2e-3, "{m:?}");
        }
    }

    #[test]
    fn roc_points_are_monotone_and_concave() {
        for (m, a, b) in [
            (Model::gaussian_location(1.0).unwrap(), 0.0, 1.0),
            (Model::GaussianScale, 1.0, 2.0),
            (Model::PoissonRate, 2.0, 4.0),
        ] {
            let r = roc_auc(&m, &DetectionTask::equal_odds(a, b).unwrap(), Method::Auto, &num()).unwrap();
            let p = &r.points;
            assert_eq!(p[0], RocPoint { fpf: 0.0, tpf: 0.0 });
            assert_eq!(*p.last().unwrap(), RocPoint { fpf: 1.0, tpf: 1.0 });
            for w in p.windows(2) {
                assert!(w[1].fpf >= w[0].fpf && w[1].tpf >= w[0].tpf - 1e-15);
            }
            for q in p {
                assert!(q.tpf >= q.fpf - 1e-12);
            }
            for w in p.windows(3) {
                let s1 = (w[1].tpf - w[0].tpf) / (w[1].fpf - w[0].fpf).max(1e-300);
                let s2 = (w[2].tpf - w[1].tpf) / (w[2].fpf - w[1].fpf).max(1e-300);
                if w[1].fpf - w[0].fpf > 1e-9 && w[2].fpf - w[1].fpf > 1e-9 {
                    assert!(s2 <= s1 * (1.0 + 1e-6) + 1e-9, "{m:?}: {s1} {s2}");
                }
            }
        }
    }

    #[test]
    fn mpe_examples() {
        let g = Model::gaussian_location(1.0).unwrap();
        let e = mpe_task(&g, &DetectionTask::equal_odds(0.0, 1.0).unwrap(), Method::Auto, &num()).unwrap();
        assert!((e.value - 0.308_537_538_725_986_9).abs() < 1e-12);
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        let e = mpe(&g, &p, 0.0, 1.0, Method::Auto, &num()).unwrap();
        assert!((e.value - 0.287_526_8).abs() < 1e-7, "{e:?}");
        let r = mpe(&g, &p, 1.0, 0.0, Method::Auto, &num()).unwrap();
        assert!((e.value - r.value).abs() < 1e-12);
        let d = mpe(&g, &p, 0.5, 0.5, Method::Auto, &num()).unwrap();
        assert_eq!(d.value, 0.5);
        let t = DetectionTask::with_odds(0.5, 0.5, 3.0).unwrap();
        assert_eq!(mpe_task(&g, &t, Method::Auto, &num()).unwrap().value, 0.25);
    }

    #[test]
    fn mpe_routes_agree() {
        let n = num().with_samples(400_000);
        for (m, a, b, y) in [
            (Model::gaussian_location(0.7).unwrap(), 0.2, 1.1, 1.7),
            (Model::GaussianScale, 1.0, 1.5, 0.6),
            (Model::GaussianScale, 1.5, 1.0, 2.5),
            (Model::PoissonRate, 3.0, 5.0, 1.3),
        ] {
            let t = DetectionTask::with_odds(a, b, y).unwrap();
            let q = mpe_task(&m, &t, Method::Quadrature, &n).unwrap();
            let mc = mpe_task(&m, &t, Method::MonteCarlo, &n).unwrap();
            assert!(q.agrees_with(&mc, 3.0, 1e-9), "{m:?} {q:?} {mc:?}");
            assert!(q.value <= t.pr0.min(t.pr1) + 1e-12);
            if !m.is_discrete() {
                let c = mpe_task(&m, &t, Method::ClosedForm, &n).unwrap();
                assert!((c.value - q.value).abs() < 1e-9, "{m:?} {c:?} {q:?}");
            }
            let s = mpe_task(&m, &t.swapped(), Method::Quadrature, &n).unwrap();
            assert!((s.value - q.value).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_auc_handles_ties() {
        let (a, _) = rank_auc(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        // pairs: (0,1)=1 (0,2)=1 (1,1)=½ (1,2)=1
        assert!((a - 0.875).abs() < 1e-15);
    }

    #[test]
    fn csv_format() {
        let r = RocCurve::chance();
        assert_eq!(r.to_csv(), "fpf,tpf\n0,0\n1.000000000,1.000000000\n");
        assert_eq!(sig10(0.123456789012), "0.1234567890");
    }
}
