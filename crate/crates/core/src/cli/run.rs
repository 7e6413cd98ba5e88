//! Command dispatch.

use super::config::{Command, Format, Resolved, RunConfig};
use super::report::{RunReport, Section, ARTIFACT};
use super::{CliError, EXIT_CONVERGENCE, EXIT_OK};
use crate::bounds::{bound_report, emse, BoundKind, Estimator, ZzForm};
use crate::error::{FomError, Result};
use crate::expansions::{curvature_identity, expansion_report, regularity_checks, Anchor, ClaimId};
use crate::fisher::{bayesian_fi, bayesian_fim, fisher_matrix, fisher_scalar, FisherForm};
use crate::info::{binary_entropy_ln, conditional_entropy, shannon_info, CeForm};
use crate::observer::{mpe_task, roc_auc, DetectionTask};
use crate::{Model, Numerics, Prior, ProductPrior};
use std::time::Instant;

/// Relative tolerance below which a displayed quadratic coefficient counts
/// as matching the fitted one.
const DISPLAY_TOLERANCE: f64 = 0.02;

/// A finished run: the report and the process exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
}

/// Runs `config` on a dedicated pool of `threads` workers (the global pool
/// when `None`).
pub fn run_with_threads(config: &RunConfig, threads: Option<usize>) -> std::result::Result<Outcome, CliError> {
    match threads {
        None => run(config),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::io(format!("cannot start worker pool: {e}")))?
            .install(|| run(config)),
    }
}

/// Validates `config`, dispatches the command and assembles the report.
///
/// Configuration errors and failures other than convergence return `Err`;
/// a convergence failure returns the partial report with exit code 3.
pub fn run(config: &RunConfig) -> std::result::Result<Outcome, CliError> {
    let start = Instant::now();
    let resolved = config.resolve()?;
    let mut ctx = Ctx {
        cfg: config,
        model: resolved.model,
        prior: resolved.prior,
        num: resolved.numerics.clone(),
        sections: Vec::new(),
        warnings: Vec::new(),
    };
    let status = ctx.dispatch(config.command);
    let (error, exit_code) = match status {
        Ok(()) => (None, EXIT_OK),
        Err(e @ FomError::Convergence { .. }) => {
            let ce = CliError::from(e);
            (Some(ce.object()), EXIT_CONVERGENCE)
        }
        Err(e) => return Err(e.into()),
    };
    let Resolved { numerics, .. } = resolved;
    let mut report = RunReport {
        artifact: ARTIFACT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        numerics,
        results: ctx.sections,
        warnings: ctx.warnings,
        error,
        wall_time_s: 0.0,
    };
    collect_warnings(&mut report);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(Outcome { report, exit_code })
}

/// Appends every estimate-level warning to the report list, once each.
fn collect_warnings(report: &mut RunReport) {
    fn walk(v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    match (k.as_str(), x) {
                        ("warnings", serde_json::Value::Array(ws)) => {
                            for w in ws.iter().filter_map(|w| w.as_str()) {
                                if !out.iter().any(|o| o == w) {
                                    out.push(w.to_string());
                                }
                            }
                        }
                        _ => walk(x, out),
                    }
                }
            }
            serde_json::Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    if let Ok(v) = serde_json::to_value(&report.results) {
        walk(&v, &mut report.warnings);
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    model: Model,
    prior: Option<Prior>,
    num: Numerics,
    sections: Vec<Section>,
    warnings: Vec<String>,
}

fn missing(key: &str, why: &str) -> FomError {
    FomError::config(key, format!("required {why}"))
}

impl Ctx<'_> {
    fn method(&self) -> crate::Method {
        self.cfg.method
    }

    fn theta(&self) -> Result<f64> {
        self.cfg.task.theta.ok_or_else(|| missing("task.theta", "for this command"))
    }

    fn prior(&self) -> Result<Prior> {
        self.prior.ok_or_else(|| missing("prior", "for this command"))
    }

    fn product_prior(&self) -> Result<ProductPrior> {
        ProductPrior::iid(self.prior()?, self.model.param_dim())
    }

    fn scalar_only(&self) -> Result<()> {
        if self.model.is_vector() {
            Err(FomError::config("model.family", "this command needs a scalar-parameter family"))
        } else {
            Ok(())
        }
    }

    fn tasks(&self) -> Result<Vec<DetectionTask>> {
        self.scalar_only()?;
        let t = &self.cfg.task;
        let pairs: Vec<(f64, f64)> = match (&t.deltas, t.theta0, t.theta1) {
            (Some(ds), _, _) => {
                let th = self.theta()?;
                ds.iter().map(|d| (th, th + d)).collect()
            }
            (None, Some(a), Some(b)) => vec![(a, b)],
            (None, None, _) => return Err(missing("task.theta0", "(or task.theta with task.deltas)")),
            (None, Some(_), None) => return Err(missing("task.theta1", "with task.theta0")),
        };
        pairs
            .into_iter()
            .map(|(a, b)| match (t.odds, &self.prior) {
                (Some(y), _) => DetectionTask::with_odds(a, b, y),
                (None, Some(p)) => DetectionTask::from_prior(p, a, b),
                (None, None) => DetectionTask::equal_odds(a, b),
            })
            .collect()
    }

    fn dispatch(&mut self, command: Command) -> Result<()> {
        match command {
            Command::Fi => self.fi(),
            Command::Bfi => self.bfi(),
            Command::Fim => self.fim(),
            Command::Roc => self.roc(),
            Command::Auc => self.auc(),
            Command::Mpe => self.mpe(),
            Command::Entropy => self.entropy(),
            Command::Si => self.si(),
            Command::Emse => self.emse(),
            Command::Bounds => self.bounds(),
            Command::Zivzakai => self.zivzakai(),
            Command::Expansions => self.expansions(),
            Command::Regularity => self.regularity(),
            Command::All => self.all(),
        }
    }

    fn all(&mut self) -> Result<()> {
        let battery: &[Command] = if self.model.is_vector() {
            &[Command::Fi, Command::Bfi, Command::Expansions]
        } else {
            &[
                Command::Fi,
                Command::Bfi,
                Command::Auc,
                Command::Mpe,
                Command::Entropy,
                Command::Si,
                Command::Emse,
                Command::Bounds,
                Command::Zivzakai,
                Command::Expansions,
                Command::Regularity,
            ]
        };
        for &c in battery {
            match self.dispatch(c) {
                Ok(()) => {}
                Err(e @ FomError::Convergence { .. }) => return Err(e),
                Err(e) => {
                    self.sections.push(Section::Skipped {
                        command: c,
                        reason: e.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    fn fi(&mut self) -> Result<()> {
        if self.model.is_vector() {
            let theta = self
                .cfg
                .task
                .theta_vector
                .clone()
                .ok_or_else(|| missing("task.theta_vector", "for the vector family"))?;
            let fisher = fisher_matrix(&self.model, &theta, self.method(), &self.num)?;
            self.sections.push(Section::FisherMatrix { theta, fisher });
        } else {
            let theta = self.theta()?;
            let fisher = fisher_scalar(&self.model, theta, self.method(), &self.num)?;
            self.sections.push(Section::Fisher { theta, fisher });
        }
        Ok(())
    }

    fn bfi(&mut self) -> Result<()> {
        if self.model.is_vector() {
            let fisher = bayesian_fim(&self.model, &self.product_prior()?, self.method(), &self.num)?;
            self.sections.push(Section::BayesianFisherMatrix { fisher });
            return Ok(());
        }
        let prior = self.prior()?;
        let forms = match self.cfg.task.fisher_form {
            Some(f) => vec![f],
            None => vec![FisherForm::ConditionalForm, FisherForm::PosteriorForm],
        };
        for form in forms {
            let fisher = bayesian_fi(&self.model, &prior, form, self.method(), &self.num)?;
            self.sections.push(Section::BayesianFisher { fisher });
        }
        Ok(())
    }

    fn fim(&mut self) -> Result<()> {
        if !self.model.is_vector() {
            return Err(FomError::config("model.family", "fim needs gaussian_location_vector"));
        }
        let t = &self.cfg.task;
        if t.theta_vector.is_none() && self.prior.is_none() {
            return Err(missing("task.theta_vector", "(or a prior) for fim"));
        }
        if t.theta_vector.is_some() {
            self.fi()?;
        }
        if self.prior.is_some() {
            self.bfi()?;
        }
        Ok(())
    }

    fn roc(&mut self) -> Result<()> {
        let tasks = self.tasks()?;
        if self.cfg.output.format == Format::Csv && tasks.len() != 1 {
            return Err(FomError::config("task.deltas", "csv output holds a single ROC curve"));
        }
        for task in tasks {
            let curve = roc_auc(&self.model, &task, self.method(), &self.num)?;
            self.sections.push(Section::Roc { task, curve });
        }
        Ok(())
    }

    fn auc(&mut self) -> Result<()> {
        for task in self.tasks()? {
            let curve = roc_auc(&self.model, &task, self.method(), &self.num)?;
            self.sections.push(Section::Auc {
                task,
                auc: curve.auc,
                detectability: curve.detectability,
            });
        }
        Ok(())
    }

    fn mpe(&mut self) -> Result<()> {
        for task in self.tasks()? {
            let mpe = mpe_task(&self.model, &task, self.method(), &self.num)?;
            self.sections.push(Section::Mpe { task, mpe });
        }
        Ok(())
    }

    fn entropy(&mut self) -> Result<()> {
        let forms = match self.cfg.task.ce_form {
            Some(f) => vec![f],
            None => vec![CeForm::TwoExpectation, CeForm::H0Only],
        };
        for task in self.tasks()? {
            for &form in &forms {
                let ce = conditional_entropy(&self.model, &task, self.method(), form, &self.num)?;
                self.sections.push(Section::Entropy {
                    form,
                    binary_entropy: binary_entropy_ln(task.ln_y),
                    conditional_entropy: ce,
                });
            }
        }
        Ok(())
    }

    fn si(&mut self) -> Result<()> {
        for task in self.tasks()? {
            let si = shannon_info(&self.model, &task, self.method(), &self.num)?;
            self.sections.push(Section::ShannonInfo { si });
        }
        Ok(())
    }

    /// Runs `f` for each choice; when the choice was not pinned in the
    /// config, inapplicable choices become skipped sections.
    fn each<T: Copy, F>(&mut self, command: Command, choices: Vec<T>, pinned: bool, mut f: F) -> Result<()>
    where
        F: FnMut(&mut Self, T) -> Result<()>,
    {
        for c in choices {
            match f(self, c) {
                Err(e @ FomError::Precondition(_)) if !pinned => self.sections.push(Section::Skipped {
                    command,
                    reason: e.to_string(),
                }),
                other => other?,
            }
        }
        Ok(())
    }

    fn emse(&mut self) -> Result<()> {
        self.scalar_only()?;
        let prior = self.prior()?;
        let pinned = self.cfg.task.estimator;
        let choices = pinned.map_or(vec![Estimator::PosteriorMean, Estimator::Mle], |e| vec![e]);
        self.each(Command::Emse, choices, pinned.is_some(), |ctx, estimator| {
            let e = emse(&ctx.model, &prior, estimator, ctx.method(), &ctx.num)?;
            ctx.sections.push(Section::Emse { estimator, emse: e });
            Ok(())
        })
    }

    fn bounds(&mut self) -> Result<()> {
        self.scalar_only()?;
        let t = &self.cfg.task;
        let kinds = match t.bound {
            Some(k) => vec![k],
            None => {
                let mut k = Vec::new();
                if t.theta.is_some() {
                    k.push(BoundKind::Crb);
                }
                if self.prior.is_some() {
                    k.extend([BoundKind::VanTrees, BoundKind::ZivZakaiStandard, BoundKind::ZivZakaiExpectation]);
                }
                if k.is_empty() {
                    return Err(missing("task.theta", "(or a prior) for bounds"));
                }
                k
            }
        };
        let pinned = t.bound.is_some() || t.estimator.is_some();
        let (estimator, theta) = (t.estimator, t.theta);
        self.each(Command::Bounds, kinds, pinned, |ctx, kind| {
            let est = estimator.unwrap_or(if kind == BoundKind::Crb {
                Estimator::Mle
            } else {
                Estimator::PosteriorMean
            });
            let prior = match kind {
                BoundKind::Crb => ctx.prior,
                _ => Some(ctx.prior()?),
            };
            let report = bound_report(&ctx.model, prior.as_ref(), est, kind, theta, ctx.method(), &ctx.num)?;
            ctx.sections.push(Section::Bound { report });
            Ok(())
        })
    }

    fn zivzakai(&mut self) -> Result<()> {
        self.scalar_only()?;
        let prior = self.prior()?;
        for form in [ZzForm::Standard, ZzForm::Expectation] {
            let bound = crate::bounds::ziv_zakai(&self.model, &prior, form, self.method(), &self.num)?;
            self.sections.push(Section::ZivZakai { form, bound });
        }
        Ok(())
    }

    fn anchors(&self, claim: ClaimId) -> Result<Vec<Anchor>> {
        Ok(match claim {
            ClaimId::DetectabilitySq | ClaimId::SiPointwise | ClaimId::HOfY => vec![Anchor::Point {
                theta: self.theta()?,
                prior: self.prior,
            }],
            ClaimId::CeAvg | ClaimId::SiAvg => vec![Anchor::Averaged { prior: self.prior()? }],
            ClaimId::CeDirectionalVector => {
                let prior = self.product_prior()?;
                let dim = prior.dim();
                let dirs = match &self.cfg.task.direction {
                    Some(u) => vec![u.clone()],
                    None => {
                        let mut e1 = vec![0.0; dim];
                        e1[0] = 1.0;
                        let diag = vec![1.0 / (dim as f64).sqrt(); dim];
                        if dim > 1 {
                            vec![e1, diag]
                        } else {
                            vec![e1]
                        }
                    }
                };
                dirs.into_iter()
                    .map(|direction| Anchor::Vector {
                        prior: prior.clone(),
                        direction,
                    })
                    .collect()
            }
        })
    }

    fn expansions(&mut self) -> Result<()> {
        let claims = match self.cfg.task.claim {
            Some(c) => vec![c],
            None if self.model.is_vector() => {
                self.prior()?;
                vec![ClaimId::CeDirectionalVector]
            }
            None => {
                let mut c = Vec::new();
                let (theta, prior) = (self.cfg.task.theta.is_some(), self.prior.is_some());
                if theta {
                    c.extend([ClaimId::DetectabilitySq, ClaimId::SiPointwise]);
                }
                if theta && prior {
                    c.push(ClaimId::HOfY);
                }
                if prior {
                    c.extend([ClaimId::CeAvg, ClaimId::SiAvg]);
                }
                if c.is_empty() {
                    return Err(missing("task.theta", "(or a prior) for expansions"));
                }
                c
            }
        };
        for claim in claims {
            for anchor in self.anchors(claim)? {
                let fit = expansion_report(&self.model, &anchor, claim, self.method(), &self.num)?;
                if fit.display_consistent(DISPLAY_TOLERANCE) == Some(false) {
                    self.warnings.push(format!(
                        "{}: displayed quadratic coefficient {:.6} disagrees with the fitted coefficient {:.6} (half the measured curvature {:.6})",
                        claim.name(),
                        fit.quadratic_coefficient_paper_display.unwrap_or(f64::NAN),
                        fit.quadratic_coefficient_fitted,
                        fit.fitted_curvature.value
                    ));
                }
                self.sections.push(Section::Expansion { fit });
            }
        }
        Ok(())
    }

    fn regularity(&mut self) -> Result<()> {
        self.scalar_only()?;
        let (theta, prior) = (self.theta()?, self.prior()?);
        let report = regularity_checks(&self.model, &prior, theta, &self.num)?;
        self.sections.push(Section::Regularity { report });
        let identity = curvature_identity(&self.model, &prior, theta, self.method(), &self.num)?;
        self.sections.push(Section::CurvatureIdentity { theta, identity });
        Ok(())
    }
}
