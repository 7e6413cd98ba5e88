//! Fisher information: pointwise `F(θ)`, the Bayesian FI in its conditional
//! and posterior forms, and the (Bayesian) Fisher information matrix.

use crate::bounds::PosteriorGrid;
use crate::error::{FomError, Result};
use crate::model::Model;
use crate::numerics::{derive_seed, mc_mean, mc_means, Estimate, EstimateMethod, Method, Numerics, Rng};
use crate::prior::{Prior, ProductPrior};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherForm {
    /// `⟨F(θ)⟩_θ + ⟨(d ln pr(θ)/dθ)²⟩_θ`.
    ConditionalForm,
    /// `⟨⟨(d ln pr(θ|g)/dθ)²⟩_{g|θ}⟩_θ`.
    PosteriorForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub value: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<FisherForm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Fisher information matrix with per-entry standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub matrix: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub method: EstimateMethod,
    pub min_eigenvalue: f64,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<FisherForm>,
}

impl FisherMatrix {
    fn new(
        matrix: Vec<Vec<f64>>,
        std_error: Vec<Vec<f64>>,
        method: EstimateMethod,
        seed: Option<u64>,
        form: Option<FisherForm>,
    ) -> Result<Self> {
        let n = matrix.len();
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (matrix[i][j] + matrix[j][i]));
        let min_eigenvalue = SymmetricEigen::new(m).eigenvalues.min();
        if min_eigenvalue < -1e-10 - 3.0 * max_entry(&std_error) {
            return Err(FomError::data(format!(
                "Fisher matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue})"
            )));
        }
        Ok(FisherMatrix {
            matrix,
            std_error,
            method,
            min_eigenvalue,
            seed,
            form,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    /// `u† F u`.
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(FomError::config(
                "direction",
                format!("direction has length {}, matrix is {}x{}", u.len(), self.dim(), self.dim()),
            ));
        }
        Ok(self
            .matrix
            .iter()
            .zip(u)
            .map(|(row, ui)| ui * row.iter().zip(u).map(|(f, uj)| f * uj).sum::<f64>())
            .sum())
    }
}

fn max_entry(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().cloned().fold(0.0, f64::max)
}

/// `F(θ) = ⟨score²⟩_{g|θ}` for a scalar-parameter family.
pub fn fisher_scalar(model: &Model, theta: f64, method: Method, num: &Numerics) -> Result<FisherResult> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "use fisher_matrix for the vector family"));
    }
    model.check_theta(theta)?;
    let value = match method.resolve(true, true)? {
        EstimateMethod::ClosedForm => Estimate::closed_form(model.fisher_closed_form(theta)),
        EstimateMethod::Quadrature => model.expect(theta, |g| model.score(g, theta).powi(2), num.quad_tol)?,
        EstimateMethod::MonteCarlo => {
            let m = *model;
            mc_mean(
                move |rng: &mut Rng| m.sample_one(rng, theta),
                |g: &f64| m.score(*g, theta).powi(2),
                num.mc_samples,
                derive_seed(num.seed, 0x0f1),
            )?
        }
    };
    Ok(FisherResult {
        value,
        form: None,
        theta: Some(theta),
    })
}

/// Closed form of the conditional-form Bayesian FI, where one is known.
fn bayesian_fi_closed_form(model: &Model, prior: &Prior) -> Option<f64> {
    let avg_f = match (model, prior) {
        (Model::GaussianLocation { sigma }, _) => 1.0 / (sigma * sigma),
        // ⟨1/θ⟩ and ⟨2/θ²⟩ under a lognormal prior
        (Model::PoissonRate, Prior::Lognormal { mu, s }) => (-mu + 0.5 * s * s).exp(),
        (Model::GaussianScale, Prior::Lognormal { mu, s }) => 2.0 * (-2.0 * mu + 2.0 * s * s).exp(),
        _ => return None,
    };
    Some(avg_f + prior.fisher_term())
}

/// Parallel prior-grid average with a fixed reduction order.
pub(crate) fn grid_average<F: Fn(f64) -> f64 + Sync>(nodes: &[f64], weights: &[f64], f: F) -> f64 {
    let terms: Vec<f64> = nodes.par_iter().zip(weights).map(|(&t, &w)| w * f(t)).collect();
    terms.iter().sum()
}

/// Bayesian Fisher information of a scalar model under `prior`.
pub fn bayesian_fi(
    model: &Model,
    prior: &Prior,
    form: FisherForm,
    method: Method,
    num: &Numerics,
) -> Result<FisherResult> {
    if model.is_vector() {
        return Err(FomError::config("model.family", "use bayesian_fim for the vector family"));
    }
    prior.check_model(model)?;
    let closed = bayesian_fi_closed_form(model, prior);
    let route = match form {
        FisherForm::ConditionalForm => method.resolve(closed.is_some(), true)?,
        FisherForm::PosteriorForm => method.resolve(false, true)?,
    };
    let m = *model;
    let p = *prior;
    let value = match (form, route) {
        (_, EstimateMethod::ClosedForm) => Estimate::closed_form(closed.unwrap_or(f64::NAN)),
        (FisherForm::ConditionalForm, EstimateMethod::Quadrature) => {
            let grid = prior.grid();
            let v = grid_average(&grid.nodes, &grid.weights, |t| {
                m.fisher_closed_form(t) + p.score(t).powi(2)
            });
            Estimate::quadrature(v, num.quad_tol, grid.len() as u64)
        }
        (FisherForm::ConditionalForm, EstimateMethod::MonteCarlo) => mc_mean(
            move |rng: &mut Rng| {
                let t = p.sample_one(rng);
                (t, m.sample_one(rng, t))
            },
            |&(t, g): &(f64, f64)| m.score(g, t).powi(2) + p.score(t).powi(2),
            num.mc_samples,
            derive_seed(num.seed, 0xbf1),
        )?,
        (FisherForm::PosteriorForm, EstimateMethod::Quadrature) => {
            let post = PosteriorGrid::new(model, prior)?;
            // ∫ pr(g) ⟨(d ln pr(θ|g)/dθ)²⟩_{θ|g} dg, the posterior normalised through pr(g)
            let inner = |g: f64| -> f64 {
                match post.posterior_weights(g) {
                    Ok((ln_ev, w)) => {
                        let avg: f64 = post
                            .nodes()
                            .iter()
                            .zip(&w)
                            .map(|(&t, wi)| wi * post.log_posterior_score(g, t).powi(2))
                            .sum();
                        ln_ev.exp() * avg
                    }
                    Err(_) => 0.0,
                }
            };
            let mut e = post.integrate_over_data(inner, num.quad_tol)?;
            e.effort *= post.nodes().len() as u64;
            e
        }
        (FisherForm::PosteriorForm, EstimateMethod::MonteCarlo) => mc_mean(
            move |rng: &mut Rng| {
                let t = p.sample_one(rng);
                (t, m.sample_one(rng, t))
            },
            |&(t, g): &(f64, f64)| (m.score(g, t) + p.score(t)).powi(2),
            num.mc_samples,
            derive_seed(num.seed, 0xbf2),
        )?,
    };
    Ok(FisherResult {
        value,
        form: Some(form),
        theta: None,
    })
}

fn require_vector(model: &Model) -> Result<(f64, usize)> {
    match *model {
        Model::GaussianLocationVector { sigma, dim } => Ok((sigma, dim)),
        _ => Err(FomError::config("model.family", "a Fisher matrix needs the vector family")),
    }
}

fn diag(dim: usize, d: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { d(i) } else { 0.0 }).collect())
        .collect()
}

fn tri_index(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect()
}

fn unpack(dim: usize, idx: &[(usize, usize)], est: &[Estimate]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut m = vec![vec![0.0; dim]; dim];
    let mut se = vec![vec![0.0; dim]; dim];
    for (&(i, j), e) in idx.iter().zip(est) {
        m[i][j] = e.value;
        m[j][i] = e.value;
        se[i][j] = e.std_error;
        se[j][i] = e.std_error;
    }
    (m, se)
}

/// Pointwise Fisher information matrix `𝐅(θ) = ⟨∇ln pr ∇ln pr†⟩_{g|θ}`.
pub fn fisher_matrix(model: &Model, theta: &[f64], method: Method, num: &Numerics) -> Result<FisherMatrix> {
    let (sigma, dim) = require_vector(model)?;
    model.eval_derivatives_vec(theta, theta)?;
    match method.resolve(true, false)? {
        EstimateMethod::ClosedForm => FisherMatrix::new(
            diag(dim, |_| 1.0 / (sigma * sigma)),
            diag(dim, |_| 0.0),
            EstimateMethod::ClosedForm,
            None,
            None,
        ),
        _ => {
            let idx = tri_index(dim);
            let m = *model;
            let th = theta.to_vec();
            let seed = derive_seed(num.seed, 0xf1a);
            let est = mc_means(
                move |rng: &mut Rng| m.sample_one_vec(rng, &th),
                |g: &Vec<f64>, out: &mut [f64]| {
                    let s: Vec<f64> = g.iter().zip(theta).map(|(gi, ti)| (gi - ti) / (sigma * sigma)).collect();
                    for (o, &(i, j)) in out.iter_mut().zip(&idx) {
                        *o = s[i] * s[j];
                    }
                },
                idx.len(),
                num.mc_samples,
                seed,
            )?;
            let (mat, se) = unpack(dim, &idx, &est);
            FisherMatrix::new(mat, se, EstimateMethod::MonteCarlo, Some(seed), None)
        }
    }
}

/// Bayesian Fisher information matrix `⟨𝐅(θ)⟩_θ + ⟨∇ln pr(θ) ∇ln pr(θ)†⟩_θ`
/// for the vector family under a product prior.
pub fn bayesian_fim(model: &Model, prior: &ProductPrior, method: Method, num: &Numerics) -> Result<FisherMatrix> {
    let (sigma, dim) = require_vector(model)?;
    if dim < 2 {
        return Err(FomError::config("model.dim", "a Fisher matrix needs at least two parameters"));
    }
    if prior.dim() != dim {
        return Err(FomError::config(
            "prior",
            format!("model has {dim} parameters but the prior has {} components", prior.dim()),
        ));
    }
    let f = 1.0 / (sigma * sigma);
    let form = Some(FisherForm::ConditionalForm);
    match method.resolve(true, true)? {
        EstimateMethod::ClosedForm => FisherMatrix::new(
            diag(dim, |i| f + prior.components[i].fisher_term()),
            diag(dim, |_| 0.0),
            EstimateMethod::ClosedForm,
            None,
            form,
        ),
        EstimateMethod::Quadrature => {
            // independent components: off-diagonal prior terms factor into ⟨s_i⟩⟨s_j⟩
            let grids: Vec<_> = prior.components.iter().map(|p| p.grid()).collect();
            let mean_score: Vec<f64> = prior
                .components
                .iter()
                .zip(&grids)
                .map(|(p, g)| g.average(|t| p.score(t)))
                .collect();
            let sq: Vec<f64> = prior
                .components
                .iter()
                .zip(&grids)
                .map(|(p, g)| g.average(|t| p.score(t).powi(2)))
                .collect();
            let mat = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| if i == j { f + sq[i] } else { mean_score[i] * mean_score[j] })
                        .collect()
                })
                .collect();
            FisherMatrix::new(mat, diag(dim, |_| num.quad_tol), EstimateMethod::Quadrature, None, form)
        }
        EstimateMethod::MonteCarlo => {
            let idx = tri_index(dim);
            let m = *model;
            let pp = prior.clone();
            let pp2 = prior.clone();
            let seed = derive_seed(num.seed, 0xbf3);
            let est = mc_means(
                move |rng: &mut Rng| {
                    let t = pp.sample_one(rng);
                    let g = m.sample_one_vec(rng, &t);
                    (t, g)
                },
                |(t, g): &(Vec<f64>, Vec<f64>), out: &mut [f64]| {
                    let sm: Vec<f64> = g.iter().zip(t).map(|(gi, ti)| (gi - ti) * f).collect();
                    let sp = pp2.score(t);
                    for (o, &(i, j)) in out.iter_mut().zip(&idx) {
                        *o = sm[i] * sm[j] + sp[i] * sp[j];
                    }
                },
                idx.len(),
                num.mc_samples,
                seed,
            )?;
            let (mat, se) = unpack(dim, &idx, &est);
            FisherMatrix::new(mat, se, EstimateMethod::MonteCarlo, Some(seed), form)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn scalar_closed_forms_by_quadrature() {
        let g = Model::gaussian_location(1.0).unwrap();
        let r = fisher_scalar(&g, 3.0, Method::Quadrature, &num()).unwrap();
        assert!((r.value.value - 1.0).abs() < 1e-9);
        let r = fisher_scalar(&Model::PoissonRate, 2.0, Method::Quadrature, &num()).unwrap();
        assert!((r.value.value - 0.5).abs() < 1e-9);
        let r = fisher_scalar(&Model::GaussianScale, 0.7, Method::Quadrature, &num()).unwrap();
        assert!((r.value.value / (2.0 / 0.49) - 1.0).abs() < 1e-9);
        assert!(fisher_scalar(&Model::PoissonRate, 0.0, Method::Auto, &num()).is_err());
    }

    #[test]
    fn scalar_monte_carlo() {
        let g = Model::gaussian_location(1.0).unwrap();
        let r = fisher_scalar(&g, 0.0, Method::MonteCarlo, &num()).unwrap();
        assert!((r.value.value - 1.0).abs() < 3.0 * r.value.std_error, "{r:?}");
        assert!(r.value.seed.is_some());
    }

    #[test]
    fn conjugate_bayesian_fi_both_forms() {
        let m = Model::gaussian_location(1.0).unwrap();
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        for route in [Method::ClosedForm, Method::Quadrature] {
            let r = bayesian_fi(&m, &p, FisherForm::ConditionalForm, route, &num()).unwrap();
            assert!((r.value.value - 2.0).abs() < 1e-8, "{route:?}: {r:?}");
        }
        let r = bayesian_fi(&m, &p, FisherForm::PosteriorForm, Method::Quadrature, &num()).unwrap();
        assert!((r.value.value - 2.0).abs() < 1e-6, "{r:?}");
        let r = bayesian_fi(&m, &p, FisherForm::PosteriorForm, Method::MonteCarlo, &num()).unwrap();
        assert!((r.value.value - 2.0).abs() < 3.0 * r.value.std_error, "{r:?}");
    }

    #[test]
    fn poisson_lognormal_bayesian_fi() {
        // e^{1/2} + 2e² from the lognormal moments
        let expected = 0.5f64.exp() + 2.0 * 1f64.exp().powi(2);
        let p = Prior::lognormal(0.0, 1.0).unwrap();
        let c = bayesian_fi(&Model::PoissonRate, &p, FisherForm::ConditionalForm, Method::Auto, &num()).unwrap();
        assert!((c.value.value - expected).abs() < 1e-12);
        let q = bayesian_fi(&Model::PoissonRate, &p, FisherForm::ConditionalForm, Method::Quadrature, &num()).unwrap();
        assert!((q.value.value - expected).abs() < 1e-6, "{q:?}");
        let post = bayesian_fi(&Model::PoissonRate, &p, FisherForm::PosteriorForm, Method::Quadrature, &num()).unwrap();
        assert!((post.value.value / expected - 1.0).abs() < 1e-6, "{post:?}");
    }

    #[test]
    fn incompatible_prior_is_rejected() {
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        let r = bayesian_fi(&Model::PoissonRate, &p, FisherForm::ConditionalForm, Method::Auto, &num());
        assert!(matches!(r, Err(FomError::Config { .. })));
    }

    #[test]
    fn bayesian_fim_isotropic() {
        let m = Model::gaussian_location_vector(1.0, 2).unwrap();
        let pp = ProductPrior::iid(Prior::gaussian(0.0, 1.0).unwrap(), 2).unwrap();
        for route in [Method::ClosedForm, Method::Quadrature] {
            let f = bayesian_fim(&m, &pp, route, &num()).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 2.0 } else { 0.0 };
                    assert!((f.matrix[i][j] - want).abs() < 1e-6, "{route:?} {f:?}");
                }
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            assert!((f.quadratic_form(&[h, h]).unwrap() - 2.0).abs() < 1e-6);
        }
        let wide = ProductPrior::iid(Prior::gaussian(0.0, 1e3).unwrap(), 2).unwrap();
        let f = bayesian_fim(&m, &wide, Method::Auto, &num()).unwrap();
        assert!((f.matrix[0][0] - 1.0).abs() < 1e-5);
        let mc = bayesian_fim(&m, &pp, Method::MonteCarlo, &num().with_samples(200_000)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((mc.matrix[i][j] - want).abs() < 4.0 * mc.std_error[i][j], "{mc:?}");
            }
        }
        let pp3 = ProductPrior::iid(Prior::gaussian(0.0, 1.0).unwrap(), 3).unwrap();
        assert!(bayesian_fim(&m, &pp3, Method::Auto, &num()).is_err());
    }
}
