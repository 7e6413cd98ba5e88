use fomlab::bounds::{bound_report, emse, ziv_zakai, BoundKind, Estimator, ZzForm};
use fomlab::{FomError, Method, Model, Numerics, Prior};

#[test]
fn poisson_ziv_zakai_forms_agree() {
    let num = Numerics::default();
    let p = Prior::lognormal(0.5, 0.5).unwrap();
    let s = ziv_zakai(&Model::PoissonRate, &p, ZzForm::Standard, Method::Auto, &num).unwrap();
    let e = ziv_zakai(&Model::PoissonRate, &p, ZzForm::Expectation, Method::Auto, &num).unwrap();
    assert!((s.value / e.value - 1.0).abs() < 1e-6, "{s:?} {e:?}");
    let pm = emse(&Model::PoissonRate, &p, Estimator::PosteriorMean, Method::Auto, &num).unwrap();
    assert!(s.value <= pm.value + 1e-6);
}

#[test]
fn bump_prior_bounds_are_ordered() {
    let num = Numerics::default();
    let m = Model::gaussian_location(0.5).unwrap();
    let p = Prior::bump(0.0, 2.0).unwrap();
    let pm = emse(&m, &p, Estimator::PosteriorMean, Method::Auto, &num).unwrap();
    let vt = bound_report(&m, Some(&p), Estimator::PosteriorMean, BoundKind::VanTrees, None, Method::Auto, &num).unwrap();
    let zz = bound_report(&m, Some(&p), Estimator::PosteriorMean, BoundKind::ZivZakaiExpectation, None, Method::Auto, &num).unwrap();
    assert!(vt.satisfied && zz.satisfied, "{vt:?} {zz:?}");
    assert!(zz.bound_value.value <= pm.value + 1e-6);
}

#[test]
fn crb_rejects_missing_mle() {
    let num = Numerics::default().with_samples(10_000);
    let r = bound_report(&Model::GaussianScale, None, Estimator::Mle, BoundKind::Crb, Some(1.0), Method::Auto, &num);
    assert!(matches!(r, Err(FomError::Precondition(_))), "{r:?}");
    let r = bound_report(&Model::PoissonRate, None, Estimator::Mle, BoundKind::Crb, None, Method::Auto, &num);
    assert!(matches!(r, Err(FomError::Config { .. })), "{r:?}");
}

#[test]
fn ziv_zakai_rejects_monte_carlo() {
    let m = Model::gaussian_location(1.0).unwrap();
    let p = Prior::gaussian(0.0, 1.0).unwrap();
    let r = ziv_zakai(&m, &p, ZzForm::Standard, Method::MonteCarlo, &Numerics::default());
    assert!(matches!(r, Err(FomError::Config { .. })));
}
