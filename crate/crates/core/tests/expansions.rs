use fomlab::expansions::{expansion_report, regularity_checks, Anchor, ClaimId};
use fomlab::{Method, Model, Numerics, Prior, ProductPrior};
use std::f64::consts::FRAC_1_SQRT_2;

#[test]
fn vector_directions_agree() {
    let m = Model::gaussian_location_vector(1.0, 2).unwrap();
    let pp = ProductPrior::iid(Prior::gaussian(0.0, 1.0).unwrap(), 2).unwrap();
    let num = Numerics::default();
    let mut fitted = Vec::new();
    for u in [vec![1.0, 0.0], vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]] {
        let a = Anchor::Vector {
            prior: pp.clone(),
            direction: u,
        };
        let fit = expansion_report(&m, &a, ClaimId::CeDirectionalVector, Method::Auto, &num).unwrap();
        assert!((fit.predicted_curvature + 0.5).abs() < 1e-6);
        assert!(fit.rel_error <= 0.02, "{fit:?}");
        fitted.push(fit.fitted_curvature.value);
    }
    assert!((fitted[0] - fitted[1]).abs() <= 0.02 * fitted[0].abs());
}

#[test]
fn poisson_pointwise_si() {
    let a = Anchor::Point { theta: 2.0, prior: None };
    let fit = expansion_report(&Model::PoissonRate, &a, ClaimId::SiPointwise, Method::Auto, &Numerics::default()).unwrap();
    assert!((fit.predicted_curvature - 0.125).abs() < 1e-12);
    assert!(fit.rel_error <= 0.02, "{fit:?}");
}

#[test]
fn averaged_si_for_poisson() {
    let a = Anchor::Averaged {
        prior: Prior::lognormal(1.0, 0.3).unwrap(),
    };
    let fit = expansion_report(&Model::PoissonRate, &a, ClaimId::SiAvg, Method::Auto, &Numerics::default()).unwrap();
    assert!(fit.rel_error <= 0.02, "{fit:?}");
}

#[test]
fn regularity_poisson_and_scale() {
    let num = Numerics::default().with_samples(200_000);
    let r = regularity_checks(&Model::PoissonRate, &Prior::lognormal(0.5, 0.5).unwrap(), 2.0, &num).unwrap();
    assert!(r.all_pass, "{r:?}");
    let r = regularity_checks(&Model::GaussianScale, &Prior::lognormal(0.0, 0.5).unwrap(), 1.5, &num).unwrap();
    assert!(r.all_pass, "{r:?}");
}

#[test]
fn fit_serializes_with_fixed_keys() {
    let a = Anchor::Point { theta: 0.0, prior: None };
    let fit = expansion_report(
        &Model::gaussian_location(1.0).unwrap(),
        &a,
        ClaimId::DetectabilitySq,
        Method::Auto,
        &Numerics::default(),
    )
    .unwrap();
    let v = serde_json::to_value(&fit).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "claim_id",
            "fitted_curvature",
            "grid",
            "predicted_curvature",
            "quadratic_coefficient_fitted",
            "quadratic_coefficient_paper_display",
            "rel_error",
            "values"
        ]
    );
    assert_eq!(v["claim_id"], "detectability_sq");
    let back: fomlab::expansions::ExpansionFit = serde_json::from_value(v).unwrap();
    assert_eq!(back, fit);
}
