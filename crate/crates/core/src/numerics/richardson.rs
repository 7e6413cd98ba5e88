//! Finite-difference derivatives at zero with Richardson extrapolation.

use super::{Estimate, EstimateMethod};
use crate::error::{FomError, Result};

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 3 {
        return Err(FomError::config("curvature_ladder", "need at least 3 step sizes"));
    }
    if ladder.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(FomError::config("curvature_ladder", "step sizes must be positive and finite"));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FomError::config("curvature_ladder", "ladder must be strictly decreasing"));
    }
    Ok(())
}

/// Extrapolates central second differences `diffs[k]` taken at steps
/// `ladder[k]` to zero step (Neville's scheme in `h^2`).
///
/// The value is the highest-order extrapolant and the standard error the
/// spread between the two finest diagonal extrapolants. When extrapolation
/// widens that spread beyond the raw spread of the two finest differences
/// (noise-dominated input), the finest raw difference is reported instead
/// with the wider of the two spreads.
pub fn richardson_curvature(ladder: &[f64], diffs: &[f64]) -> Result<Estimate> {
    validate_ladder(ladder)?;
    if diffs.len() != ladder.len() {
        return Err(FomError::config("curvature_ladder", "one difference per step is required"));
    }
    let n = ladder.len();
    let x: Vec<f64> = ladder.iter().map(|h| h * h).collect();
    let mut table = vec![vec![0.0; n]; n];
    for k in 0..n {
        table[k][0] = diffs[k];
        for j in 1..=k {
            let ratio = x[k - j] / x[k] - 1.0;
            table[k][j] = table[k][j - 1] + (table[k][j - 1] - table[k - 1][j - 1]) / ratio;
        }
    }
    let best = table[n - 1][n - 1];
    let spread = (best - table[n - 2][n - 2]).abs();
    let raw_spread = (diffs[n - 1] - diffs[n - 2]).abs();
    let mut est = Estimate {
        value: best,
        std_error: spread,
        method: EstimateMethod::Quadrature,
        effort: (2 * n + 1) as u64,
        seed: None,
        warnings: Vec::new(),
    };
    if spread > raw_spread && spread > 1e-12 * best.abs().max(1e-300) {
        est.value = diffs[n - 1];
        est.std_error = spread.max(raw_spread);
        est.warnings
            .push("Richardson extrapolants disagree; reporting finest central difference".into());
    }
    Ok(est)
}

/// Second derivative of `f` at 0 from central differences on a strictly
/// decreasing step ladder, Richardson-extrapolated.
pub fn curvature_at_zero<F: Fn(f64) -> f64>(f: F, ladder: &[f64]) -> Result<Estimate> {
    validate_ladder(ladder)?;
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FomError::data(format!("function value at {x} is not finite ({v})")))
        }
    };
    let f0 = eval(0.0)?;
    let diffs = ladder
        .iter()
        .map(|&h| Ok((eval(h)? - 2.0 * f0 + eval(-h)?) / (h * h)))
        .collect::<Result<Vec<f64>>>()?;
    richardson_curvature(ladder, &diffs)
}

/// First derivative of `f` at 0: central differences at `h` and `h/2`,
/// extrapolated; the standard error is the size of the extrapolation step.
pub fn first_derivative_at_zero<F: Fn(f64) -> f64>(f: F, h: f64) -> Result<Estimate> {
    if !(h > 0.0) {
        return Err(FomError::config("step", "finite-difference step must be positive"));
    }
    let d = |s: f64| -> Result<f64> {
        let (a, b) = (f(s), f(-s));
        if a.is_finite() && b.is_finite() {
            Ok((a - b) / (2.0 * s))
        } else {
            Err(FomError::data(format!("function not finite at ±{s}")))
        }
    };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    let value = (4.0 * fine - coarse) / 3.0;
    Ok(Estimate {
        value,
        std_error: (value - fine).abs(),
        method: EstimateMethod::Quadrature,
        effort: 4,
        seed: None,
        warnings: Vec::new(),
    })
}
