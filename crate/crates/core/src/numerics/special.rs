//! Error function, normal tails and log-domain helpers.

use crate::error::{FomError, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse error function on (-1, 1), polished with Newton steps on `erf`.
pub fn erfinv(p: f64) -> Result<f64> {
    if !(p > -1.0 && p < 1.0) {
        return Err(FomError::domain(format!("erfinv requires p in (-1, 1), got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mut x = erfinv_guess(p);
    let scale = 2.0 / PI.sqrt();
    for _ in 0..6 {
        let slope = scale * (-x * x).exp();
        if slope == 0.0 {
            break;
        }
        let step = (erf(x) - p) / slope;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

// single-precision starting point (Giles, 2010)
fn erfinv_guess(p: f64) -> f64 {
    let mut w = -((1.0 - p) * (1.0 + p)).ln();
    let q = if w < 5.0 {
        w -= 2.5;
        let c = [
            2.810_226_36e-08, 3.432_739_39e-07, -3.523_387_7e-06, -4.391_506_54e-06, 0.000_218_580_87,
            -0.001_253_725_03, -0.004_177_681_64, 0.246_640_727, 1.501_409_41,
        ];
        c.iter().fold(0.0, |acc, &k| acc * w + k)
    } else {
        w = w.sqrt() - 3.0;
        let c = [
            -0.000_200_214_257, 0.000_100_950_558, 0.001_349_343_22, -0.003_673_428_44, 0.005_739_507_73,
            -0.007_622_461_3, 0.009_438_870_47, 1.001_674_06, 2.832_976_82,
        ];
        c.iter().fold(0.0, |acc, &k| acc * w + k)
    };
    q * p
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate for large `z`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

pub fn normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
