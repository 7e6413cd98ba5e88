//! Globally adaptive Gauss-Kronrod (10/21) quadrature and Gauss-Legendre rules.

use super::Estimate;
use crate::error::{FomError, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_452,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Stopping rule for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol: 0.0,
            max_intervals: 20_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

struct HeapKey {
    error: f64,
    index: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let check = |x: f64, v: f64| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FomError::data(format!("integrand is not finite at x = {x} (value {v})")))
        }
    };
    let fc = check(center, f(center))?;
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let x1 = center - dx;
        let x2 = center + dx;
        let f1 = check(x1, f(x1))?;
        let f2 = check(x2, f(x2))?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let result = res_k * half;
    res_abs *= h;
    res_asc *= h;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((result, err))
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`. Infinite
/// endpoints are mapped onto a finite interval with `x = t / (1 - t)` style
/// substitutions so the same adaptive rule serves every case.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Estimate> {
    if !(tol > 0.0) {
        return Err(FomError::config("tol", "quadrature tolerance must be positive"));
    }
    if lo.is_nan() || hi.is_nan() {
        return Err(FomError::domain("integration limits must not be NaN"));
    }
    if lo == hi {
        return Ok(Estimate::quadrature(0.0, tol, 0));
    }
    if lo > hi {
        return integrate_1d(f, hi, lo, tol).map(|e| e.affine(-1.0, 0.0));
    }
    let opts = QuadOptions::new(tol);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_with_breaks(f, &[lo, hi], opts),
        (true, false) => integrate_with_breaks(
            |t: f64| {
                let s = 1.0 - t;
                f(lo + t / s) / (s * s)
            },
            &[0.0, 1.0],
            opts,
        ),
        (false, true) => integrate_with_breaks(
            |t: f64| {
                let s = 1.0 - t;
                f(hi - t / s) / (s * s)
            },
            &[0.0, 1.0],
            opts,
        ),
        (false, false) => integrate_with_breaks(
            |t: f64| {
                let s = 1.0 - t * t;
                f(t / s) * (1.0 + t * t) / (s * s)
            },
            &[-1.0, 0.0, 1.0],
            opts,
        ),
    }
}

/// Adaptive integration over the finite, ascending breakpoints `breaks`;
/// each consecutive pair seeds one initial panel.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<Estimate> {
    if breaks.len() < 2 {
        return Err(FomError::config("breaks", "need at least two breakpoints"));
    }
    if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(FomError::domain("breakpoints must be finite and ascending"));
    }
    let mut panels: Vec<Panel> = Vec::new();
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = kronrod21(&f, w[0], w[1])?;
            heap.push(HeapKey {
                error,
                index: panels.len(),
            });
            panels.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    let mut total_err: f64 = panels.iter().map(|p| p.error).sum();
    let mut frozen_err = 0.0;
    let target = |value: f64| opts.abs_tol.max(opts.rel_tol * value.abs());
    let sum_values = |panels: &[Panel]| panels.iter().map(|p| p.value).sum::<f64>();
    let mut value = sum_values(&panels);

    while total_err > target(value) {
        let Some(top) = heap.pop() else { break };
        if panels.len() >= opts.max_intervals {
            return Err(FomError::convergence(
                format!(
                    "adaptive quadrature hit {} intervals with error estimate {total_err:.3e}",
                    opts.max_intervals
                ),
                value,
            ));
        }
        let (a, b) = (panels[top.index].a, panels[top.index].b);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) || (b - a) <= 8.0 * f64::EPSILON * a.abs().max(b.abs()) {
            // cannot refine further; its error stays in the total
            frozen_err += panels[top.index].error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod21(&f, a, mid)?;
        let (v2, e2) = kronrod21(&f, mid, b)?;
        total_err += e1 + e2 - panels[top.index].error;
        value += v1 + v2 - panels[top.index].value;
        panels[top.index] = Panel {
            a,
            b: mid,
            value: v1,
            error: e1,
        };
        heap.push(HeapKey {
            error: e1,
            index: top.index,
        });
        heap.push(HeapKey {
            error: e2,
            index: panels.len(),
        });
        panels.push(Panel {
            a: mid,
            b,
            value: v2,
            error: e2,
        });
        if panels.len().is_multiple_of(64) {
            // refresh running sums to shed accumulated rounding
            value = sum_values(&panels);
            total_err = panels.iter().map(|p| p.error).sum();
        }
    }
    // deterministic final sum in ascending order of position
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = sum_values(&panels);
    let total_err: f64 = panels.iter().map(|p| p.error).sum();
    let effort = 21 * panels.len() as u64;
    let tol = target(value);
    let mut est = Estimate::quadrature(value, tol, effort);
    if total_err > tol {
        est.std_error = total_err;
        est = est.with_warning(format!(
            "quadrature roundoff-limited: error estimate {total_err:.3e} above tolerance {tol:.3e} ({frozen_err:.3e} unrefinable)"
        ));
    }
    Ok(est)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}
