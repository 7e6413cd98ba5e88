//! Seed-deterministic Monte Carlo means.
//!
//! Samples are drawn in fixed-size blocks. Block `b` of a computation keyed
//! by `seed` always uses ChaCha stream `b` of the generator seeded from
//! `seed`, so the draws (and the pairwise reduction over block statistics)
//! are identical whatever the number of worker threads.

use super::Estimate;
use crate::error::{FomError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator type handed to samplers.
pub type Rng = ChaCha8Rng;

/// Samples per block; the unit of parallel work and of stream assignment.
pub const BLOCK_SIZE: usize = 8192;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-computation `tag` of a run keyed by `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5bd1_e995)))
}

/// Generator for block `block` of the computation keyed by `seed`.
pub fn substream(seed: u64, block: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn block_ranges(n: usize) -> Vec<(u64, usize, usize)> {
    (0..n.div_ceil(BLOCK_SIZE))
        .map(|b| {
            let start = b * BLOCK_SIZE;
            (b as u64, start, (start + BLOCK_SIZE).min(n))
        })
        .collect()
}

/// Draws `n` samples deterministically (block-parallel).
pub fn sample_blocks<T, S>(sampler: S, n: usize, seed: u64) -> Vec<T>
where
    T: Send,
    S: Fn(&mut Rng) -> T + Sync,
{
    let blocks: Vec<Vec<T>> = block_ranges(n)
        .into_par_iter()
        .map(|(b, start, end)| {
            let mut rng = substream(seed, b);
            (start..end).map(|_| sampler(&mut rng)).collect()
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments {
        count: 0.0,
        mean: 0.0,
        m2: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        Moments {
            count,
            mean: a.mean + d * b.count / count,
            m2: a.m2 + b.m2 + d * d * a.count * b.count / count,
        }
    }
}

fn tree_merge(mut level: Vec<Moments>) -> Moments {
    if level.is_empty() {
        return Moments::EMPTY;
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| if c.len() == 2 { Moments::merge(c[0], c[1]) } else { c[0] })
            .collect();
    }
    level[0]
}

/// Monte Carlo means of `k` functions of the same samples.
///
/// `f` writes its `k` outputs into the provided slice. Any non-finite output
/// aborts with a data error naming the sample index.
pub fn mc_means<T, S, F>(sampler: S, f: F, k: usize, n: usize, seed: u64) -> Result<Vec<Estimate>>
where
    S: Fn(&mut Rng) -> T + Sync,
    F: Fn(&T, &mut [f64]) + Sync,
{
    if n < 2 {
        return Err(FomError::config("mc_samples", "Monte Carlo needs at least 2 samples"));
    }
    let per_block: Vec<Result<Vec<Moments>>> = block_ranges(n)
        .into_par_iter()
        .map(|(b, start, end)| {
            let mut rng = substream(seed, b);
            let mut acc = vec![Moments::EMPTY; k];
            let mut out = vec![0.0; k];
            for i in start..end {
                let sample = sampler(&mut rng);
                f(&sample, &mut out);
                for (j, (m, &x)) in acc.iter_mut().zip(out.iter()).enumerate() {
                    if !x.is_finite() {
                        return Err(FomError::data(format!(
                            "Monte Carlo function {j} is not finite ({x}) at sample {i} (seed {seed})"
                        )));
                    }
                    m.push(x);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut columns: Vec<Vec<Moments>> = vec![Vec::with_capacity(per_block.len()); k];
    for block in per_block {
        for (col, m) in columns.iter_mut().zip(block?) {
            col.push(m);
        }
    }
    Ok(columns
        .into_iter()
        .map(|col| {
            let m = tree_merge(col);
            let var = m.m2 / (m.count - 1.0);
            Estimate::monte_carlo(m.mean, (var / m.count).sqrt(), n as u64, seed)
        })
        .collect())
}

/// Monte Carlo mean of `f` over `n` draws of `sampler`; the standard error
/// is the sample standard deviation over `sqrt(n)`.
pub fn mc_mean<T, S, F>(sampler: S, f: F, n: usize, seed: u64) -> Result<Estimate>
where
    S: Fn(&mut Rng) -> T + Sync,
    F: Fn(&T) -> f64 + Sync,
{
    mc_means(sampler, |t: &T, out: &mut [f64]| out[0] = f(t), 1, n, seed)
        .map(|mut v| v.remove(0))
}
