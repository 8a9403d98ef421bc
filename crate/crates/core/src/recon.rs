//! Broadcast simulation on the binary tree and census-based estimates of how
//! much information about the root survives to depth `d`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::Coupling;
use crate::boundary::Branch;
use crate::channel::{channel_for, Channel};
use crate::error::{Error, Result};

/// Identifies the sampling scheme in output metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha); stream = tree index, node v (heap order) draws the 64-bit word at position 2v";

/// Leaves at depth `d` number `2^d`; deeper trees are refused.
pub const MAX_DEPTH: usize = 22;
pub const MIN_SAMPLES: usize = 100;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Bins per coordinate of the normalized census.
pub const CENSUS_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BroadcastSample {
    pub root_spin: u8,
    pub depth: usize,
    /// Number of depth-`depth` vertices carrying spin 0, 1, 2.
    pub census: [u32; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    pub depth: usize,
    pub tv: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

fn draw(row: &[f64; 3], word: u64) -> u8 {
    let u = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    if u < row[0] {
        0
    } else if u < row[0] + row[1] {
        1
    } else {
        2
    }
}

/// Census of every level `0..=depth` of one tree. The tree's randomness is the
/// ChaCha8 stream `stream` under `seed`, consumed in breadth-first order, so a
/// deeper tree extends a shallower one with the same stream.
fn sample_tree_levels(ch: &Channel, root_spin: u8, depth: usize, seed: u64, stream: u64) -> Vec<[u32; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(4);

    let mut levels = Vec::with_capacity(depth + 1);
    let mut current = vec![root_spin];
    let mut census = [0u32; 3];
    census[root_spin as usize] = 1;
    levels.push(census);
    for _ in 0..depth {
        let mut next = Vec::with_capacity(current.len() * 2);
        let mut census = [0u32; 3];
        for &parent in &current {
            let row = &ch.p[parent as usize];
            for _ in 0..2 {
                let s = draw(row, rng.next_u64());
                census[s as usize] += 1;
                next.push(s);
            }
        }
        levels.push(census);
        current = next;
    }
    levels
}

fn check_args(root_spin: u8, depth: usize) -> Result<()> {
    if root_spin > 2 {
        return Err(Error::domain(format!("root spin {root_spin} is not in {{0, 1, 2}}")));
    }
    if depth > MAX_DEPTH {
        return Err(Error::domain(format!("depth {depth} exceeds the limit of {MAX_DEPTH} (2^{MAX_DEPTH} leaves)")));
    }
    Ok(())
}

/// One broadcast from `root_spin` down to `depth`; deterministic in `seed`.
pub fn sample_broadcast(ch: &Channel, root_spin: u8, depth: usize, seed: u64) -> Result<BroadcastSample> {
    check_args(root_spin, depth)?;
    let levels = sample_tree_levels(ch, root_spin, depth, seed, 0);
    Ok(BroadcastSample { root_spin, depth, census: levels[depth] })
}

/// Per-level censuses of `n` independent trees. Tree `i` uses stream
/// `2i + offset`, so results do not depend on the thread schedule.
fn sample_forest(ch: &Channel, root_spin: u8, depth: usize, n: usize, seed: u64, offset: u64) -> Vec<Vec<[u32; 3]>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_tree_levels(ch, root_spin, depth, seed, 2 * i + offset))
        .collect()
}

fn census_key(census: &[u32; 3]) -> u16 {
    let n = census.iter().sum::<u32>() as f64;
    let bin = |c: u32| ((c as f64 / n * CENSUS_BINS as f64) as usize).min(CENSUS_BINS - 1);
    (bin(census[0]) * CENSUS_BINS + bin(census[2])) as u16
}

/// Cross-fitted TV: each half of the data chooses the set `{p̂ > q̂}`, the
/// other half measures `P(A) − Q(A)` on it, and the two are averaged.
/// Plug-in TV on a sparse histogram is biased upward by roughly
/// `support/√n`; splitting removes that bias at the cost of some variance.
fn cross_fit_tv(p: &[u16], q: &[u16]) -> f64 {
    let nbins = CENSUS_BINS * CENSUS_BINS;
    let hist = |keys: &[u16]| {
        let mut h = vec![0u32; nbins];
        keys.iter().for_each(|&k| h[k as usize] += 1);
        h
    };
    let (p1, p2) = p.split_at(p.len() / 2);
    let (q1, q2) = q.split_at(q.len() / 2);
    let (hp1, hp2, hq1, hq2) = (hist(p1), hist(p2), hist(q1), hist(q2));
    let half = |hp_a: &[u32], hq_a: &[u32], na: (usize, usize), hp_b: &[u32], hq_b: &[u32], nb: (usize, usize)| {
        let mut v = 0.0;
        for k in 0..nbins {
            if hp_a[k] as f64 / na.0 as f64 > hq_a[k] as f64 / na.1 as f64 {
                v += hp_b[k] as f64 / nb.0 as f64 - hq_b[k] as f64 / nb.1 as f64;
            }
        }
        v
    };
    let n1 = (p1.len(), q1.len());
    let n2 = (p2.len(), q2.len());
    let a = half(&hp1, &hq1, n1, &hp2, &hq2, n2);
    let b = half(&hp2, &hq2, n2, &hp1, &hq1, n1);
    (0.5 * (a + b)).clamp(0.0, 1.0)
}

fn bootstrap_stderr(p: &[u16], q: &[u16], seed: u64, depth: usize) -> f64 {
    let draws: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - (depth as u64) * 1024 - b);
            let mut resample = |keys: &[u16]| -> Vec<u16> {
                (0..keys.len()).map(|_| keys[(rng.next_u64() % keys.len() as u64) as usize]).collect()
            };
            let rp = resample(p);
            let rq = resample(q);
            cross_fit_tv(&rp, &rq)
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    var.sqrt()
}

fn estimate_from_keys(p: &[u16], q: &[u16], depth: usize, n_samples: usize, seed: u64) -> TvEstimate {
    TvEstimate { depth, tv: cross_fit_tv(p, q), stderr: bootstrap_stderr(p, q, seed, depth), n_samples, seed }
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::domain(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    Ok(())
}

/// Census TV between root spins 0 and 2 for every depth `1..=max_depth`,
/// from a single forest per root spin.
pub fn decay_curve_channel(ch: &Channel, max_depth: usize, n_samples: usize, seed: u64) -> Result<Vec<TvEstimate>> {
    check_args(0, max_depth)?;
    check_samples(n_samples)?;
    let from0 = sample_forest(ch, 0, max_depth, n_samples, seed, 0);
    let from2 = sample_forest(ch, 2, max_depth, n_samples, seed, 1);
    Ok((1..=max_depth)
        .map(|d| {
            let p: Vec<u16> = from0.iter().map(|t| census_key(&t[d])).collect();
            let q: Vec<u16> = from2.iter().map(|t| census_key(&t[d])).collect();
            estimate_from_keys(&p, &q, d, n_samples, seed)
        })
        .collect())
}

pub fn decay_curve(theta: Coupling, branch: Branch, max_depth: usize, n_samples: usize, seed: u64) -> Result<Vec<TvEstimate>> {
    decay_curve_channel(&channel_for(theta, branch)?, max_depth, n_samples, seed)
}

/// Census TV at a single depth. Equal, bit for bit, to the corresponding
/// entry of [`decay_curve`] with the same seed.
pub fn estimate_census_tv(theta: Coupling, branch: Branch, depth: usize, n_samples: usize, seed: u64) -> Result<TvEstimate> {
    let ch = channel_for(theta, branch)?;
    check_args(0, depth)?;
    check_samples(n_samples)?;
    let keys = |root: u8, offset: u64| -> Vec<u16> {
        sample_forest(&ch, root, depth, n_samples, seed, offset).iter().map(|t| census_key(&t[depth])).collect()
    };
    Ok(estimate_from_keys(&keys(0, 0), &keys(2, 1), depth, n_samples, seed))
}

/// Mean fraction of depth-`depth` vertices with each spin, with its standard error.
pub fn empirical_marginal(
    ch: &Channel,
    root_spin: u8,
    depth: usize,
    n_samples: usize,
    seed: u64,
) -> Result<([f64; 3], [f64; 3])> {
    check_args(root_spin, depth)?;
    check_samples(n_samples)?;
    let forest = sample_forest(ch, root_spin, depth, n_samples, seed, 0);
    let leaves = (1u64 << depth) as f64;
    let mut mean = [0.0; 3];
    let mut err = [0.0; 3];
    for s in 0..3 {
        let fr: Vec<f64> = forest.iter().map(|t| t[depth][s] as f64 / leaves).collect();
        let m = fr.iter().sum::<f64>() / fr.len() as f64;
        let v = fr.iter().map(|f| (f - m).powi(2)).sum::<f64>() / (fr.len() - 1) as f64;
        mean[s] = m;
        err[s] = (v / fr.len() as f64).sqrt();
    }
    Ok((mean, err))
}

/// Outcome of a statistical check run under the retry policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCheck<T> {
    pub passed: bool,
    pub attempts: usize,
    pub n_samples: usize,
    pub value: T,
}

/// Run `run(n)` and accept if `check` holds; otherwise retry with four times
/// the samples, up to `max_attempts` runs in total.
pub fn with_retry<T>(
    n_samples: usize,
    max_attempts: usize,
    mut run: impl FnMut(usize) -> Result<T>,
    check: impl Fn(&T) -> bool,
) -> Result<SoftCheck<T>> {
    let mut n = n_samples;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let value = run(n)?;
        let passed = check(&value);
        if passed || attempts >= max_attempts {
            return Ok(SoftCheck { passed, attempts, n_samples: n, value });
        }
        n *= 4;
    }
}
