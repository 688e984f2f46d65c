//! Seeded, chunked Monte Carlo estimation.
//!
//! Draws are split into fixed-size chunks; chunk `c` uses a ChaCha stream
//! keyed by `(seed, c)`. Per-chunk sums are reduced in chunk order, so
//! results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ProductPrior;

/// Profiles per Monte Carlo chunk.
pub const CHUNK: usize = 4096;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Below this many draws the normal approximation is not trusted by
/// [`McEstimate::with_fallback`].
pub const NORMAL_MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMethod {
    Normal,
    Hoeffding,
}

/// Monte Carlo mean with a 99% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: usize,
    pub method: ConfidenceMethod,
    #[serde(skip)]
    std_dev: f64,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        McEstimate {
            mean: value,
            half_width: 0.0,
            samples: 0,
            method: ConfidenceMethod::Normal,
            std_dev: 0.0,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Sample standard deviation of the summands.
    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    /// Replaces the normal half-width by the Hoeffding bound for summands in
    /// an interval of length `range`.
    pub fn hoeffding(mut self, range: f64) -> Self {
        let n = self.samples.max(1) as f64;
        self.half_width = range * ((2.0f64 / 0.01).ln() / (2.0 * n)).sqrt();
        self.method = ConfidenceMethod::Hoeffding;
        self
    }

    /// Hoeffding half-width when fewer than [`NORMAL_MIN_SAMPLES`] draws were used.
    pub fn with_fallback(self, range: f64) -> Self {
        if self.samples < NORMAL_MIN_SAMPLES && range.is_finite() {
            self.hoeffding(range)
        } else {
            self
        }
    }
}

/// RNG for one chunk of a seeded computation.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

pub(crate) fn chunk_count(total: usize) -> usize {
    total.div_ceil(CHUNK)
}

fn chunk_len(total: usize, c: usize) -> usize {
    CHUNK.min(total - c * CHUNK)
}

/// `count` profiles from `prior`, row-major, using the chunked seeding scheme.
pub fn draw_profiles(prior: &ProductPrior, count: usize, seed: u64) -> Vec<f64> {
    let n = prior.n();
    let chunks: Vec<Vec<f64>> = (0..chunk_count(count))
        .into_par_iter()
        .map(|c| {
            let len = chunk_len(count, c);
            let mut rng = chunk_rng(seed, c as u64);
            let mut out = vec![0.0; len * n];
            for row in out.chunks_mut(n) {
                prior.sample_into(&mut rng, row);
            }
            out
        })
        .collect();
    chunks.concat()
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count,
            sum: self.sum + other.sum,
            mean: self.mean + d * other.count as f64 / count as f64,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * other.count as f64 / count as f64,
        }
    }

    fn estimate(self) -> McEstimate {
        let n = self.count;
        let mean = if n == 0 { 0.0 } else { self.sum / n as f64 };
        let var = if n > 1 { (self.m2 / (n - 1) as f64).max(0.0) } else { 0.0 };
        let std_dev = var.sqrt();
        McEstimate {
            mean,
            half_width: if n == 0 { 0.0 } else { Z99 * std_dev / (n as f64).sqrt() },
            samples: n,
            method: ConfidenceMethod::Normal,
            std_dev,
        }
    }
}

/// Mean of `f` over rows of a row-major matrix with `n` columns, reduced
/// chunk by chunk in the same order as [`estimate`].
pub fn mean_over_rows<F>(rows: &[f64], n: usize, f: F) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = rows.len() / n;
    let parts: Vec<Moments> = (0..chunk_count(m))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK * n;
            let end = start + chunk_len(m, c) * n;
            let mut acc = Moments::default();
            for row in rows[start..end].chunks(n) {
                acc.push(f(row));
            }
            acc
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge).estimate()
}

/// Monte Carlo estimate of `E[f(v)]` for `v ~ prior`.
///
/// Uses exactly the draws [`draw_profiles`] would produce for the same
/// `(count, seed)`, so `estimate(prior, m, s, f)` equals
/// `mean_over_rows(&draw_profiles(prior, m, s), n, f)` bit for bit.
pub fn estimate<F>(prior: &ProductPrior, count: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    estimate_with(prior, count, seed, |profile, _| f(profile))
}

/// Like [`estimate`], but `f` also receives the running RNG of the chunk,
/// for estimators that need extra randomness per draw.
pub fn estimate_with<F>(prior: &ProductPrior, count: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&[f64], &mut ChaCha8Rng) -> f64 + Sync,
{
    let n = prior.n();
    let parts: Vec<Moments> = (0..chunk_count(count))
        .into_par_iter()
        .map(|c| {
            let len = chunk_len(count, c);
            let mut rng = chunk_rng(seed, c as u64);
            let mut profiles = vec![0.0; len * n];
            for row in profiles.chunks_mut(n) {
                prior.sample_into(&mut rng, row);
            }
            let mut acc = Moments::default();
            for row in profiles.chunks(n) {
                acc.push(f(row, &mut rng));
            }
            acc
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge).estimate()
}
