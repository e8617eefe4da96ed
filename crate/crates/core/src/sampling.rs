//! Seeded, chunked Monte Carlo plumbing.
//!
//! A sample budget is split into fixed-size chunks. Chunk `i` draws from a
//! ChaCha8 stream selected by `(domain, i)` under the user seed, and chunk
//! sums are combined in chunk order. The result therefore depends only on
//! the seed and the sample count, never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK_SIZE: usize = 4096;

/// Separates the random streams of unrelated estimators sharing a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    SphereOracle = 1,
    GaussianMoment = 2,
    Ensemble = 3,
    Bootstrap = 4,
    Instances = 5,
}

/// RNG for work item `index` of `domain` under `seed`.
pub fn stream_rng(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}

/// First and second raw sums of a sampled quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sums {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Sums {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, other: Sums) -> Sums {
        Sums {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard error of the mean (unbiased variance).
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Runs `body(rng, count, sums)` for every chunk of `samples` and merges the
/// chunk sums in order.
pub fn chunked_sums<F>(samples: usize, seed: u64, domain: Domain, body: F) -> Sums
where
    F: Fn(&mut ChaCha8Rng, usize, &mut Sums) + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, domain, c as u64);
            let count = CHUNK_SIZE.min(samples - c * CHUNK_SIZE);
            let mut sums = Sums::default();
            body(&mut rng, count, &mut sums);
            sums
        })
        .collect();
    parts.into_iter().fold(Sums::default(), Sums::merge)
}

/// Percentile bootstrap interval for the mean of `data`.
pub fn bootstrap_mean_ci(data: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    use rand::Rng;
    if data.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = data.len();
    let mut means: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, Domain::Bootstrap, b as u64);
            (0..n).map(|_| data[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let pick = |q: f64| {
        let idx = ((q * (resamples - 1) as f64).round() as usize).min(resamples - 1);
        means[idx]
    };
    (pick(alpha), pick(1.0 - alpha))
}
