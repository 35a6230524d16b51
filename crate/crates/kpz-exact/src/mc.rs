//! Reproducible Monte Carlo: counter-based streams, block decomposition and
//! order-fixed merging so that results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per block. Block b always draws from stream (base << 32) | b.
pub const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RngStream { seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_index);
        r
    }

    /// The stream used for block `b` of a run keyed by this stream.
    pub fn block(&self, b: u64) -> RngStream {
        RngStream { seed: self.seed, stream_index: (self.stream_index << 32) | b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// |mean - target| in units of stderr.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.stderr
        }
    }

    pub fn within(&self, target: f64, sigmas: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr + slack
    }
}

/// Running mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, o: &Welford) -> Welford {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = self.mean + d * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        Welford { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self, seed: u64) -> MCEstimate {
        MCEstimate {
            mean: self.mean,
            stderr: (self.variance() / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
            seed,
        }
    }
}

fn block_sizes(n_samples: usize) -> Vec<usize> {
    let nb = n_samples.div_ceil(BLOCK);
    (0..nb).map(|b| BLOCK.min(n_samples - b * BLOCK)).collect()
}

/// Runs `n_samples` draws of a vector-valued observable and returns one
/// accumulator per component.
pub fn run_vec<F>(n_samples: usize, stream: RngStream, dim: usize, f: F) -> Vec<Welford>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let sizes = block_sizes(n_samples);
    let blocks: Vec<Vec<Welford>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &m)| {
            let mut rng = stream.block(b as u64).rng();
            let mut acc = vec![Welford::default(); dim];
            let mut buf = vec![0.0; dim];
            for _ in 0..m {
                f(&mut rng, &mut buf);
                for (a, x) in acc.iter_mut().zip(&buf) {
                    a.push(*x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Welford::default(); dim];
    for b in &blocks {
        for (t, a) in total.iter_mut().zip(b) {
            *t = t.merge(a);
        }
    }
    total
}

/// Scalar version of [`run_vec`].
pub fn run<F>(n_samples: usize, stream: RngStream, f: F) -> MCEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    run_vec(n_samples, stream, 1, |r, out| out[0] = f(r))[0].estimate(stream.seed)
}

/// Collects raw samples in block order, for distributional tests.
pub fn collect<F>(n_samples: usize, stream: RngStream, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let sizes = block_sizes(n_samples);
    let blocks: Vec<Vec<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &m)| {
            let mut rng = stream.block(b as u64).rng();
            (0..m).map(|_| f(&mut rng)).collect()
        })
        .collect();
    blocks.concat()
}
