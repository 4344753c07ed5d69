//! Execution helpers: data-parallel map with a sequential fallback, and
//! deterministic batched Monte-Carlo accumulators built on top of it.
//!
//! Determinism contract: work is split into fixed-size batches keyed by a
//! global index, each batch is evaluated in isolation, and partial results
//! are combined in batch order. Thread count therefore never changes output
//! bits, and the sequential build produces the same bytes as the parallel
//! one.

/// Samples per Monte-Carlo batch. Fixed so that batch boundaries (and hence
/// combination order) do not depend on the thread count.
pub const MC_BATCH: u64 = 4096;

/// Maps `f` over `0..n`, collecting results in index order.
///
/// Runs on the rayon pool under the `parallel` feature, sequentially
/// otherwise. `f` must depend only on the index.
#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential twin of [`indexed_map`], available in every build so the bench
/// suite can compare both paths.
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Running mean and variance of a vector-valued sample stream.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    pub count: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, sum: vec![0.0; dim], sum_sq: vec![0.0; dim] }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        for (k, v) in x.iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
    }

    /// Merges `other` into `self`. Callers must merge in a fixed order.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }

    /// Unbiased per-coordinate sample variance.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, sq)| ((sq - s * s / n) / (n - 1.0)).max(0.0))
            .collect()
    }

    /// Per-coordinate standard error of the mean.
    pub fn std_err(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.variance().into_iter().map(|v| (v / n).sqrt()).collect()
    }
}

/// Batched Monte-Carlo moments of a vector-valued sampler.
///
/// `sample(i, out)` fills `out` with draw number `i`; it must derive all
/// randomness from `i` alone so any batch schedule reproduces the same
/// stream of draws.
pub fn mc_moments<F>(n_samples: u64, dim: usize, sample: F) -> MomentAccumulator
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let n_batches = n_samples.div_ceil(MC_BATCH) as usize;
    let partials = indexed_map(n_batches, |b| {
        let lo = b as u64 * MC_BATCH;
        let hi = (lo + MC_BATCH).min(n_samples);
        let mut acc = MomentAccumulator::new(dim);
        let mut buf = vec![0.0; dim];
        for i in lo..hi {
            sample(i, &mut buf);
            acc.push(&buf);
        }
        acc
    });
    let mut total = MomentAccumulator::new(dim);
    for p in &partials {
        total.merge(p);
    }
    total
}
