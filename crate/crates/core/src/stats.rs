//! Streaming moment accumulators shared by the Monte-Carlo routines.
//!
//! Monte-Carlo loops split their samples into fixed-size chunks, accumulate
//! each chunk with Welford's update and merge chunk results in chunk order
//! with Chan's formula. Chunk boundaries do not depend on the number of
//! worker threads, so results are bitwise reproducible.

use rayon::prelude::*;

/// Samples per parallel chunk in Monte-Carlo loops.
pub const CHUNK: usize = 4096;

/// Per-coordinate running mean and centered sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased per-coordinate sample variance (zero for fewer than 2 samples).
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let denom = (self.count - 1) as f64;
        self.m2.iter().map(|s| s / denom).collect()
    }

    /// Standard error of each coordinate's mean.
    pub fn std_error(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.variance().into_iter().map(|v| (v / n).sqrt()).collect()
    }

    /// Sum of per-coordinate variances, i.e. `E||X - E X||^2`.
    pub fn total_variance(&self) -> f64 {
        self.variance().iter().sum()
    }
}

/// Runs `sample(index, out)` for every index in `0..n`, fanning fixed chunks
/// out over the rayon pool and merging the chunk moments in index order.
///
/// `sample` writes one `dim`-vector per call. It is handed a scratch buffer
/// per chunk through `make_scratch`.
pub fn parallel_moments<S, F, E>(
    n: usize,
    dim: usize,
    make_scratch: impl Fn() -> S + Sync,
    sample: F,
) -> Result<RunningMoments, E>
where
    F: Fn(usize, &mut S, &mut [f64]) -> Result<(), E> + Sync,
    E: Send,
{
    let num_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<Result<RunningMoments, E>> = (0..num_chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = make_scratch();
            let mut out = vec![0.0; dim];
            let mut acc = RunningMoments::new(dim);
            let end = ((c + 1) * CHUNK).min(n);
            for idx in c * CHUNK..end {
                sample(idx, &mut scratch, &mut out)?;
                acc.push(&out);
            }
            Ok(acc)
        })
        .collect();
    let mut total = RunningMoments::new(dim);
    for chunk in chunks {
        total.merge(&chunk?);
    }
    Ok(total)
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_error: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_std_error = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
    }
}
