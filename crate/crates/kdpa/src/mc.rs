//! Seeded, thread-count-independent Monte Carlo plumbing.
//!
//! Every trial draws from its own ChaCha substream keyed by
//! `(seed, trial index)`, and partial sums are reduced in a fixed chunk
//! order, so a run's output depends only on `(seed, trials)`, never on how
//! rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trials per reduction chunk. Fixed (not thread-count dependent) so the
/// floating-point summation order is reproducible.
const CHUNK: u64 = 8192;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// Half-width of the three-sigma interval around the mean.
    pub fn three_sigma(&self) -> f64 {
        3.0 * self.std_error
    }
}

/// RNG for one trial: substream `trial` of the generator seeded by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent trials of `f`, each producing `K` statistics,
/// and returns the per-statistic mean and standard error.
pub(crate) fn parallel_trials<const K: usize, F>(trials: u64, seed: u64, f: F) -> [McEstimate; K]
where
    F: Fn(&mut ChaCha8Rng) -> [f64; K] + Sync,
{
    assert!(trials > 0, "trials must be positive");
    let chunks = trials.div_ceil(CHUNK);
    let partials: Vec<([f64; K], [f64; K])> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            let mut sum = [0.0; K];
            let mut sumsq = [0.0; K];
            for t in lo..hi {
                let mut rng = trial_rng(seed, t);
                let xs = f(&mut rng);
                for i in 0..K {
                    sum[i] += xs[i];
                    sumsq[i] += xs[i] * xs[i];
                }
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = [0.0; K];
    let mut sumsq = [0.0; K];
    for (s, s2) in partials {
        for i in 0..K {
            sum[i] += s[i];
            sumsq[i] += s2[i];
        }
    }
    let n = trials as f64;
    std::array::from_fn(|i| {
        let mean = sum[i] / n;
        let var = ((sumsq[i] / n - mean * mean).max(0.0)) * n / (n - 1.0).max(1.0);
        McEstimate { mean, std_error: (var / n).sqrt() }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_seed_identical_estimate() {
        let f = |rng: &mut ChaCha8Rng| [rng.gen::<f64>()];
        let a = parallel_trials::<1, _>(10_000, 7, f);
        let b = parallel_trials::<1, _>(10_000, 7, f);
        assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
        assert_eq!(a[0].std_error.to_bits(), b[0].std_error.to_bits());
    }

    #[test]
    fn thread_pools_of_different_sizes_agree() {
        let f = |rng: &mut ChaCha8Rng| [rng.gen::<f64>()];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| parallel_trials::<1, _>(50_000, 42, f));
        let b = four.install(|| parallel_trials::<1, _>(50_000, 42, f));
        assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
    }

    #[test]
    fn uniform_mean_within_three_sigma() {
        let f = |rng: &mut ChaCha8Rng| [rng.gen::<f64>()];
        let [est] = parallel_trials::<1, _>(200_000, 3, f);
        assert!((est.mean - 0.5).abs() < est.three_sigma(), "{est:?}");
    }
}
