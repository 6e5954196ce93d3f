use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::MetricError;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Fraction of resamples in which mean(a*) <= mean(b*).
    pub p: f64,
    pub failures: usize,
    pub resamples: usize,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Paired bootstrap test of "system a scores higher than system b".
///
/// Resample `r` draws its segment indices from a ChaCha8 stream selected by `r`
/// under the master `seed`, so the result does not depend on how resamples are
/// spread across worker threads.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<BootstrapResult, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricError::DegenerateInput(
            "paired bootstrap needs at least two segments",
        ));
    }
    if resamples == 0 {
        return Err(MetricError::DegenerateInput("resample count must be positive"));
    }
    let n = a.len();
    let failures = (0..resamples)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = resample_rng(seed, r);
            let (mut sum_a, mut sum_b) = (0.0, 0.0);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                sum_a += a[i];
                sum_b += b[i];
            }
            // exact ties that rounding splits still count as ties
            sum_a - sum_b <= TIE_TOLERANCE * (sum_a.abs() + sum_b.abs()).max(1.0)
        })
        .count();
    Ok(BootstrapResult {
        p: failures as f64 / resamples as f64,
        failures,
        resamples,
        mean_a: a.iter().sum::<f64>() / n as f64,
        mean_b: b.iter().sum::<f64>() / n as f64,
    })
}

pub(crate) fn resample_rng(seed: u64, resample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(resample as u64);
    rng
}
