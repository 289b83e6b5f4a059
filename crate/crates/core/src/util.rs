//! Small numeric helpers shared across modules.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Population second moment about the mean (n denominator).
pub fn mean_squared_deviation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

pub fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Linear-interpolation quantile of a sorted slice (the convention used by
/// most statistical software for `quantile(..., type = 7)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Interquartile range of an unsorted sample.
pub fn interquartile_range(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

/// Kolmogorov-Smirnov statistic of a sample against Uniform(0, 1).
pub fn ks_statistic_uniform(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - u;
        let lo = u - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Deterministic RNG for a (seed, stream) pair. Streams let one logical seed
/// drive several independent draws (features vs. noise, one per permutation,
/// one per epoch) without overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&0x5eed_5eed_5eed_5eedu64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Fixed 17-significant-digit rendering used for all floating-point text in
/// primary outputs; the representation round-trips f64 exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
