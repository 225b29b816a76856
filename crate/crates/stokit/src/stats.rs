//! Minimal statistics helpers for Monte Carlo reductions.

use crate::rng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 2);
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_var(xs) / xs.len() as f64).sqrt()
}

pub fn sample_cov(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    assert!(n >= 2);
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n as f64 - 1.0)
}

/// q-quantile by the order statistic x_(ceil(q n)), so q -> 0+ returns the
/// minimum sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!(q > 0.0 && q < 1.0);
    let n = sorted.len() as f64;
    let idx = (q * n).ceil() as usize;
    sorted[idx.saturating_sub(1).min(sorted.len() - 1)]
}

/// Percentile bootstrap confidence interval for the q-quantile,
/// deterministic for a given seed.
pub fn bootstrap_quantile_ci(
    samples: &[f64],
    q: f64,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    let n = samples.len();
    let mut stats = Vec::with_capacity(n_resamples);
    let mut buf = vec![0.0; n];
    for b in 0..n_resamples {
        for (i, slot) in buf.iter_mut().enumerate() {
            let u = rng::uniform(seed, &[rng::domain::BOOTSTRAP, b as u64, i as u64]);
            *slot = samples[(u * n as f64) as usize % n];
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        stats.push(quantile(&buf, q));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    (quantile(&stats, alpha), quantile(&stats, 1.0 - alpha))
}
