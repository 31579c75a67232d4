//! Goodness-of-fit statistics, block bootstrap and autocorrelation estimates.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::streams::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("bootstrap needs at least {min} resamples, got {got}")]
    TooFewResamples { min: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub const MIN_RESAMPLES: usize = 200;

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    let x = sorted(samples);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < x.len() {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let f = cdf(x[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    Ok(d)
}

/// Sup distance between the empirical CDFs of `a` and `b`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let (x, y) = (sorted(a), sorted(b));
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Half of the l1 distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalized autocorrelation `rho(0..len)` via zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        let mut r = vec![0.0; n];
        r[0] = 1.0;
        return r;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Integrated autocorrelation time `1 + 2 sum rho(k)` with the
/// self-consistent window `W >= 5 tau(W)`.
pub fn integrated_autocorrelation_time(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 1.0;
    }
    let rho = autocorrelation(x);
    let mut tau = 1.0;
    for (w, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if w as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

pub fn effective_sample_size(x: &[f64]) -> f64 {
    x.len() as f64 / integrated_autocorrelation_time(x)
}

/// Block length used for bootstrapping a series with autocorrelation time `tau`.
pub fn block_length_for(tau: f64, len: usize) -> usize {
    ((2.0 * tau).ceil() as usize).clamp(1, len.max(1))
}

/// 95% percentile interval from a moving-block bootstrap.
///
/// Blocks of `block_len` consecutive items are drawn with wraparound until
/// the resample reaches the input length. The returned interval is widened
/// to contain the plug-in estimate when the percentiles both fall on one
/// side of it.
pub fn bootstrap_ci<T: Clone, F: Fn(&[T]) -> f64>(
    samples: &[T],
    statistic: F,
    block_len: usize,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if resamples < MIN_RESAMPLES {
        return Err(StatsError::TooFewResamples {
            min: MIN_RESAMPLES,
            got: resamples,
        });
    }
    let n = samples.len();
    let block = block_len.clamp(1, n);
    let plug_in = statistic(samples);
    if !plug_in.is_finite() {
        return Err(StatsError::Degenerate(format!("statistic = {plug_in}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut scratch: Vec<T> = Vec::with_capacity(n);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        scratch.clear();
        while scratch.len() < n {
            let start = rng.random_range(0..n);
            for k in 0..block.min(n - scratch.len()) {
                scratch.push(samples[(start + k) % n].clone());
            }
        }
        stats.push(statistic(&scratch));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let lo = quantile(&stats, 0.025).min(plug_in);
    let hi = quantile(&stats, 0.975).max(plug_in);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::streams::StreamRng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn ks_own_reference_is_small() {
        let x = normals(1_000_000, 1);
        let nd = Normal::standard();
        let d = ks_statistic(&x, |v| nd.cdf(v)).unwrap();
        assert!(d < 0.002, "{d}");
    }

    #[test]
    fn ks_edge_cases() {
        let nd = Normal::standard();
        let d = ks_statistic(&[0.0; 50], |v| nd.cdf(v)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert_eq!(ks_statistic(&[], |v| v), Err(StatsError::Empty));
        let a = normals(1000, 4);
        assert_eq!(two_sample_ks(&a, &a).unwrap(), 0.0);
        assert_eq!(two_sample_ks(&a, &[]), Err(StatsError::Empty));
        assert_eq!(two_sample_ks(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(two_sample_ks(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn bootstrap_constant_and_width() {
        let c = vec![3.5; 100];
        let (lo, hi) = bootstrap_ci(&c, mean, 1, 200, 1).unwrap();
        assert_eq!((lo, hi), (3.5, 3.5));
        let x = normals(10_000, 2);
        let (lo, hi) = bootstrap_ci(&x, mean, 1, 400, 3).unwrap();
        let w = hi - lo;
        assert!((w / 0.0392 - 1.0).abs() < 0.3, "{w}");
        let m = mean(&x);
        assert!(lo <= m && m <= hi);
        assert!(bootstrap_ci(&x, mean, 1, 50, 3).is_err());
        assert!(bootstrap_ci::<f64, _>(&[], mean, 1, 200, 3).is_err());
    }

    #[test]
    fn autocorrelation_of_ar1() {
        let phi: f64 = 0.9;
        let e = normals(200_000, 5);
        let mut x = vec![0.0; e.len()];
        for i in 1..x.len() {
            x[i] = phi * x[i - 1] + e[i];
        }
        let tau = integrated_autocorrelation_time(&x);
        let exact = (1.0 + phi) / (1.0 - phi);
        assert!((tau / exact - 1.0).abs() < 0.15, "{tau}");
        let iid = integrated_autocorrelation_time(&normals(100_000, 6));
        assert!((iid - 1.0).abs() < 0.1);
    }

    #[test]
    fn total_variation_basic() {
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0, 0.0]), 0.5);
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
    }
}
