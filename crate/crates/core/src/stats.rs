//! Small statistics toolbox: chi-squared tail probabilities, one-sample
//! Kolmogorov-Smirnov testing, quantiles and fixed-bin histograms.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail probability of the chi-squared distribution with `nu` dof.
pub fn chi2_p_value(chi2: f64, nu: usize) -> f64 {
    let dist = ChiSquared::new(nu as f64).expect("nu >= 1");
    dist.sf(chi2).clamp(0.0, 1.0)
}

/// CDF of the chi-squared distribution with `nu` dof.
pub fn chi2_cdf(x: f64, nu: usize) -> f64 {
    ChiSquared::new(nu as f64).expect("nu >= 1").cdf(x)
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "KS statistic of an empty sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic one-sample KS p-value with the Stephens small-sample
/// correction: p = Q((sqrt(n) + 0.12 + 0.11/sqrt(n)) * D) where
/// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let t = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * t * t).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// One-sample KS test; returns (statistic, p-value).
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let d = ks_statistic(samples, cdf);
    (d, ks_p_value(d, samples.len()))
}

/// Linear-interpolation quantile (the same convention as numpy's default):
/// index q*(n-1) interpolated between the surrounding order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Sorts a copy and takes several quantiles at once.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    qs.iter().map(|&q| quantile(&sorted, q)).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Uniform-bin histogram over [lo, hi]; samples outside clamp into the end
/// bins so the counts always integrate to the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0 && hi > lo);
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let idx = (((v - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
            counts[idx] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin edges, bins + 1 values.
    pub fn edges(&self) -> Vec<f64> {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (0..=self.counts.len())
            .map(|i| self.lo + width * i as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chi2_tail_known_values() {
        // P(X >= 3.841) = 0.05 for nu = 1; P(X >= 0) = 1
        assert_relative_eq!(chi2_p_value(3.841458820694124, 1), 0.05, epsilon = 1e-9);
        assert_eq!(chi2_p_value(0.0, 1), 1.0);
        assert!(chi2_p_value(100.0, 2) < 1e-20);
    }

    #[test]
    fn ks_uniform_sample_against_uniform_cdf() {
        // deterministic low-discrepancy sample from the golden ratio
        let golden = 0.618_033_988_749_894_9_f64;
        let samples: Vec<f64> = (1..=500).map(|i| (i as f64 * golden).fract()).collect();
        let (d, p) = ks_test(&samples, |x| x.clamp(0.0, 1.0));
        assert!(d < 0.01, "D = {d}");
        assert!(p > 0.9, "p = {p}");
    }

    #[test]
    fn ks_detects_wrong_distribution() {
        let samples: Vec<f64> = (1..=500).map(|i| (i as f64 / 501.0).powi(2)).collect();
        let (_, p) = ks_test(&samples, |x| x.clamp(0.0, 1.0));
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn quantile_interpolation() {
        let values = [4.0, 1.0, 3.0, 2.0];
        let qs = quantiles(&values, &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(qs, vec![1.0, 1.75, 2.5, 3.25, 4.0]);
    }

    #[test]
    fn histogram_integrates_to_sample_size() {
        let values: Vec<f64> = (0..1000).map(|i| i as f64 / 100.0).collect();
        let h = Histogram::new(&values, 0.0, 5.0, 20);
        assert_eq!(h.total(), 1000); // overflow clamps into the last bin
        assert_eq!(h.edges().len(), 21);
    }
}
