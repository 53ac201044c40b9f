//! Score-distribution statistics: moment skewness, the two-sample
//! Kolmogorov–Smirnov test with an asymptotic p-value, and fixed-width
//! histograms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample variance is zero")]
    DegenerateVariance,
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("histogram range [{lo}, {hi}) with {bins} bins is empty")]
    BadHistogram { lo: f64, hi: f64, bins: usize },
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    check_finite(values)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Fisher–Pearson coefficient `g1 = m3 / m2^(3/2)` with population moments.
pub fn skewness(values: &[f64]) -> Result<f64, StatsError> {
    if values.len() < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: values.len() });
    }
    let mu = mean(values)?;
    let n = values.len() as f64;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in values {
        let d = v - mu;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    // relative cutoff: a constant sample leaves only rounding noise in m2
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if m2 <= (scale * 1e-14).powi(2) {
        return Err(StatsError::DegenerateVariance);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 Σ_{k≥1} (-1)^(k-1) exp(-2 k² x²)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Jacobi theta form of the CDF converges fast for small x
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=50 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * x * x)).exp();
            cdf += term;
            if term < 1e-300 {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value, floored at the smallest positive f64.
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

/// `D = sup |F_a − F_b|` over the pooled sample and the asymptotic p-value at
/// `sqrt(nm / (n + m)) · D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    check_finite(a)?;
    check_finite(b)?;
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    // sup |i/n − j/m| kept as the integer |i·m − j·n| so D is the exact
    // fraction h / lcm(n, m) rounded once
    let (mut i, mut j) = (0, 0);
    let mut widest = 0u64;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        widest = widest.max((i as u64 * m as u64).abs_diff(j as u64 * n as u64));
    }
    let g = gcd(n as u64, m as u64);
    let d = (widest / g) as f64 / ((n as u64 / g) * m as u64) as f64;
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p_value = kolmogorov_survival(en * d).max(f64::MIN_POSITIVE);
    Ok(KsResult { statistic: d, p_value, n, m })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A labelled set of scores with its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub label: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// `None` when fewer than three values or zero variance.
    pub skewness: Option<f64>,
}

impl ScoreDistribution {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        let mean = mean(&values)?;
        let skewness = match skewness(&values) {
            Ok(s) => Some(s),
            Err(StatsError::TooFewSamples { .. } | StatsError::DegenerateVariance) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { label: label.into(), values, mean, skewness })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub primary: String,
    pub baseline: String,
    /// primary − baseline
    pub mean_difference: f64,
    pub skewness_difference: Option<f64>,
    pub ks: KsResult,
}

pub fn compare_to_baseline(
    primary: &ScoreDistribution,
    baseline: &ScoreDistribution,
) -> Result<BaselineComparison, StatsError> {
    Ok(BaselineComparison {
        primary: primary.label.clone(),
        baseline: baseline.label.clone(),
        mean_difference: primary.mean - baseline.mean,
        skewness_difference: primary.skewness.zip(baseline.skewness).map(|(p, b)| p - b),
        ks: ks_two_sample(&primary.values, &baseline.values)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    /// Values outside `[lo, hi]`.
    pub outside: usize,
}

/// Width of score-histogram bins over `[0, 1]`.
pub const SCORE_BIN_WIDTH: f64 = 0.05;

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self, StatsError> {
        if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(StatsError::BadHistogram { lo, hi, bins });
        }
        let mut counts = vec![0; bins];
        let mut outside = 0;
        let width = (hi - lo) / bins as f64;
        for &v in values {
            if !(lo..=hi).contains(&v) {
                outside += 1;
                continue;
            }
            let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { lo, hi, counts, outside })
    }

    /// Bins of [`SCORE_BIN_WIDTH`] over `[0, 1]`.
    pub fn scores(values: &[f64]) -> Self {
        let bins = (1.0 / SCORE_BIN_WIDTH).round() as usize;
        Self::new(values, 0.0, 1.0, bins).expect("static range")
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let w = self.bin_width();
        let mut out = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let start = self.lo + w * i as f64;
            let _ = writeln!(out, "{:.6},{:.6},{c}", start, start + w);
        }
        out
    }
}
