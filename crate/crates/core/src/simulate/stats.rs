//! Small statistical helpers shared by the estimators and tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Sample mean and standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Anderson-Darling normality test with mean and variance estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    pub statistic: f64,
    /// `A^2 (1 + 0.75/n + 2.25/n^2)`.
    pub adjusted: f64,
    pub critical: f64,
    pub passes: bool,
}

/// Critical value of the adjusted statistic at the 1% level.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

pub fn anderson_darling(samples: &[f64]) -> AndersonDarling {
    let n = samples.len();
    assert!(n >= 8, "Anderson-Darling needs at least 8 samples");
    let (mean, se) = mean_stderr(samples);
    let sd = se * (n as f64).sqrt();
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let nf = n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let lo = normal.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let hi = normal.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        sum += (2 * i + 1) as f64 * (lo.ln() + (1.0 - hi).ln());
    }
    let statistic = -nf - sum / nf;
    let adjusted = statistic * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    AndersonDarling {
        statistic,
        adjusted,
        critical: AD_CRITICAL_1PCT,
        passes: adjusted < AD_CRITICAL_1PCT,
    }
}

/// Largest number of exceedances compatible, at quantile `level`, with `n`
/// independent checks that each fail with probability `p`.
pub fn allowed_exceedances(n: u64, p: f64, level: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    let dist = Binomial::new(p, n).expect("valid binomial");
    (0..=n).find(|&k| dist.cdf(k) >= level).unwrap_or(n)
}

/// Two-sided probability that a standard normal exceeds `k` in absolute value.
pub fn normal_tail(k: f64) -> f64 {
    2.0 * (1.0 - Normal::standard().cdf(k))
}

/// Least squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}
