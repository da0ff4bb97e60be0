//! Small statistics kit: order statistics, log-rate fits, binomial bands and
//! a Kolmogorov–Smirnov normality test.

use serde::Serialize;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal, StudentsT};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Min, median (mean of the middle pair for even counts) and max.
pub fn spread(values: &[f64]) -> Option<Spread> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    Some(Spread {
        min: v[0],
        median,
        max: v[n - 1],
    })
}

/// What the per-level errors are divided by before taking `log2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    M,
    SqrtM,
    None,
}

impl Normalizer {
    pub fn apply(self, m: u32) -> f64 {
        match self {
            Normalizer::M => m as f64,
            Normalizer::SqrtM => (m as f64).sqrt(),
            Normalizer::None => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual of the fit.
    pub residual: f64,
    /// 95% t-interval for the slope.
    pub band: (f64, f64),
}

/// Least squares of `log2(e_m / normalizer(m))` against `m`.
pub fn fit_rate(levels: &[u32], errors: &[f64], normalizer: Normalizer) -> Result<RateFit> {
    if levels.len() != errors.len() {
        return Err(HarnessError::Validation("levels and errors differ in length".into()));
    }
    if levels.len() < 3 {
        return Err(HarnessError::Validation("rate fit needs at least 3 levels".into()));
    }
    if let Some(bad) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(HarnessError::Validation(format!(
            "degenerate fit: nonpositive error {bad}"
        )));
    }
    let x: Vec<f64> = levels.iter().map(|&m| m as f64).collect();
    let y: Vec<f64> = levels
        .iter()
        .zip(errors)
        .map(|(&m, &e)| (e / normalizer.apply(m)).log2())
        .collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Validation("rate fit needs distinct levels".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - intercept - slope * a).collect();
    let residual = resid.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    let dof = n - 2.0;
    let se = (resid.iter().map(|r| r * r).sum::<f64>() / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY);
    Ok(RateFit {
        slope,
        intercept,
        residual,
        band: (slope - t * se, slope + t * se),
    })
}

/// Acceptance region `[lo, hi]` for a `Binomial(n, p)` count at two-sided
/// level `1 - confidence`, equal tails.
pub fn binomial_band(n: u64, p: f64, confidence: f64) -> (u64, u64) {
    let tail = (1.0 - confidence) / 2.0;
    let b = Binomial::new(p, n).expect("valid binomial parameters");
    let lo = (0..=n).take_while(|&k| k == 0 || b.cdf(k - 1) <= tail).last().unwrap_or(0);
    let hi = (0..=n).find(|&k| b.sf(k) <= tail).unwrap_or(n);
    (lo, hi)
}

/// Number of `i` with `v[i+1] >= v[i]`.
pub fn inversions(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[1] >= w[0]).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against `N(0, variance)`; asymptotic p-value with
/// the small-sample correction `sqrt(n) + 0.12 + 0.11 / sqrt(n)`.
pub fn ks_normal(samples: &[f64], variance: f64) -> Result<KsResult> {
    if samples.is_empty() || !(variance > 0.0) {
        return Err(HarnessError::Validation("KS test needs samples and a positive variance".into()));
    }
    let dist = Normal::new(0.0, variance.sqrt()).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0f64, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rate_inputs() {
        let levels: Vec<u32> = (3..=8).collect();
        let e: Vec<f64> = levels.iter().map(|&m| m as f64 * 2f64.powf(-(m as f64) / 2.0)).collect();
        let f = fit_rate(&levels, &e, Normalizer::M).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let e: Vec<f64> = levels.iter().map(|&m| (m as f64).sqrt() * 2f64.powi(-(m as i32))).collect();
        let f = fit_rate(&levels, &e, Normalizer::SqrtM).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits_are_errors() {
        assert!(fit_rate(&[3, 4, 5], &[1.0, 0.0, 1.0], Normalizer::None).is_err());
        assert!(fit_rate(&[3, 4], &[1.0, 0.5], Normalizer::None).is_err());
    }

    #[test]
    fn spread_of_even_count() {
        let s = spread(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.median, s.max), (1.0, 2.5, 4.0));
        assert!(spread(&[]).is_none());
    }

    #[test]
    fn binomial_band_for_one_percent() {
        let (lo, hi) = binomial_band(200, 0.01, 0.99);
        assert_eq!(lo, 0);
        assert!((5..=8).contains(&hi), "{hi}");
    }

    #[test]
    fn kolmogorov_tail_known_value() {
        // P(K > 1.3581) = 0.05
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3);
    }
}
