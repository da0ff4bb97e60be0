//! Permutation test for independence of embedded step signs and
//! inter-crossing durations.
//!
//! Gaps are shuffled while the sign sequence stays fixed, so the null
//! distribution needs no model of the (heavy-tailed) gap law.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Which correlations enter the max-statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `|corr(sign_k, gap_{k+1})|` and `|corr(sign_k, gap_k)|`.
    Lagged,
    /// Adds `|corr(1{B(k) < 0}, gap_{k+1})|`, with `B` the partial sums of
    /// the signs.
    #[default]
    WithLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndepResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Centered, unit-norm copy of `x`; `None` for constant input.
fn standardize(x: impl Iterator<Item = f64>) -> Option<Vec<f64>> {
    let v: Vec<f64> = x.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let norm = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>().sqrt();
    (norm > 0.0).then(|| v.iter().map(|a| (a - mean) / norm).collect())
}

struct Features {
    sign: Option<Vec<f64>>,
    lagged: Option<Vec<f64>>,
    below: Option<Vec<f64>>,
}

impl Features {
    fn new(signs: &[i8], which: Statistic) -> Self {
        let n = signs.len();
        let sign = standardize(signs.iter().map(|&s| s as f64));
        let lagged = standardize(signs[..n - 1].iter().map(|&s| s as f64));
        let below = match which {
            Statistic::Lagged => None,
            Statistic::WithLevel => {
                let mut level = 0i64;
                standardize(signs[..n - 1].iter().map(|&s| {
                    level += s as i64;
                    if level < 0 {
                        1.0
                    } else {
                        0.0
                    }
                }))
            }
        };
        Features { sign, lagged, below }
    }
}

/// Max of `|corr|` between each feature and the gaps (lag 0) or the next
/// gaps (lag 1). Features are centered, so only cross sums depend on the
/// order of `y`; the moments of `y` are permutation-invariant and cached.
struct Scorer<'a> {
    f: &'a Features,
    sd_all: f64,
    sum: f64,
    sum_sq: f64,
    zeros: Vec<f64>,
}

impl<'a> Scorer<'a> {
    fn new(f: &'a Features, y: &[f64]) -> Self {
        let n = y.len() as f64;
        let sum: f64 = y.iter().sum();
        let sum_sq: f64 = y.iter().map(|v| v * v).sum();
        Scorer {
            f,
            sd_all: (sum_sq - sum * sum / n).max(0.0).sqrt(),
            sum,
            sum_sq,
            zeros: vec![0.0; y.len()],
        }
    }

    fn score(&self, y: &[f64]) -> f64 {
        let (s, l, b) = (&self.f.sign, &self.f.lagged, &self.f.below);
        let n = y.len();
        let xs = s.as_deref().unwrap_or(&self.zeros[..n]);
        let xl = l.as_deref().unwrap_or(&self.zeros[..n - 1]);
        let xb = b.as_deref().unwrap_or(&self.zeros[..n - 1]);
        let mut cs = xs[0] * y[0];
        let (mut cl, mut cb) = (0.0, 0.0);
        for i in 1..n {
            let v = y[i];
            cs += xs[i] * v;
            cl += xl[i - 1] * v;
            cb += xb[i - 1] * v;
        }
        let n1 = (y.len() - 1) as f64;
        let rest = self.sum - y[0];
        let sd_next = (self.sum_sq - y[0] * y[0] - rest * rest / n1).max(0.0).sqrt();
        let mut t = 0.0f64;
        if s.is_some() && self.sd_all > 0.0 {
            t = t.max((cs / self.sd_all).abs());
        }
        if sd_next > 0.0 {
            if l.is_some() {
                t = t.max((cl / sd_next).abs());
            }
            if b.is_some() {
                t = t.max((cb / sd_next).abs());
            }
        }
        t
    }
}

/// Observed max-correlation statistic and the fraction of `shuffles` gap
/// permutations whose statistic is at least as large.
pub fn independence_test(
    signs: &[i8],
    gaps: &[u64],
    shuffles: usize,
    which: Statistic,
    rng: &mut impl RngCore,
) -> Result<IndepResult> {
    if signs.len() != gaps.len() {
        return Err(HarnessError::Validation("signs and gaps differ in length".into()));
    }
    if signs.len() < 64 {
        return Err(HarnessError::Validation("independence test needs at least 64 pairs".into()));
    }
    if shuffles == 0 {
        return Err(HarnessError::Validation("need at least one shuffle".into()));
    }
    if gaps.iter().all(|&g| g == gaps[0]) {
        return Ok(IndepResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let features = Features::new(signs, which);
    let mut y: Vec<f64> = gaps.iter().map(|&g| g as f64).collect();
    let scorer = Scorer::new(&features, &y);
    let observed = scorer.score(&y);
    // guard against ties lost to rounding
    let threshold = observed * (1.0 - 1e-12);
    let mut hits = 0usize;
    for _ in 0..shuffles {
        y.shuffle(rng);
        if scorer.score(&y) >= threshold {
            hits += 1;
        }
    }
    Ok(IndepResult {
        statistic: observed,
        p_value: hits as f64 / shuffles as f64,
    })
}
