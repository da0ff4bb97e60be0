//! Closed-form deviation envelopes and failure probabilities.
//!
//! Conventions: `log*(x) = max(1, ln x)`, `K* = max(1, K)`, and for the
//! martingale bounds `a` defaults to `max(K, e)`. Each envelope has the
//! shape `m^p 2^{-qm}`; probabilities come out of the formulas raw and are
//! clamped to `[0, 1]` with a flag when they exceed 1, which happens at small
//! `m` where the bounds say nothing.

use core::fmt;
use core::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TheoremId {
    Ldi,
    Hoeffding,
    Tlag,
    Refin,
    Wiener,
    WienerM,
    Equid,
    QvarA,
    QvarB,
    ApproxA,
    ApproxB,
    ApproxNmA,
    ApproxNmB,
}

impl TheoremId {
    pub const ALL: [TheoremId; 13] = [
        TheoremId::Ldi,
        TheoremId::Hoeffding,
        TheoremId::Tlag,
        TheoremId::Refin,
        TheoremId::Wiener,
        TheoremId::WienerM,
        TheoremId::Equid,
        TheoremId::QvarA,
        TheoremId::QvarB,
        TheoremId::ApproxA,
        TheoremId::ApproxB,
        TheoremId::ApproxNmA,
        TheoremId::ApproxNmB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Ldi => "ldi",
            TheoremId::Hoeffding => "hoeffding",
            TheoremId::Tlag => "tlag",
            TheoremId::Refin => "refin",
            TheoremId::Wiener => "wiener",
            TheoremId::WienerM => "wienerm",
            TheoremId::Equid => "equid",
            TheoremId::QvarA => "qvar_a",
            TheoremId::QvarB => "qvar_b",
            TheoremId::ApproxA => "approx_a",
            TheoremId::ApproxB => "approx_b",
            TheoremId::ApproxNmA => "approxNm_a",
            TheoremId::ApproxNmB => "approxNm_b",
        }
    }

    /// Uses `a` rather than `K` for the scale.
    pub fn is_martingale(self) -> bool {
        matches!(
            self,
            TheoremId::QvarA
                | TheoremId::QvarB
                | TheoremId::ApproxA
                | TheoremId::ApproxB
                | TheoremId::ApproxNmA
                | TheoremId::ApproxNmB
        )
    }

    /// Carries the `D m^{-1-eps}` tail term.
    pub fn has_tail(self) -> bool {
        matches!(self, TheoremId::QvarB | TheoremId::ApproxB | TheoremId::ApproxNmB)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or(Error::Usage("unknown theorem id"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundQuery {
    pub theorem: TheoremId,
    pub k: f64,
    pub m: u32,
    pub c: f64,
    /// Scale for the martingale bounds; `None` means `max(K, e)`.
    pub a: Option<f64>,
    pub epsilon: f64,
    /// Tail constant `D(K)`; zero unless the generator needs one.
    pub d: f64,
}

impl BoundQuery {
    pub fn new(theorem: TheoremId, k: f64, m: u32, c: f64) -> Self {
        BoundQuery {
            theorem,
            k,
            m,
            c,
            a: None,
            epsilon: 0.0,
            d: 0.0,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_tail(mut self, d: f64, epsilon: f64) -> Self {
        self.d = d;
        self.epsilon = epsilon;
        self
    }

    pub fn scale(&self) -> f64 {
        self.a.unwrap_or_else(|| default_scale(self.k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundResult {
    pub envelope: f64,
    pub probability: f64,
    /// The raw probability exceeded 1.
    pub clamped: bool,
}

/// `max(K, e)`.
pub fn default_scale(k: f64) -> f64 {
    libm::fmax(k, core::f64::consts::E)
}

pub fn log_star(x: f64) -> Result<f64, Error> {
    if !(x > 0.0) {
        return Err(Error::Usage("log* needs a positive argument"));
    }
    Ok(libm::fmax(1.0, libm::log(x)))
}

/// `2 exp(-x^2/2)`, unclamped.
pub fn hoeffding_tail(x: f64) -> f64 {
    2.0 * libm::exp(-x * x / 2.0)
}

fn check(q: &BoundQuery) -> Result<(), Error> {
    if !(q.c > 1.0) || !q.c.is_finite() {
        return Err(Error::Usage("C must exceed 1"));
    }
    if q.m == 0 {
        return Err(Error::Usage("m must be at least 1"));
    }
    if !(q.k > 0.0) || !q.k.is_finite() {
        return Err(Error::Usage("K must be positive"));
    }
    if q.theorem.is_martingale() {
        let a = q.scale();
        if !(a >= libm::fmax(q.k, 1.0)) || !a.is_finite() {
            return Err(Error::Usage("a must be at least max(K, 1)"));
        }
    }
    if q.theorem.has_tail() && (q.d < 0.0 || q.epsilon < 0.0) {
        return Err(Error::Usage("tail constants must be nonnegative"));
    }
    Ok(())
}

pub fn eval_bound(q: &BoundQuery) -> Result<BoundResult, Error> {
    check(q)?;
    let m = q.m as f64;
    let c = q.c;
    let k = q.k;
    let k_star = libm::fmax(1.0, k);
    let four_m = libm::exp2(2.0 * m);
    let half_m = libm::exp2(-m);
    let sqrt_m = libm::sqrt(m);
    let scaled = |x: f64, factor: f64| factor * libm::pow(x * four_m, 1.0 - c);
    let path_env = |x: f64, ls: f64| libm::pow(x, 0.25) * libm::pow(ls, 0.75) * m * libm::exp2(-m / 2.0);
    let tail = q.d * libm::pow(m, -1.0 - q.epsilon);

    let lk = log_star(k)?;
    let (envelope, raw) = match q.theorem {
        TheoremId::Ldi | TheoremId::Hoeffding => {
            let n = k * four_m;
            let ln = libm::log(n);
            if !(ln > 0.0) {
                return Err(Error::Usage("K 4^m must exceed 1"));
            }
            if q.theorem == TheoremId::Ldi {
                (libm::sqrt(2.0 * c * n * ln), 2.0 * libm::pow(n, 1.0 - c))
            } else {
                // same event in standardized units: |S_N| / sqrt(N) >= x
                let x = libm::sqrt(2.0 * c * ln);
                (x, hoeffding_tail(x))
            }
        }
        TheoremId::Tlag => (
            libm::sqrt(1.5 * c * k * lk) * sqrt_m * half_m,
            scaled(k, 2.0),
        ),
        TheoremId::Refin => (path_env(k_star, lk), scaled(k, 3.0)),
        TheoremId::Wiener => (path_env(k_star, lk), scaled(k, 6.0)),
        TheoremId::WienerM => (path_env(k_star, lk), scaled(k, 10.0)),
        TheoremId::Equid => (
            6.0 * libm::sqrt(c * k_star * lk) * sqrt_m * half_m,
            scaled(k, 4.0),
        ),
        TheoremId::QvarA | TheoremId::QvarB => {
            let a = q.scale();
            let env = 12.0 * libm::sqrt(c * a * log_star(a)?) * sqrt_m * half_m;
            let p = scaled(a, 3.0);
            (env, if q.theorem.has_tail() { p + tail } else { p })
        }
        TheoremId::ApproxA | TheoremId::ApproxB => {
            let a = q.scale();
            let p = scaled(a, 10.0);
            (
                path_env(a, log_star(a)?),
                if q.theorem.has_tail() { p + tail } else { p },
            )
        }
        TheoremId::ApproxNmA | TheoremId::ApproxNmB => {
            let a = q.scale();
            let p = scaled(a, 14.0);
            (
                2.0 * path_env(a, log_star(a)?),
                if q.theorem.has_tail() { p + tail } else { p },
            )
        }
    };
    Ok(BoundResult {
        envelope,
        probability: raw.clamp(0.0, 1.0),
        clamped: raw > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::E;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(1.0).unwrap(), 1.0);
        assert_eq!(log_star(E).unwrap(), 1.0);
        assert!(close(log_star(E * E).unwrap(), 2.0, 1e-12));
        assert!(log_star(0.0).is_err());
        assert!(log_star(-1.0).is_err());
    }

    #[test]
    fn hoeffding_values() {
        assert_eq!(hoeffding_tail(0.0), 2.0);
        assert!(close(hoeffding_tail(2.0), 0.270_670_566, 1e-8));
    }

    #[test]
    fn wiener_example() {
        let r = eval_bound(&BoundQuery::new(TheoremId::Wiener, 1.0, 10, 3.0)).unwrap();
        assert!(close(r.envelope, 0.3125, 1e-12));
        assert!(close(r.probability, 6.0 / (1u64 << 40) as f64, 1e-12));
        assert!(close(r.probability, 5.46e-12, 1e-3));
        assert!(!r.clamped);
    }

    #[test]
    fn qvar_example() {
        let r = eval_bound(&BoundQuery::new(TheoremId::QvarA, 1.0, 8, 3.0).with_a(E)).unwrap();
        assert!(close(r.envelope, 0.3788, 1e-3), "{}", r.envelope);
        assert!(close(r.probability, 9.45e-11, 1e-2), "{}", r.probability);
    }

    #[test]
    fn rejects_c_at_most_one() {
        let q = BoundQuery::new(TheoremId::Tlag, 1.0, 5, 1.0);
        assert!(matches!(eval_bound(&q), Err(Error::Usage(_))));
    }

    #[test]
    fn clamps_vacuous_probability() {
        let r = eval_bound(&BoundQuery::new(TheoremId::ApproxNmA, 1.0, 1, 1.1)).unwrap();
        assert!(r.clamped);
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn names_roundtrip() {
        for t in TheoremId::ALL {
            assert_eq!(t.name().parse::<TheoremId>().unwrap(), t);
        }
        assert!("nope".parse::<TheoremId>().is_err());
    }
}
