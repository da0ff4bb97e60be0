//! Exact dyadic representation of walks, time changes and stopping times.
//!
//! A level-`m` walk has time step `2^{-2m}` and space step `2^{-m}`. When a
//! fine level `m_f` is fixed, every coarser object is re-expressed on the
//! fine grid: space in units of `2^{-m_f}` and time in micro-ticks, with `U`
//! micro-ticks per fine step (see [`MicroClock`]).

mod ratio;
mod sup;
mod time_change;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use ratio::Ratio;
pub use sup::{sup_distance, sup_distance_step, PlPath, StepPath};
pub use time_change::{QuasiInverse, TimeChange};

use crate::error::Error;

/// Deepest level the integer tick representation supports.
pub const MAX_LEVEL: u32 = 26;

/// Refinement level `m`: time step `2^{-2m}`, space step `2^{-m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Level(u32);

impl Level {
    pub const fn new(m: u32) -> Self {
        Level(m)
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    /// Number of level steps in one unit of time, `2^{2m}`.
    pub const fn steps_per_unit(self) -> u64 {
        1u64 << (2 * self.0)
    }

    pub fn time_step(self) -> f64 {
        libm::ldexp(1.0, -2 * self.0 as i32)
    }

    pub fn space_step(self) -> f64 {
        libm::ldexp(1.0, -(self.0 as i32))
    }

    pub const fn next(self) -> Level {
        Level(self.0 + 1)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Nonnegative dyadic rational `num / 2^exp`, used for horizons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    pub num: u64,
    pub exp: u32,
}

impl Dyadic {
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: u64, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        while d.exp > 0 && d.num % 2 == 0 {
            d.num /= 2;
            d.exp -= 1;
        }
        if d.num == 0 {
            d.exp = 0;
        }
        d
    }

    pub fn to_f64(self) -> f64 {
        libm::ldexp(self.num as f64, -(self.exp as i32))
    }

    pub fn to_ratio(self) -> Ratio {
        Ratio::dyadic(self.num as i128, self.exp)
    }

    /// `self * p / 2^q`.
    pub fn scaled(self, p: u64, q: u32) -> Option<Dyadic> {
        Some(Dyadic::new(self.num.checked_mul(p)?, self.exp + q))
    }

    /// Exact count of units of size `2^{-unit_exp}` in this value, if integral.
    pub fn in_units(self, unit_exp: u32) -> Option<u64> {
        if self.exp <= unit_exp {
            self.num.checked_mul(1u64.checked_shl(unit_exp - self.exp)?)
        } else {
            let drop = self.exp - unit_exp;
            if drop >= 64 || self.num % (1u64 << drop) != 0 {
                None
            } else {
                Some(self.num >> drop)
            }
        }
    }

    /// Smallest integer `>= self * 2^k`.
    pub fn ceil_scaled(self, k: u32) -> Option<u64> {
        if self.exp <= k {
            self.num.checked_mul(1u64.checked_shl(k - self.exp)?)
        } else {
            let drop = self.exp - k;
            if drop >= 64 {
                return Some(u64::from(self.num > 0));
            }
            let q = self.num >> drop;
            Some(q + u64::from(self.num & ((1u64 << drop) - 1) != 0))
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    /// Accepts `p`, `p/2^q` and `p/d` with `d` a power of two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = Error::Invalid("horizon must look like p, p/2^q or p/d with d a power of two");
        match s.split_once('/') {
            None => s.parse::<u64>().map(|n| Dyadic::new(n, 0)).map_err(|_| bad),
            Some((p, d)) => {
                let p = p.trim().parse::<u64>().map_err(|_| bad.clone())?;
                let d = d.trim();
                let exp = if let Some(q) = d.strip_prefix("2^") {
                    q.parse::<u32>().map_err(|_| bad.clone())?
                } else {
                    let d = d.parse::<u64>().map_err(|_| bad.clone())?;
                    if d == 0 || !d.is_power_of_two() {
                        return Err(bad);
                    }
                    d.trailing_zeros()
                };
                if exp > 62 {
                    return Err(bad);
                }
                Ok(Dyadic::new(p, exp))
            }
        }
    }
}

/// Fine clock: `ticks_per_step` micro-ticks per fine time step `2^{-2 m_f}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MicroClock {
    fine_level: Level,
    ticks_per_step: u64,
}

impl MicroClock {
    pub fn new(fine_level: Level, ticks_per_step: u64) -> Result<Self, Error> {
        if fine_level.get() > MAX_LEVEL {
            return Err(Error::Invalid("fine level too deep for tick arithmetic"));
        }
        if ticks_per_step == 0 || !ticks_per_step.is_power_of_two() || ticks_per_step > 1 << 16 {
            return Err(Error::Invalid(
                "ticks per fine step must be a power of two in 1..=2^16",
            ));
        }
        Ok(MicroClock {
            fine_level,
            ticks_per_step,
        })
    }

    pub fn fine_level(&self) -> Level {
        self.fine_level
    }

    pub fn ticks_per_step(&self) -> u64 {
        self.ticks_per_step
    }

    /// log2 of the micro-ticks in one unit of time.
    pub fn unit_exp(&self) -> u32 {
        2 * self.fine_level.get() + self.ticks_per_step.trailing_zeros()
    }

    pub fn ticks_per_unit(&self) -> u64 {
        1u64 << self.unit_exp()
    }

    /// Fine steps spanned by one level-`m` step, `4^{m_f - m}`.
    pub fn fine_steps_per(&self, m: Level) -> u64 {
        debug_assert!(m <= self.fine_level);
        1u64 << (2 * (self.fine_level.get() - m.get()))
    }

    /// Micro-ticks spanned by one level-`m` step.
    pub fn ticks_per(&self, m: Level) -> u64 {
        self.fine_steps_per(m) * self.ticks_per_step
    }

    /// Fine space units in one level-`m` space unit, `2^{m_f - m}`.
    pub fn space_ratio(&self, m: Level) -> i64 {
        debug_assert!(m <= self.fine_level);
        1i64 << (self.fine_level.get() - m.get())
    }

    pub fn horizon_ticks(&self, horizon: Dyadic) -> Result<u64, Error> {
        horizon
            .in_units(self.unit_exp())
            .ok_or(Error::Invalid("horizon is not a whole number of micro-ticks"))
    }

    pub fn ticks_to_f64(&self, ticks: Ratio) -> f64 {
        libm::ldexp(ticks.to_f64(), -(self.unit_exp() as i32))
    }
}

/// Walk values `v_k`, read as `v_k 2^{-m}` at time `k 2^{-2m}`, linear in between.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicPath {
    level: Level,
    values: Vec<i64>,
}

impl DyadicPath {
    /// `values[0]` must be zero.
    pub fn from_values(level: Level, values: Vec<i64>) -> Result<Self, Error> {
        if values.first().copied().unwrap_or(0) != 0 {
            return Err(Error::Invalid("path must start at 0"));
        }
        let values = if values.is_empty() {
            alloc::vec![0]
        } else {
            values
        };
        Ok(DyadicPath { level, values })
    }

    /// Partial sums of `steps`, starting from 0.
    pub fn from_steps(level: Level, steps: &[i8]) -> Self {
        let mut values = Vec::with_capacity(steps.len() + 1);
        let mut acc = 0i64;
        values.push(0);
        for &x in steps {
            acc += x as i64;
            values.push(acc);
        }
        DyadicPath { level, values }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> i64 {
        self.values[k]
    }

    /// Number of steps; the path lives on `[0, steps() 2^{-2m}]`.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_simple_walk(&self) -> bool {
        self.values.windows(2).all(|w| (w[1] - w[0]).abs() == 1)
    }

    pub fn step_signs(&self) -> Vec<i8> {
        self.values.windows(2).map(|w| (w[1] - w[0]).signum() as i8).collect()
    }

    /// Number of level steps covering `[0, horizon]`, when the path is long enough.
    pub fn steps_to(&self, horizon: Dyadic) -> Option<usize> {
        let n = horizon.ceil_scaled(2 * self.level.get())? as usize;
        (n <= self.steps()).then_some(n)
    }
}

/// Unit in which a [`StoppingSequence`] stores its time stamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeUnit {
    /// Steps of the walk at the sequence's own level.
    LevelSteps,
    /// Fine steps `2^{-2 m_f}`.
    FineSteps,
    /// Micro-ticks of a [`MicroClock`].
    MicroTicks,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    EvenCrossing,
    SkorohodWiener,
    SkorohodMartingale,
}

/// Strictly increasing crossing times `t(1) < t(2) < ...`; `t(0) = 0` is implicit.
///
/// `observed` is the extent of the scanned path in the same unit. `truncated`
/// is set when the path runs past the last listed time without completing the
/// next crossing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingSequence {
    pub level: Level,
    pub unit: TimeUnit,
    pub origin: Origin,
    pub times: Vec<u64>,
    pub observed: u64,
    pub truncated: bool,
}

impl StoppingSequence {
    /// `t(k)`, or `None` when the k-th crossing was not realized.
    pub fn time(&self, k: usize) -> Option<u64> {
        if k == 0 {
            Some(0)
        } else {
            self.times.get(k - 1).copied()
        }
    }

    /// Number of realized crossings, not counting `t(0)`.
    pub fn count(&self) -> usize {
        self.times.len()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        let mut prev = 0u64;
        self.times.iter().all(|&t| {
            let ok = t > prev;
            prev = t;
            ok
        })
    }

    /// Successive gaps `t(k+1) - t(k)` for `k >= 0`.
    pub fn gaps(&self) -> Vec<u64> {
        let mut prev = 0u64;
        self.times
            .iter()
            .map(|&t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn level_steps() {
        let m = Level::new(3);
        assert_eq!(m.steps_per_unit(), 64);
        assert_eq!(m.time_step(), m.space_step() * m.space_step());
    }

    #[test]
    fn dyadic_parse() {
        assert_eq!("1".parse::<Dyadic>().unwrap(), Dyadic::ONE);
        assert_eq!("3/2^2".parse::<Dyadic>().unwrap(), Dyadic::new(3, 2));
        assert_eq!("6/8".parse::<Dyadic>().unwrap(), Dyadic::new(3, 2));
        assert_eq!("4/2^1".parse::<Dyadic>().unwrap(), Dyadic::new(2, 0));
        assert!("1/3".parse::<Dyadic>().is_err());
        assert!("x".parse::<Dyadic>().is_err());
        assert_eq!(Dyadic::new(3, 2).to_string(), "3/2^2");
    }

    #[test]
    fn dyadic_units() {
        let k = Dyadic::new(3, 1);
        assert_eq!(k.in_units(2), Some(6));
        assert_eq!(k.in_units(0), None);
        assert_eq!(k.ceil_scaled(0), Some(2));
        assert_eq!(k.ceil_scaled(4), Some(24));
    }

    #[test]
    fn clock_conversions() {
        let c = MicroClock::new(Level::new(4), 4).unwrap();
        assert_eq!(c.ticks_per_unit(), 4 * 256);
        assert_eq!(c.ticks_per(Level::new(2)), 4 * 16);
        assert_eq!(c.space_ratio(Level::new(2)), 4);
        assert_eq!(c.horizon_ticks(Dyadic::new(1, 1)).unwrap(), 512);
        assert!(c.horizon_ticks(Dyadic::new(1, 20)).is_err());
        assert!(MicroClock::new(Level::new(4), 3).is_err());
    }

    #[test]
    fn path_from_steps() {
        let p = DyadicPath::from_steps(Level::new(0), &[1, 1, -1]);
        assert_eq!(p.values(), &[0, 1, 2, 1]);
        assert!(p.is_simple_walk());
        assert_eq!(p.steps(), 3);
        assert!(DyadicPath::from_values(Level::new(0), alloc::vec![1, 2]).is_err());
    }
}
