use alloc::vec::Vec;

use super::{MicroClock, PlPath, Ratio};
use crate::error::Error;

/// Strictly increasing piecewise-linear clock `C`: real time to intrinsic time.
///
/// Fine step `i` (1-based) takes `durations[i-1]` micro-ticks of real time
/// and exactly `U` micro-ticks of intrinsic time, so `C(cum_i) = i U` where
/// `cum_i` is the cumulative duration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeChange {
    clock: MicroClock,
    durations: Vec<u64>,
    cumulative: Vec<u64>,
}

/// Value of the quasi-inverse `T_s`; `Infinite` past the end of the clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuasiInverse {
    Finite(Ratio),
    Infinite,
}

impl QuasiInverse {
    pub fn finite(self) -> Option<Ratio> {
        match self {
            QuasiInverse::Finite(t) => Some(t),
            QuasiInverse::Infinite => None,
        }
    }
}

impl TimeChange {
    pub fn new(clock: MicroClock, durations: Vec<u64>) -> Result<Self, Error> {
        let mut cumulative = Vec::new();
        cumulative
            .try_reserve_exact(durations.len() + 1)
            .map_err(|_| Error::Resource {
                required: durations.len() as u128 + 1,
            })?;
        cumulative.push(0u64);
        let mut acc = 0u64;
        for &d in &durations {
            if d == 0 {
                return Err(Error::Invalid("time change durations must be positive"));
            }
            acc = acc.checked_add(d).ok_or(Error::Resource {
                required: u64::MAX as u128 + 1,
            })?;
            if acc > i64::MAX as u64 {
                return Err(Error::Resource {
                    required: acc as u128,
                });
            }
            cumulative.push(acc);
        }
        Ok(TimeChange {
            clock,
            durations,
            cumulative,
        })
    }

    /// `C(t) = t` over `steps` fine steps.
    pub fn identity(clock: MicroClock, steps: usize) -> Self {
        let u = clock.ticks_per_step();
        TimeChange::new(clock, alloc::vec![u; steps]).expect("constant positive durations")
    }

    pub fn clock(&self) -> &MicroClock {
        &self.clock
    }

    pub fn durations(&self) -> &[u64] {
        &self.durations
    }

    /// `cum_0 = 0, cum_1, ..., cum_n`.
    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    pub fn steps(&self) -> usize {
        self.durations.len()
    }

    /// Real-time extent in micro-ticks.
    pub fn total_real(&self) -> u64 {
        *self.cumulative.last().unwrap()
    }

    /// Intrinsic-time extent in micro-ticks.
    pub fn total_intrinsic(&self) -> u64 {
        self.steps() as u64 * self.clock.ticks_per_step()
    }

    /// Index `i` of the fine step in progress at real time `t`, i.e. the
    /// largest `i` with `cum_i <= t`.
    pub fn step_at(&self, t: u64) -> usize {
        self.cumulative.partition_point(|&c| c <= t) - 1
    }

    /// `C(t)` in intrinsic micro-ticks.
    pub fn eval(&self, t: Ratio) -> Result<Ratio, Error> {
        if t < Ratio::ZERO || t > Ratio::from(self.total_real() as i64) {
            return Err(Error::Domain {
                what: "time change argument",
                requested: t.floor(),
                available: self.total_real() as i128,
            });
        }
        let u = self.clock.ticks_per_step() as i128;
        let i = self.step_at(t.floor() as u64);
        if i == self.steps() {
            return Ok(Ratio::from_int(i as i128 * u));
        }
        let start = Ratio::from_int(self.cumulative[i] as i128);
        let d = self.durations[i] as i128;
        Ok(Ratio::from_int(i as i128 * u) + (t - start) * Ratio::new(u, d))
    }

    pub fn eval_tick(&self, t: u64) -> Result<Ratio, Error> {
        self.eval(Ratio::from_int(t as i128))
    }

    /// `T_s = inf { t : C(t) > s }`, exact.
    ///
    /// For `s` equal to the total intrinsic time the end of the clock is
    /// returned, so that `C(T_s) = s` on the whole intrinsic range.
    pub fn quasi_inverse(&self, s: Ratio) -> Result<QuasiInverse, Error> {
        if s < Ratio::ZERO {
            return Err(Error::Domain {
                what: "intrinsic time",
                requested: s.floor(),
                available: self.total_intrinsic() as i128,
            });
        }
        let total = Ratio::from_int(self.total_intrinsic() as i128);
        if s > total {
            return Ok(QuasiInverse::Infinite);
        }
        if s == total {
            return Ok(QuasiInverse::Finite(Ratio::from_int(self.total_real() as i128)));
        }
        let u = self.clock.ticks_per_step() as i128;
        let i = (s.floor() / u) as usize;
        let start = Ratio::from_int(self.cumulative[i] as i128);
        let offset = s - Ratio::from_int(i as i128 * u);
        let d = self.durations[i] as i128;
        Ok(QuasiInverse::Finite(start + offset * Ratio::new(d, u)))
    }

    /// The clock itself as a path: vertices `(cum_i, i U)`.
    pub fn as_path(&self) -> PlPath {
        let u = self.clock.ticks_per_step() as i64;
        let times = self.cumulative.iter().map(|&c| c as i64).collect();
        let values = (0..=self.steps() as i64).map(|i| i * u).collect();
        PlPath::new(times, values, 0).expect("cumulative durations strictly increase")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Level;

    fn clock() -> MicroClock {
        MicroClock::new(Level::new(2), 4).unwrap()
    }

    #[test]
    fn identity_inverse() {
        let c = TimeChange::identity(clock(), 16);
        for s in 0..=64 {
            let t = c.quasi_inverse(Ratio::from_int(s)).unwrap();
            assert_eq!(t, QuasiInverse::Finite(Ratio::from_int(s)));
        }
    }

    #[test]
    fn single_slow_step() {
        // C(t) = t/2 on one fine step of 8 ticks; half an intrinsic step is 2 ticks.
        let c = TimeChange::new(clock(), alloc::vec![8]).unwrap();
        let t = c.quasi_inverse(Ratio::from_int(2)).unwrap();
        assert_eq!(t, QuasiInverse::Finite(Ratio::from_int(4)));
        assert_eq!(c.eval_tick(4).unwrap(), Ratio::from_int(2));
    }

    #[test]
    fn beyond_range_is_infinite() {
        let c = TimeChange::new(clock(), alloc::vec![2, 6]).unwrap();
        assert_eq!(
            c.quasi_inverse(Ratio::from_int(9)).unwrap(),
            QuasiInverse::Infinite
        );
        assert_eq!(
            c.quasi_inverse(Ratio::from_int(8)).unwrap(),
            QuasiInverse::Finite(Ratio::from_int(8))
        );
        assert!(c.eval_tick(9).is_err());
        assert!(c.quasi_inverse(Ratio::from_int(-1)).is_err());
    }

    #[test]
    fn rejects_zero_duration() {
        assert!(TimeChange::new(clock(), alloc::vec![4, 0]).is_err());
    }

    #[test]
    fn eval_is_piecewise_linear() {
        let c = TimeChange::new(clock(), alloc::vec![2, 6, 4]).unwrap();
        assert_eq!(c.eval_tick(1).unwrap(), Ratio::from_int(2));
        assert_eq!(c.eval_tick(2).unwrap(), Ratio::from_int(4));
        assert_eq!(c.eval_tick(5).unwrap(), Ratio::from_int(6));
        assert_eq!(c.eval_tick(6).unwrap(), Ratio::new(20, 3));
        assert_eq!(c.eval_tick(12).unwrap(), Ratio::from_int(12));
    }
}
