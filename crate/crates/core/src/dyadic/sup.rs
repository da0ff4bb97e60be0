use alloc::vec::Vec;

use super::{DyadicPath, MicroClock, Ratio};
use crate::error::Error;

/// Piecewise-linear function on `[0, end]` with integer vertex times
/// (micro-ticks) and vertex values `values[j] / 2^shift`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlPath {
    times: Vec<i64>,
    values: Vec<i64>,
    shift: u32,
}

/// Right-continuous step function: `values[i]` on `[times[i], times[i+1])`,
/// the last value holding up to `end`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepPath {
    times: Vec<i64>,
    values: Vec<i64>,
    shift: u32,
    end: i64,
}

fn check_times(times: &[i64]) -> Result<(), Error> {
    if times.first() != Some(&0) {
        return Err(Error::Invalid("breakpoints must start at time 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("breakpoints must be strictly increasing"));
    }
    Ok(())
}

impl PlPath {
    pub fn new(times: Vec<i64>, values: Vec<i64>, shift: u32) -> Result<Self, Error> {
        if times.len() != values.len() {
            return Err(Error::Invalid("breakpoint and value counts differ"));
        }
        check_times(&times)?;
        Ok(PlPath {
            times,
            values,
            shift,
        })
    }

    /// A level-`m` walk placed on the fine grid of `clock`.
    pub fn from_walk(path: &DyadicPath, clock: &MicroClock) -> Self {
        let dt = clock.ticks_per(path.level()) as i64;
        let dx = clock.space_ratio(path.level());
        let times = (0..path.values().len() as i64).map(|k| k * dt).collect();
        let values = path.values().iter().map(|&v| v * dx).collect();
        PlPath {
            times,
            values,
            shift: 0,
        }
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn end(&self) -> i64 {
        *self.times.last().unwrap()
    }

    /// Exact value at an integer time inside the domain.
    pub fn eval(&self, t: Ratio) -> Result<Ratio, Error> {
        if t < Ratio::ZERO || t > Ratio::from(self.end()) {
            return Err(Error::Domain {
                what: "path argument",
                requested: t.floor(),
                available: self.end() as i128,
            });
        }
        let mut c = Cursor::new(&self.times, &self.values);
        let (n, d) = c.at(t);
        Ok(Ratio::new(n, d).shr(self.shift))
    }
}

impl StepPath {
    pub fn new(times: Vec<i64>, values: Vec<i64>, shift: u32, end: i64) -> Result<Self, Error> {
        if times.len() != values.len() {
            return Err(Error::Invalid("breakpoint and value counts differ"));
        }
        check_times(&times)?;
        if end < *times.last().unwrap() {
            return Err(Error::Invalid("step path ends before its last jump"));
        }
        Ok(StepPath {
            times,
            values,
            shift,
            end,
        })
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    /// Right-continuous value at `t`.
    pub fn eval(&self, t: i64) -> Ratio {
        let i = self.times.partition_point(|&s| s <= t).max(1) - 1;
        Ratio::dyadic(self.values[i] as i128, self.shift)
    }
}

/// Monotone evaluator over the segments of a piecewise-linear function.
struct Cursor<'a> {
    times: &'a [i64],
    values: &'a [i64],
    seg: usize,
}

impl<'a> Cursor<'a> {
    fn new(times: &'a [i64], values: &'a [i64]) -> Self {
        Cursor {
            times,
            values,
            seg: 0,
        }
    }

    fn advance(&mut self, t: Ratio) {
        if t.is_integer() {
            let t = t.numer();
            while self.seg + 1 < self.times.len() && self.times[self.seg + 1] as i128 <= t {
                self.seg += 1;
            }
        } else {
            while self.seg + 1 < self.times.len() && Ratio::from(self.times[self.seg + 1]) <= t {
                self.seg += 1;
            }
        }
    }

    /// Value at `t` as an unreduced fraction `(num, den)`.
    fn at(&mut self, t: Ratio) -> (i128, i128) {
        self.advance(t);
        let t0 = self.times[self.seg];
        let v0 = self.values[self.seg] as i128;
        if t.is_integer() && t.numer() == t0 as i128 {
            return (v0, 1);
        }
        let t1 = self.times[self.seg + 1];
        let v1 = self.values[self.seg + 1] as i128;
        let len = (t1 - t0) as i128;
        if t.is_integer() {
            let off = t.numer() - t0 as i128;
            return (v0 * len + (v1 - v0) * off, len);
        }
        let r = Ratio::from_int(v0) + (t - Ratio::from(t0)) * Ratio::new(v1 - v0, len);
        (r.numer(), r.denom())
    }
}

/// Running maximum of `|num / den|`, compared exactly.
struct MaxAbs {
    num: i128,
    den: i128,
}

impl MaxAbs {
    fn new() -> Self {
        MaxAbs { num: 0, den: 1 }
    }

    fn offer(&mut self, num: i128, den: i128) {
        let num = num.abs();
        let bigger = if den == self.den {
            num > self.num
        } else {
            match (num.checked_mul(self.den), self.num.checked_mul(den)) {
                (Some(a), Some(b)) => a > b,
                _ => Ratio::new(num, den) > Ratio::new(self.num, self.den),
            }
        };
        if bigger {
            self.num = num;
            self.den = den;
        }
    }

    fn into_ratio(self, shift: u32) -> Ratio {
        Ratio::new(self.num, self.den).shr(shift)
    }
}

/// `a - b` for values `(na/da) 2^{-sa}` and `(nb/db) 2^{-sb}`, scaled to `2^{-s}`, `s = max(sa, sb)`.
#[inline]
fn diff(na: i128, da: i128, sa: u32, nb: i128, db: i128, sb: u32) -> (i128, i128) {
    let s = sa.max(sb);
    let na = na << (s - sa);
    let nb = nb << (s - sb);
    if da == db {
        (na - nb, da)
    } else if da == 1 {
        (na * db - nb, db)
    } else if db == 1 {
        (na - nb * da, da)
    } else {
        (na * db - nb * da, da * db)
    }
}

fn check_horizon(horizon: Ratio, ends: &[i64]) -> Result<(), Error> {
    for &end in ends {
        if horizon > Ratio::from(end) || horizon < Ratio::ZERO {
            return Err(Error::Domain {
                what: "sup horizon",
                requested: horizon.floor(),
                available: end as i128,
            });
        }
    }
    Ok(())
}

/// Merged, strictly increasing breakpoints of both operands up to `horizon`,
/// visited in order, followed by `horizon` itself if it is not a breakpoint.
fn for_each_event(a: &[i64], b: &[i64], horizon: Ratio, mut f: impl FnMut(Ratio)) {
    let (mut i, mut j) = (0, 0);
    let mut last: Option<i64> = None;
    loop {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        if Ratio::from(next) > horizon {
            break;
        }
        if a.get(i) == Some(&next) {
            i += 1;
        }
        if b.get(j) == Some(&next) {
            j += 1;
        }
        f(Ratio::from(next));
        last = Some(next);
    }
    if last.map(Ratio::from) != Some(horizon) {
        f(horizon);
    }
}

/// Exact `sup_{0 <= t <= horizon} |a(t) - b(t)|`.
///
/// The difference of two piecewise-linear functions is piecewise linear with
/// breakpoints in the union of both breakpoint sets, so the supremum is a
/// maximum over those points and the horizon.
pub fn sup_distance(a: &PlPath, b: &PlPath, horizon: Ratio) -> Result<Ratio, Error> {
    check_horizon(horizon, &[a.end(), b.end()])?;
    let mut ca = Cursor::new(&a.times, &a.values);
    let mut cb = Cursor::new(&b.times, &b.values);
    let mut best = MaxAbs::new();
    for_each_event(&a.times, &b.times, horizon, |t| {
        let (na, da) = ca.at(t);
        let (nb, db) = cb.at(t);
        let (n, d) = diff(na, da, a.shift, nb, db, b.shift);
        best.offer(n, d);
    });
    Ok(best.into_ratio(a.shift.max(b.shift)))
}

/// Exact `sup_{0 <= t <= horizon} |a(t) - b(t)|` for a continuous
/// piecewise-linear `a` and a right-continuous step function `b`.
///
/// Both one-sided limits of `b` are checked at each of its jumps.
pub fn sup_distance_step(a: &PlPath, b: &StepPath, horizon: Ratio) -> Result<Ratio, Error> {
    check_horizon(horizon, &[a.end(), b.end])?;
    let mut ca = Cursor::new(&a.times, &a.values);
    let mut seg = 0usize;
    let mut best = MaxAbs::new();
    let s = a.shift.max(b.shift);
    for_each_event(&a.times, &b.times, horizon, |t| {
        let (na, da) = ca.at(t);
        while seg + 1 < b.times.len() && Ratio::from(b.times[seg + 1]) <= t {
            seg += 1;
        }
        let right = b.values[seg] as i128;
        let (n, d) = diff(na, da, a.shift, right, 1, b.shift);
        best.offer(n, d);
        if seg > 0 && Ratio::from(b.times[seg]) == t {
            let left = b.values[seg - 1] as i128;
            let (n, d) = diff(na, da, a.shift, left, 1, b.shift);
            best.offer(n, d);
        }
    });
    Ok(best.into_ratio(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pl(times: &[i64], values: &[i64]) -> PlPath {
        PlPath::new(times.to_vec(), values.to_vec(), 0).unwrap()
    }

    #[test]
    fn identical_paths() {
        let a = pl(&[0, 1, 2, 3], &[0, 1, 0, -1]);
        assert_eq!(sup_distance(&a, &a, Ratio::from_int(3)).unwrap(), Ratio::ZERO);
    }

    #[test]
    fn constant_offset() {
        let a = pl(&[0, 4], &[0, 4]);
        let b = pl(&[0, 4], &[3, 7]);
        assert_eq!(sup_distance(&a, &b, Ratio::from_int(4)).unwrap(), Ratio::from_int(3));
    }

    #[test]
    fn opposite_tents() {
        let a = pl(&[0, 1, 2], &[0, 1, 0]);
        let b = pl(&[0, 1, 2], &[0, -1, 0]);
        assert_eq!(sup_distance(&a, &b, Ratio::from_int(2)).unwrap(), Ratio::from_int(2));
    }

    #[test]
    fn interleaved_breakpoints() {
        // a peaks at 2 between b's vertices; b is linear 0 -> 4 on [0, 4].
        let a = pl(&[0, 1, 4], &[0, 3, 0]);
        let b = pl(&[0, 4], &[0, 4]);
        // at t=1: 3 - 1 = 2; at t=4: 0 - 4 = -4
        assert_eq!(sup_distance(&a, &b, Ratio::from_int(4)).unwrap(), Ratio::from_int(4));
        assert_eq!(sup_distance(&a, &b, Ratio::from_int(2)).unwrap(), Ratio::from_int(2));
        // horizon 3: a(3) = 1, b(3) = 3
        assert_eq!(sup_distance(&a, &b, Ratio::from_int(3)).unwrap(), Ratio::from_int(2));
    }

    #[test]
    fn rational_horizon_and_shift() {
        let a = pl(&[0, 3], &[0, 3]);
        let b = PlPath::new(vec![0, 3], vec![0, 0], 1).unwrap();
        let h = Ratio::new(1, 2);
        assert_eq!(sup_distance(&a, &b, h).unwrap(), Ratio::new(1, 2));
        let c = PlPath::new(vec![0, 3], vec![0, 2], 1).unwrap();
        // a(t) - c(t) = t - t/3 = 2t/3
        assert_eq!(sup_distance(&a, &c, Ratio::from_int(3)).unwrap(), Ratio::from_int(2));
        assert_eq!(sup_distance(&a, &c, Ratio::new(3, 2)).unwrap(), Ratio::from_int(1));
    }

    #[test]
    fn horizon_beyond_domain() {
        let a = pl(&[0, 2], &[0, 2]);
        let b = pl(&[0, 3], &[0, 3]);
        assert!(sup_distance(&a, &b, Ratio::from_int(3)).is_err());
    }

    #[test]
    fn step_left_limits_count() {
        // a(t) = t on [0, 4]; b jumps from 0 to 4 at t = 4.
        let a = pl(&[0, 4], &[0, 4]);
        let b = StepPath::new(vec![0, 4], vec![0, 4], 0, 4).unwrap();
        // at t -> 4-: |4 - 0| = 4 (left limit), at 4: 0.
        assert_eq!(sup_distance_step(&a, &b, Ratio::from_int(4)).unwrap(), Ratio::from_int(4));
        let c = StepPath::new(vec![0, 2], vec![0, 2], 0, 4).unwrap();
        // on [0,2): t - 0 -> 2; on [2,4]: t - 2 -> 2
        assert_eq!(sup_distance_step(&a, &c, Ratio::from_int(4)).unwrap(), Ratio::from_int(2));
        assert_eq!(c.eval(1), Ratio::ZERO);
        assert_eq!(c.eval(2), Ratio::from_int(2));
    }

    #[test]
    fn walk_on_fine_grid() {
        let clock = MicroClock::new(super::super::Level::new(2), 1).unwrap();
        let coarse = DyadicPath::from_steps(super::super::Level::new(1), &[1, -1]);
        let p = PlPath::from_walk(&coarse, &clock);
        assert_eq!(p.times(), &[0, 4, 8]);
        assert_eq!(p.values(), &[0, 2, 0]);
        assert_eq!(p.eval(Ratio::from_int(2)).unwrap(), Ratio::from_int(1));
    }
}
