//! Skorohod-type stopping times, embedded walks and the discrete quadratic
//! variation.
//!
//! All paths live on the fine grid, whose increments are one fine space unit,
//! so a level-`m` band `|x - x_0| = 2^{-m}` is always hit with equality and
//! the crossing times below are exact.

use alloc::vec::Vec;

use crate::dyadic::{
    DyadicPath, Level, MicroClock, Origin, PlPath, Ratio, StepPath, StoppingSequence, TimeChange,
    TimeUnit,
};
use crate::error::Error;
use crate::twist::{band_exits, NestedWalkFamily};

/// Level-`m` walk read off a finer path at its stopping times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddedWalk {
    pub level: Level,
    pub stop_times: StoppingSequence,
    /// `B_m(k 2^{-2m})` in level-`m` space units.
    pub values: DyadicPath,
}

fn band_width(fine: Level, m: Level) -> Result<i64, Error> {
    if m > fine {
        return Err(Error::Invalid("embedding level is finer than the path"));
    }
    Ok(1i64 << (fine.get() - m.get()))
}

/// `s(0) = 0`, `s(k+1)` = first fine time after `s(k)` with `|w - w(s(k))| = 2^{-m}`, in fine steps.
pub fn skorohod_times(w: &DyadicPath, m: Level) -> Result<StoppingSequence, Error> {
    let width = band_width(w.level(), m)?;
    let (times, observed, truncated) = band_exits(w.values().iter().copied(), width);
    Ok(StoppingSequence {
        level: m,
        unit: TimeUnit::FineSteps,
        origin: Origin::SkorohodWiener,
        times,
        observed,
        truncated,
    })
}

/// `B_m(k 2^{-2m}) = w(s(k))`.
pub fn embedded_walk(w: &DyadicPath, s: &StoppingSequence, m: Level) -> Result<EmbeddedWalk, Error> {
    let width = band_width(w.level(), m)?;
    let mut values = Vec::with_capacity(s.count() + 1);
    values.push(0i64);
    for (k, &t) in s.times.iter().enumerate() {
        let v = *w.values().get(t as usize).ok_or(Error::Inconsistent {
            level: m.get(),
            index: k,
        })?;
        if v % width != 0 || (v / width - values[k]).abs() != 1 {
            return Err(Error::Inconsistent {
                level: m.get(),
                index: k,
            });
        }
        values.push(v / width);
    }
    Ok(EmbeddedWalk {
        level: m,
        stop_times: s.clone(),
        values: DyadicPath::from_values(m, values)?,
    })
}

/// `T_{m,n}(k) = T_n(T_{n-1}(... T_{m+1}(k)))`, in level-`n` steps.
///
/// The sequence stops at the first `k` whose image escapes the realized
/// crossings (or the twisted part) of some intermediate level.
pub fn composed_times(
    family: &NestedWalkFamily,
    m: Level,
    n: Level,
) -> Result<StoppingSequence, Error> {
    if !(m < n && n <= family.fine_level()) {
        return Err(Error::Invalid("composed times need m < n <= m_fine"));
    }
    let mut idx: Vec<u64> = (1..=family.twisted(m).len() as u64).collect();
    let mut truncated = false;
    for j in m.get() + 1..=n.get() {
        let t = family.crossings(Level::new(j));
        let parent_len = family.twisted(Level::new(j - 1)).len() as u64;
        let mut next = Vec::with_capacity(idx.len());
        for &i in &idx {
            match t.time(i as usize) {
                Some(v) if i <= parent_len => next.push(v),
                _ => {
                    truncated = true;
                    break;
                }
            }
        }
        idx = next;
    }
    Ok(StoppingSequence {
        level: n,
        unit: TimeUnit::LevelSteps,
        origin: Origin::EvenCrossing,
        times: idx,
        observed: family.twisted(n).len() as u64,
        truncated,
    })
}

/// `tau(k+1)` = first real time after `tau(k)` with `|M - M(tau(k))| = 2^{-m}`,
/// for `M(t) = walk(C(t))`, in micro-ticks.
///
/// `M` moves through the walk's values in order, one fine step per duration,
/// so a crossing completes exactly at a cumulative-duration breakpoint.
pub fn martingale_crossing_times(
    walk: &DyadicPath,
    clock: &TimeChange,
    m: Level,
) -> Result<StoppingSequence, Error> {
    let width = band_width(walk.level(), m)?;
    let n = walk.steps().min(clock.steps());
    let cum = clock.cumulative();
    let (idx, _, truncated) = band_exits(walk.values()[..=n].iter().copied(), width);
    let times = idx.into_iter().map(|j| cum[j as usize]).collect();
    Ok(StoppingSequence {
        level: m,
        unit: TimeUnit::MicroTicks,
        origin: Origin::SkorohodMartingale,
        times,
        observed: cum[n],
        truncated,
    })
}

/// `N_m(t) = 2^{-2m} #{ r > 0 : tau(r) <= t }`, in intrinsic micro-ticks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteQV {
    pub level: Level,
    pub jump_times: StoppingSequence,
    /// Size of each jump, `2^{-2m}` in micro-ticks.
    pub jump: u64,
}

pub fn discrete_qvar(tau: &StoppingSequence, m: Level, clock: &MicroClock) -> DiscreteQV {
    DiscreteQV {
        level: m,
        jump_times: tau.clone(),
        jump: clock.ticks_per(m),
    }
}

impl DiscreteQV {
    /// `N_m(t)` in micro-ticks.
    pub fn eval(&self, t: u64) -> u64 {
        self.jump_times.times.partition_point(|&s| s <= t) as u64 * self.jump
    }

    /// Right-continuous step path on `[0, end]`.
    pub fn as_step_path(&self, end: u64) -> Result<StepPath, Error> {
        let (times, values) = jumps_with_values(&self.jump_times, |k| (k as u64 * self.jump) as i64);
        StepPath::new(times, values, 0, end as i64)
    }
}

fn jumps_with_values(tau: &StoppingSequence, value: impl Fn(usize) -> i64) -> (Vec<i64>, Vec<i64>) {
    let mut times = Vec::with_capacity(tau.count() + 1);
    let mut values = Vec::with_capacity(tau.count() + 1);
    times.push(0);
    values.push(value(0));
    for (k, &t) in tau.times.iter().enumerate() {
        times.push(t as i64);
        values.push(value(k + 1));
    }
    (times, values)
}

/// `B_m(N_m(t))` on `[0, end]`, in fine space units: equals `B_m(k 2^{-2m})`
/// on `[tau(k), tau(k+1))`.
pub fn walk_at_jumps(
    b: &DyadicPath,
    tau: &StoppingSequence,
    clock: &MicroClock,
    end: u64,
) -> Result<StepPath, Error> {
    let dx = clock.space_ratio(b.level());
    let count = tau.count().min(b.steps());
    let mut tau = tau.clone();
    tau.times.truncate(count);
    let (times, values) = jumps_with_values(&tau, |k| b.value(k) * dx);
    StepPath::new(times, values, 0, end as i64)
}

/// `B_m(C(t))` as a piecewise-linear path in real time.
///
/// Intrinsic level-`m` grid points fall on fine-step boundaries, so the
/// composition has its breakpoints among the clock's breakpoints. Values are
/// exact with shift `2(m_f - m)`. The path stops where either `B_m` or the
/// clock ends.
pub fn walk_on_clock(b: &DyadicPath, clock: &TimeChange) -> Result<PlPath, Error> {
    let mc = clock.clock();
    let m = b.level();
    if m > mc.fine_level() {
        return Err(Error::Invalid("walk level finer than clock"));
    }
    let r = mc.fine_steps_per(m) as i64;
    let dx = mc.space_ratio(m);
    let shift = 2 * (mc.fine_level().get() - m.get());
    let n = clock.steps().min(b.steps() * r as usize);
    let cum = clock.cumulative();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for (j, &c) in cum.iter().enumerate().take(n + 1) {
        let k = j / r as usize;
        let rem = j as i64 % r;
        let v0 = b.value(k);
        let v = if rem == 0 {
            v0 * r
        } else {
            v0 * r + (b.value(k + 1) - v0) * rem
        };
        times.push(c as i64);
        values.push(v * dx);
    }
    PlPath::new(times, values, shift)
}

/// `w(C(t))` for a fine walk: vertices `(cum_j, w_j)`.
pub fn time_changed_path(walk: &DyadicPath, clock: &TimeChange) -> PlPath {
    let n = walk.steps().min(clock.steps());
    let times = clock.cumulative()[..=n].iter().map(|&c| c as i64).collect();
    let values = walk.values()[..=n].to_vec();
    PlPath::new(times, values, 0).expect("cumulative durations strictly increase")
}

/// `sup_k |t(k) unit - k 2^{-2m}|` over `k 2^{-2m} <= horizon` (given in
/// level-`m` steps), in units of `unit_per_level_step` per level step. Returns
/// `None` when some needed `t(k)` is missing.
pub fn max_clock_deviation(
    seq: &StoppingSequence,
    level_steps: u64,
    units_per_level_step: u64,
) -> Option<u64> {
    let mut worst = 0u64;
    for k in 1..=level_steps as usize {
        let t = seq.time(k)?;
        let target = k as u64 * units_per_level_step;
        worst = worst.max(t.abs_diff(target));
    }
    Some(worst)
}

/// Exact `N_m(tau(k)) = k 2^{-2m}` check; returns the first failing `k`.
pub fn check_jump_identity(n: &DiscreteQV) -> Option<usize> {
    n.jump_times
        .times
        .iter()
        .enumerate()
        .find(|&(k, &t)| n.eval(t) != (k as u64 + 1) * n.jump)
        .map(|(k, _)| k + 1)
}

/// Exact `s_m(k) = <M>_{tau_m(k)}` check, with `s` in fine steps and `tau`
/// in micro-ticks; returns the first failing `k`.
pub fn check_skorohod_identity(
    s: &StoppingSequence,
    tau: &StoppingSequence,
    clock: &TimeChange,
) -> Result<Option<usize>, Error> {
    let u = clock.clock().ticks_per_step() as i128;
    let n = s.count().min(tau.count());
    if s.count() != tau.count() && !(s.truncated || tau.truncated) {
        return Ok(Some(n + 1));
    }
    for k in 0..n {
        let intrinsic = clock.eval(Ratio::from_int(tau.times[k] as i128))?;
        if intrinsic != Ratio::from_int(s.times[k] as i128 * u) {
            return Ok(Some(k + 1));
        }
    }
    Ok(None)
}

/// `(tau_m(k))_k` is a subsequence of `(tau_{m+1}(j))_j` with even index gaps `>= 2`.
/// Returns the first failing `k`.
pub fn check_nesting(coarse: &StoppingSequence, fine: &StoppingSequence) -> Option<usize> {
    let mut j_prev = 0usize;
    let mut j = 0usize;
    for (k, &t) in coarse.times.iter().enumerate() {
        while j < fine.times.len() && fine.times[j] < t {
            j += 1;
        }
        if j == fine.times.len() || fine.times[j] != t {
            return Some(k + 1);
        }
        let idx = j + 1;
        let gap = idx - j_prev;
        if gap < 2 || gap % 2 != 0 {
            return Some(k + 1);
        }
        j_prev = idx;
    }
    None
}
