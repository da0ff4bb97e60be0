//! Twist-and-shrink construction of nested simple random walks.
//!
//! Row `m` of an i.i.d. `±1` matrix drives an independent walk `S_m`. The
//! bridges of `S_m` between successive visits to even integers (times
//! `T_m(k)`) are flipped when their sign disagrees with step `k+1` of the
//! twisted walk one level up, so that `S~_m(T_m(k)) / 2 = S~_{m-1}(k)`.
//! Shrinking by `2^{-m}` in space and `2^{-2m}` in time gives `B~_m`, and
//! consecutive levels satisfy the refinement identity
//! `B~_{m+1}(T_{m+1}(k) 2^{-2(m+1)}) = B~_m(k 2^{-2m})` exactly.

use alloc::vec::Vec;

use crate::dyadic::{Dyadic, DyadicPath, Level, Origin, StoppingSequence, TimeUnit};
use crate::error::Error;
use crate::rng::{CoinStream, Stream};

/// Rows `X_m(1), X_m(2), ...` for `m = 0..=m_fine`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepMatrix {
    seed: u64,
    fine_level: Level,
    horizon: Dyadic,
    rows: Vec<Vec<i8>>,
}

impl StepMatrix {
    /// Wraps externally supplied rows, e.g. read back from a dump.
    pub fn from_rows(
        seed: u64,
        fine_level: Level,
        horizon: Dyadic,
        rows: Vec<Vec<i8>>,
    ) -> Result<Self, Error> {
        if rows.len() != fine_level.get() as usize + 1 {
            return Err(Error::Invalid("one row per level 0..=m_fine expected"));
        }
        if rows.iter().flatten().any(|&x| x != 1 && x != -1) {
            return Err(Error::Invalid("step matrix entries must be +1 or -1"));
        }
        Ok(StepMatrix {
            seed,
            fine_level,
            horizon,
            rows,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fine_level(&self) -> Level {
        self.fine_level
    }

    pub fn horizon(&self) -> Dyadic {
        self.horizon
    }

    pub fn row(&self, m: Level) -> &[i8] {
        &self.rows[m.get() as usize]
    }

    pub fn rows(&self) -> &[Vec<i8>] {
        &self.rows
    }
}

/// Steps drawn for row `m`: `ceil(K 4^m)` plus 10%, plus `8 sqrt` and a
/// constant so that low levels, where bridge counts fluctuate most, still
/// complete their crossings.
pub fn row_length(m: Level, horizon: Dyadic) -> Result<usize, Error> {
    let overflow = Error::Resource {
        required: u128::MAX,
    };
    let base = horizon.ceil_scaled(2 * m.get()).ok_or(overflow.clone())?;
    let root = libm::ceil(libm::sqrt(base as f64)) as u64;
    let len = base
        .checked_add(base.div_ceil(10))
        .and_then(|x| x.checked_add(8 * root + 64))
        .ok_or(overflow)?;
    usize::try_from(len).map_err(|_| Error::Resource {
        required: len as u128,
    })
}

/// Draws the step matrix; row `m` is the coin stream `(seed, m)`.
pub fn generate_step_matrix(seed: u64, m_fine: Level, horizon: Dyadic) -> Result<StepMatrix, Error> {
    if m_fine.get() == 0 {
        return Err(Error::Invalid("fine level must be at least 1"));
    }
    if horizon.num == 0 {
        return Err(Error::Invalid("horizon must be positive"));
    }
    if m_fine.get() > crate::dyadic::MAX_LEVEL {
        return Err(Error::Invalid("fine level too deep"));
    }
    let mut total: u128 = 0;
    let mut lengths = Vec::new();
    for m in 0..=m_fine.get() {
        let len = row_length(Level::new(m), horizon)?;
        total += len as u128;
        lengths.push(len);
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for (m, &len) in lengths.iter().enumerate() {
        let mut row = Vec::new();
        row.try_reserve_exact(len)
            .map_err(|_| Error::Resource { required: total })?;
        CoinStream::new(seed, Stream::Row(m as u32)).fill(&mut row, len);
        rows.push(row);
    }
    Ok(StepMatrix {
        seed,
        fine_level: m_fine,
        horizon,
        rows,
    })
}

/// First-exit times of `|v(n) - v(anchor)| = width`, re-anchored at each exit.
pub(crate) fn band_exits(values: impl Iterator<Item = i64>, width: i64) -> (Vec<u64>, u64, bool) {
    let mut times = Vec::new();
    let mut values = values;
    let mut anchor = values.next().unwrap_or(0);
    let mut last = 0u64;
    let mut n = 0u64;
    for v in values {
        n += 1;
        if (v - anchor).abs() >= width {
            debug_assert_eq!((v - anchor).abs(), width, "walk jumped over a band edge");
            times.push(n);
            anchor = v;
            last = n;
        }
    }
    (times, n, n > last)
}

/// `T(0) = 0`, `T(k+1) = min { n > T(k) : |S(n) - S(T(k))| = 2 }` for the walk with these steps.
pub fn even_crossing_times(steps: &[i8]) -> StoppingSequence {
    let sums = core::iter::once(0i64).chain(steps.iter().scan(0i64, |acc, &x| {
        *acc += x as i64;
        Some(*acc)
    }));
    let (times, observed, truncated) = band_exits(sums, 2);
    StoppingSequence {
        level: Level::default(),
        unit: TimeUnit::LevelSteps,
        origin: Origin::EvenCrossing,
        times,
        observed,
        truncated,
    }
}

/// Flips each bridge `(T(k), T(k+1)]` of `raw` whose increment is not
/// `2 * parent[k]`. Bridges beyond the parent's length are dropped, so the
/// output has `T(min(#bridges, parent.len()))` steps.
pub fn twist(parent: &[i8], raw: &[i8], crossings: &StoppingSequence) -> Result<Vec<i8>, Error> {
    let bridges = crossings.count().min(parent.len());
    let end = crossings.time(bridges).unwrap_or(0) as usize;
    if end > raw.len() {
        return Err(Error::Inconsistent {
            level: crossings.level.get(),
            index: bridges,
        });
    }
    let mut out = Vec::with_capacity(end);
    for k in 0..bridges {
        let a = crossings.time(k).unwrap() as usize;
        let b = crossings.time(k + 1).unwrap() as usize;
        if b <= a {
            return Err(Error::Inconsistent {
                level: crossings.level.get(),
                index: k,
            });
        }
        let bridge = &raw[a..b];
        let mut partial = 0i64;
        for (i, &x) in bridge.iter().enumerate() {
            partial += x as i64;
            if partial.abs() >= 2 && i + 1 < bridge.len() {
                return Err(Error::Inconsistent {
                    level: crossings.level.get(),
                    index: k,
                });
            }
        }
        if partial.abs() != 2 {
            return Err(Error::Inconsistent {
                level: crossings.level.get(),
                index: k,
            });
        }
        if partial == 2 * parent[k] as i64 {
            out.extend_from_slice(bridge);
        } else {
            out.extend(bridge.iter().map(|&x| -x));
        }
    }
    Ok(out)
}

/// Levels `0..=m_fine` of the twisted, shrunken walks built from one step matrix.
#[derive(Clone, Debug)]
pub struct NestedWalkFamily {
    matrix: StepMatrix,
    twisted: Vec<Vec<i8>>,
    crossings: Vec<StoppingSequence>,
    shrunken: Vec<DyadicPath>,
}

impl NestedWalkFamily {
    /// Twists every level recursively from level 0.
    pub fn from_matrix(matrix: StepMatrix) -> Result<Self, Error> {
        let n_levels = matrix.fine_level.get() as usize + 1;
        let mut twisted: Vec<Vec<i8>> = Vec::with_capacity(n_levels);
        let mut crossings = Vec::with_capacity(n_levels);
        twisted.push(matrix.rows[0].clone());
        crossings.push(StoppingSequence {
            level: Level::new(0),
            unit: TimeUnit::LevelSteps,
            origin: Origin::EvenCrossing,
            times: Vec::new(),
            observed: matrix.rows[0].len() as u64,
            truncated: false,
        });
        for m in 1..n_levels {
            let raw = &matrix.rows[m];
            let mut t = even_crossing_times(raw);
            t.level = Level::new(m as u32);
            let tw = twist(&twisted[m - 1], raw, &t)?;
            twisted.push(tw);
            crossings.push(t);
        }
        let shrunken = twisted
            .iter()
            .enumerate()
            .map(|(m, steps)| DyadicPath::from_steps(Level::new(m as u32), steps))
            .collect();
        Ok(NestedWalkFamily {
            matrix,
            twisted,
            crossings,
            shrunken,
        })
    }

    pub fn matrix(&self) -> &StepMatrix {
        &self.matrix
    }

    pub fn fine_level(&self) -> Level {
        self.matrix.fine_level
    }

    pub fn horizon(&self) -> Dyadic {
        self.matrix.horizon
    }

    pub fn twisted(&self, m: Level) -> &[i8] {
        &self.twisted[m.get() as usize]
    }

    /// `T_m` for `m >= 1`; level 0 has no crossing sequence (empty).
    pub fn crossings(&self, m: Level) -> &StoppingSequence {
        &self.crossings[m.get() as usize]
    }

    /// `S~_m` on its own integer grid; `B~_m` is its shrunken reading.
    pub fn shrunken(&self, m: Level) -> &DyadicPath {
        &self.shrunken[m.get() as usize]
    }

    /// Whether `B~_m` is defined on all of `[0, horizon]`.
    pub fn covers(&self, m: Level, horizon: Dyadic) -> bool {
        self.shrunken(m).steps_to(horizon).is_some()
    }
}

/// Step matrix plus twisting for `(seed, m_fine, horizon)`.
pub fn build_nested(seed: u64, m_fine: Level, horizon: Dyadic) -> Result<NestedWalkFamily, Error> {
    NestedWalkFamily::from_matrix(generate_step_matrix(seed, m_fine, horizon)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_up_steps_cross_at_two() {
        let t = even_crossing_times(&[1, 1]);
        assert_eq!(t.times, vec![2]);
        assert!(!t.truncated);
    }

    #[test]
    fn scan_example() {
        // S = 1,0,1,2,1,0
        let t = even_crossing_times(&[1, -1, 1, 1, -1, -1]);
        assert_eq!(t.times, vec![4, 6]);
        let t = even_crossing_times(&[1, -1, 1, 1, -1]);
        assert_eq!(t.times, vec![4]);
        assert!(t.truncated);
    }

    #[test]
    fn matching_bridge_is_kept() {
        let raw = [1, 1];
        let t = even_crossing_times(&raw);
        assert_eq!(twist(&[1], &raw, &t).unwrap(), vec![1, 1]);
    }

    #[test]
    fn mismatched_bridge_is_flipped() {
        let raw = [1, 1];
        let t = even_crossing_times(&raw);
        assert_eq!(twist(&[-1], &raw, &t).unwrap(), vec![-1, -1]);
    }

    #[test]
    fn bridges_beyond_parent_dropped() {
        let raw = [1, 1, -1, -1, 1];
        let t = even_crossing_times(&raw);
        assert_eq!(t.times, vec![2, 4]);
        assert_eq!(twist(&[1], &raw, &t).unwrap(), vec![1, 1]);
    }

    #[test]
    fn inconsistent_crossings_rejected() {
        let raw = [1, -1, 1, 1];
        let bogus = StoppingSequence {
            level: Level::new(1),
            unit: TimeUnit::LevelSteps,
            origin: Origin::EvenCrossing,
            times: vec![2],
            observed: 4,
            truncated: true,
        };
        assert!(matches!(
            twist(&[1], &raw, &bogus),
            Err(Error::Inconsistent { level: 1, index: 0 })
        ));
    }

    #[test]
    fn level_zero_is_raw() {
        let fam = build_nested(11, Level::new(4), Dyadic::ONE).unwrap();
        assert_eq!(fam.twisted(Level::new(0)), fam.matrix().row(Level::new(0)));
    }

    #[test]
    fn deterministic_matrix() {
        let a = generate_step_matrix(5, Level::new(3), Dyadic::ONE).unwrap();
        let b = generate_step_matrix(5, Level::new(3), Dyadic::ONE).unwrap();
        assert_eq!(a, b);
        let c = generate_step_matrix(6, Level::new(3), Dyadic::ONE).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_step_matrix(1, Level::new(0), Dyadic::ONE).is_err());
        assert!(generate_step_matrix(1, Level::new(3), Dyadic::new(0, 0)).is_err());
        assert!(matches!(
            generate_step_matrix(1, Level::new(3), Dyadic::new(u64::MAX, 0)),
            Err(Error::Resource { .. })
        ));
    }
}
