//! Test martingales `M(t) = W(C(t))`: a fine walk played back on a clock.
//!
//! The walk stands in for the DDS Brownian motion `W`, the clock `C` is the
//! quadratic variation `<M>`, and the four generator kinds cover a Brownian
//! motion, a deterministic clock (Gaussian `M`), a clock independent of `W`,
//! and a clock that depends on the sign of `W`.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{Dyadic, DyadicPath, Level, MicroClock, PlPath, Ratio, StoppingSequence, TimeChange};
use crate::embedding::{martingale_crossing_times, time_changed_path};
use crate::error::Error;
use crate::rng::{stream, unit_f64, CoinStream, Stream};
use crate::twist::build_nested;

/// Strictly increasing piecewise-linear map `f` with `f(0) = 0`, extended
/// past its last breakpoint with the last slope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QvMap {
    points: Vec<(Ratio, Ratio)>,
}

impl QvMap {
    pub fn new(points: Vec<(Ratio, Ratio)>) -> Result<Self, Error> {
        if points.len() < 2 || points[0] != (Ratio::ZERO, Ratio::ZERO) {
            return Err(Error::Invalid("map needs (0, 0) and at least one more breakpoint"));
        }
        if points
            .windows(2)
            .any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1)
        {
            return Err(Error::Invalid("map must be strictly increasing"));
        }
        Ok(QvMap { points })
    }

    /// `f(t) = t / 2`.
    pub fn half_speed() -> Self {
        QvMap::new(alloc::vec![
            (Ratio::ZERO, Ratio::ZERO),
            (Ratio::ONE, Ratio::new(1, 2))
        ])
        .unwrap()
    }

    pub fn points(&self) -> &[(Ratio, Ratio)] {
        &self.points
    }

    fn segment(pts: &[(Ratio, Ratio)], x: Ratio, key: impl Fn(&(Ratio, Ratio)) -> Ratio) -> usize {
        let i = pts.partition_point(|p| key(p) <= x);
        i.clamp(1, pts.len() - 1) - 1
    }

    pub fn eval(&self, t: Ratio) -> Ratio {
        let i = Self::segment(&self.points, t, |p| p.0);
        let (t0, f0) = self.points[i];
        let (t1, f1) = self.points[i + 1];
        let slope = (f1 - f0) * Ratio::new((t1 - t0).denom(), (t1 - t0).numer());
        f0 + (t - t0) * slope
    }

    /// `f^{-1}(s)`.
    pub fn inverse(&self, s: Ratio) -> Ratio {
        let i = Self::segment(&self.points, s, |p| p.1);
        let (t0, f0) = self.points[i];
        let (t1, f1) = self.points[i + 1];
        let slope = (t1 - t0) * Ratio::new((f1 - f0).denom(), (f1 - f0).numer());
        t0 + (s - f0) * slope
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    /// G1: `C(t) = t`.
    Bm,
    /// G2: `C = f` deterministic.
    Deterministic { map: QvMap },
    /// G3: i.i.d. durations of `short_halves * U/2` or `long_halves * U/2`
    /// micro-ticks, drawn from a stream independent of the walk.
    Independent {
        short_halves: u64,
        long_halves: u64,
        p_short: f64,
    },
    /// G4: `above * U` when the walk is `>= 0` at the start of the step, else `below * U`.
    SignDependent { above: u64, below: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn g1(seed: u64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Bm,
            seed,
        }
    }

    pub fn g2(seed: u64, map: QvMap) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Deterministic { map },
            seed,
        }
    }

    /// Durations `U/2` or `3U/2` with probability 1/2 each.
    pub fn g3(seed: u64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Independent {
                short_halves: 1,
                long_halves: 3,
                p_short: 0.5,
            },
            seed,
        }
    }

    /// Durations `U` above zero and `2U` below.
    pub fn g4(seed: u64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::SignDependent { above: 1, below: 2 },
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorSpec {
            kind: self.kind.clone(),
            seed,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            GeneratorKind::Bm => "g1",
            GeneratorKind::Deterministic { .. } => "g2",
            GeneratorKind::Independent { .. } => "g3",
            GeneratorKind::SignDependent { .. } => "g4",
        }
    }

    fn validate(&self, clock: &MicroClock) -> Result<(), Error> {
        match self.kind {
            GeneratorKind::Independent {
                short_halves,
                long_halves,
                p_short,
            } => {
                if short_halves == 0 || long_halves == 0 {
                    return Err(Error::Invalid("durations must be positive"));
                }
                if clock.ticks_per_step() < 2 {
                    return Err(Error::Invalid("half-step durations need at least 2 ticks per step"));
                }
                if !(0.0..=1.0).contains(&p_short) {
                    return Err(Error::Invalid("probability outside [0, 1]"));
                }
            }
            GeneratorKind::SignDependent { above, below } => {
                if above == 0 || below == 0 {
                    return Err(Error::Invalid("duration multipliers must be positive"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Upper bound on `<M>_t / t` for `t <= horizon` (at least 1): an
    /// intrinsic horizon of `K * speed` covers real time `K`.
    pub fn speed_bound(&self, horizon: Ratio) -> Ratio {
        match &self.kind {
            GeneratorKind::Bm => Ratio::ONE,
            GeneratorKind::Deterministic { map } => {
                // f(t)/t is monotone on each segment
                let speed = |t: Ratio| map.eval(t) * Ratio::new(t.denom(), t.numer());
                map.points()
                    .iter()
                    .skip(1)
                    .map(|p| p.0)
                    .filter(|&t| t < horizon)
                    .chain((horizon > Ratio::ZERO).then_some(horizon))
                    .map(speed)
                    .fold(Ratio::ONE, Ratio::max)
            }
            GeneratorKind::Independent { short_halves, .. } => {
                Ratio::new(2, *short_halves as i128).max(Ratio::ONE)
            }
            GeneratorKind::SignDependent { above, below } => {
                Ratio::new(1, (*above).min(*below) as i128).max(Ratio::ONE)
            }
        }
    }
}

/// Produces step durations one at a time; state carries the G2 rounding
/// and the G3 stream.
struct DurationSampler<'a> {
    kind: &'a GeneratorKind,
    u: u64,
    unit_exp: u32,
    fine: Level,
    rng: Option<ChaCha8Rng>,
    cum: u64,
    worst_quantization: Ratio,
}

impl<'a> DurationSampler<'a> {
    fn new(spec: &'a GeneratorSpec, clock: &MicroClock) -> Self {
        let rng = matches!(spec.kind, GeneratorKind::Independent { .. })
            .then(|| stream(spec.seed, Stream::Durations));
        DurationSampler {
            kind: &spec.kind,
            u: clock.ticks_per_step(),
            unit_exp: clock.unit_exp(),
            fine: clock.fine_level(),
            rng,
            cum: 0,
            worst_quantization: Ratio::ZERO,
        }
    }

    /// Duration of fine step `i` (1-based) that starts at walk value `w_before`.
    fn next(&mut self, i: u64, w_before: i64) -> u64 {
        let d = match self.kind {
            GeneratorKind::Bm => self.u,
            GeneratorKind::Deterministic { map } => {
                let s = Ratio::dyadic(i as i128, 2 * self.fine.get());
                let exact = map.inverse(s) * Ratio::from_int(1i128 << self.unit_exp);
                let target = exact.round().max(0) as u64;
                let d = target.saturating_sub(self.cum).max(1);
                let err = (Ratio::from_int((self.cum + d) as i128) - exact).abs();
                if err > self.worst_quantization {
                    self.worst_quantization = err;
                }
                d
            }
            GeneratorKind::Independent {
                short_halves,
                long_halves,
                p_short,
            } => {
                let x = unit_f64(self.rng.as_mut().unwrap());
                let halves = if x < *p_short { short_halves } else { long_halves };
                (halves * self.u / 2).max(1)
            }
            GeneratorKind::SignDependent { above, below } => {
                if w_before >= 0 {
                    above * self.u
                } else {
                    below * self.u
                }
            }
        };
        self.cum += d;
        d
    }
}

/// Durations for every step of `walk` under `spec`.
pub fn gen_durations(
    spec: &GeneratorSpec,
    walk: &DyadicPath,
    clock: &MicroClock,
) -> Result<TimeChange, Error> {
    spec.validate(clock)?;
    let mut sampler = DurationSampler::new(spec, clock);
    let durations = (0..walk.steps())
        .map(|i| sampler.next(i as u64 + 1, walk.value(i)))
        .collect();
    TimeChange::new(*clock, durations)
}

/// Where the fine walk comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WalkSource {
    /// A fair-coin stream read directly at the fine level.
    #[default]
    Direct,
    /// Level `m_f` of the twist-and-shrink family with the same seed.
    TwistShrink,
}

/// How far the assembled martingale must extend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Real time, in micro-ticks.
    RealTime(u64),
    /// At least `count` level-`level` crossings (direct source only).
    Crossings { level: Level, count: usize },
}

/// `M(t) = W(C(t))`; `C` is exactly `<M>`.
#[derive(Clone, Debug)]
pub struct MartingaleInstance {
    pub spec: GeneratorSpec,
    pub fine_walk: DyadicPath,
    pub time_change: TimeChange,
    /// Coverage was not reached.
    pub truncated: bool,
    /// Largest `|cum_i - exact_i|` in micro-ticks introduced by rounding a
    /// deterministic clock; zero for the other kinds.
    pub quantization_error: Ratio,
}

impl MartingaleInstance {
    pub fn clock(&self) -> &MicroClock {
        self.time_change.clock()
    }

    /// `M` in real time, fine space units.
    pub fn path(&self) -> PlPath {
        time_changed_path(&self.fine_walk, &self.time_change)
    }

    /// `<M>` in real time, intrinsic micro-ticks.
    pub fn qv_path(&self) -> PlPath {
        self.time_change.as_path()
    }

    pub fn crossing_times(&self, m: Level) -> Result<StoppingSequence, Error> {
        martingale_crossing_times(&self.fine_walk, &self.time_change, m)
    }

    pub fn horizon_covered(&self, ticks: u64) -> bool {
        self.time_change.total_real() >= ticks
    }
}

const MAX_DIRECT_STEPS: u64 = 1 << 34;

/// Builds the fine walk and attaches the generator's durations until
/// `coverage` is met.
pub fn assemble_martingale(
    spec: &GeneratorSpec,
    clock: MicroClock,
    coverage: Coverage,
    source: WalkSource,
) -> Result<MartingaleInstance, Error> {
    spec.validate(&clock)?;
    match source {
        WalkSource::Direct => assemble_direct(spec, clock, coverage),
        WalkSource::TwistShrink => {
            let Coverage::RealTime(ticks) = coverage else {
                return Err(Error::Invalid(
                    "crossing-count coverage needs the direct walk source",
                ));
            };
            let real = Ratio::new(ticks as i128, clock.ticks_per_unit() as i128);
            let need = real * spec.speed_bound(real);
            // smallest power-of-two multiple of the unit grid covering `need`
            let exp = clock.unit_exp();
            let units = need.numer() * (1i128 << exp);
            let units = (units + need.denom() - 1) / need.denom();
            let horizon = Dyadic::new(units.max(1) as u64, exp);
            let family = build_nested(spec.seed, clock.fine_level(), horizon)?;
            let walk = family.shrunken(clock.fine_level()).clone();
            let mut sampler = DurationSampler::new(spec, &clock);
            let mut durations = Vec::with_capacity(walk.steps());
            let mut cum = 0u64;
            for i in 0..walk.steps() {
                if cum >= ticks {
                    break;
                }
                let d = sampler.next(i as u64 + 1, walk.value(i));
                cum += d;
                durations.push(d);
            }
            let n = durations.len();
            let walk = DyadicPath::from_values(walk.level(), walk.values()[..=n].to_vec())?;
            Ok(MartingaleInstance {
                spec: spec.clone(),
                fine_walk: walk,
                time_change: TimeChange::new(clock, durations)?,
                truncated: cum < ticks,
                quantization_error: sampler.worst_quantization,
            })
        }
    }
}

fn assemble_direct(
    spec: &GeneratorSpec,
    clock: MicroClock,
    coverage: Coverage,
) -> Result<MartingaleInstance, Error> {
    let fine = clock.fine_level();
    let mut coins = CoinStream::new(spec.seed, Stream::DirectWalk);
    let mut sampler = DurationSampler::new(spec, &clock);
    let mut values = alloc::vec![0i64];
    let mut durations = Vec::new();
    let mut cum = 0u64;
    let (width, wanted) = match coverage {
        Coverage::Crossings { level, count } => {
            if level > fine {
                return Err(Error::Invalid("crossing level finer than the walk"));
            }
            (1i64 << (fine.get() - level.get()), count)
        }
        Coverage::RealTime(_) => (1, 0),
    };
    let mut anchor = 0i64;
    let mut crossings = 0usize;
    let done = |cum: u64, crossings: usize| match coverage {
        Coverage::RealTime(t) => cum >= t,
        Coverage::Crossings { .. } => crossings >= wanted,
    };
    while !done(cum, crossings) {
        let n = durations.len() as u64;
        if n >= MAX_DIRECT_STEPS {
            return Err(Error::Resource {
                required: n as u128 + 1,
            });
        }
        let w = *values.last().unwrap();
        let d = sampler.next(n + 1, w);
        let v = w + coins.next_step() as i64;
        cum = cum.checked_add(d).ok_or(Error::Resource {
            required: u64::MAX as u128,
        })?;
        durations.push(d);
        values.push(v);
        if (v - anchor).abs() == width {
            anchor = v;
            crossings += 1;
        }
    }
    Ok(MartingaleInstance {
        spec: spec.clone(),
        fine_walk: DyadicPath::from_values(fine, values)?,
        time_change: TimeChange::new(clock, durations)?,
        truncated: false,
        quantization_error: sampler.worst_quantization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn clock(m: u32) -> MicroClock {
        MicroClock::new(Level::new(m), 4).unwrap()
    }

    #[test]
    fn g1_durations_constant() {
        let w = DyadicPath::from_steps(Level::new(3), &[1, -1, -1, 1]);
        let tc = gen_durations(&GeneratorSpec::g1(0), &w, &clock(3)).unwrap();
        assert_eq!(tc.durations(), &[4, 4, 4, 4]);
    }

    #[test]
    fn g4_doubles_below_zero() {
        // values 0,1,2,1,0,-1,-2
        let w = DyadicPath::from_steps(Level::new(3), &[1, 1, -1, -1, -1, -1]);
        let tc = gen_durations(&GeneratorSpec::g4(0), &w, &clock(3)).unwrap();
        assert_eq!(tc.durations(), &[4, 4, 4, 4, 4, 8]);
    }

    #[test]
    fn g2_half_speed_doubles_every_step() {
        let w = DyadicPath::from_steps(Level::new(3), &[1, 1, -1, 1, 1, -1, -1]);
        let tc = gen_durations(&GeneratorSpec::g2(0, QvMap::half_speed()), &w, &clock(3)).unwrap();
        assert!(tc.durations().iter().all(|&d| d == 8));
    }

    #[test]
    fn qv_map_inverse_roundtrip() {
        let f = QvMap::new(vec![
            (Ratio::ZERO, Ratio::ZERO),
            (Ratio::new(1, 2), Ratio::new(1, 4)),
            (Ratio::ONE, Ratio::ONE),
        ])
        .unwrap();
        for k in 0..16 {
            let t = Ratio::new(k, 8);
            assert_eq!(f.inverse(f.eval(t)), t);
        }
        assert_eq!(f.eval(Ratio::from_int(2)), Ratio::new(5, 2));
        assert!(QvMap::new(vec![(Ratio::ZERO, Ratio::ZERO), (Ratio::ONE, Ratio::ZERO)]).is_err());
    }

    #[test]
    fn g3_needs_even_clock() {
        let c = MicroClock::new(Level::new(2), 1).unwrap();
        let w = DyadicPath::from_steps(Level::new(2), &[1]);
        assert!(gen_durations(&GeneratorSpec::g3(0), &w, &c).is_err());
    }

    #[test]
    fn direct_assembly_covers_horizon() {
        let c = clock(4);
        let ticks = c.ticks_per_unit();
        let inst = assemble_martingale(&GeneratorSpec::g4(9), c, Coverage::RealTime(ticks), WalkSource::Direct)
            .unwrap();
        assert!(inst.horizon_covered(ticks));
        assert!(!inst.truncated);
        assert_eq!(inst.fine_walk.steps(), inst.time_change.steps());
    }

    #[test]
    fn twist_source_covers_horizon() {
        let c = clock(4);
        let ticks = c.ticks_per_unit();
        for spec in [GeneratorSpec::g1(3), GeneratorSpec::g3(3), GeneratorSpec::g4(3)] {
            let inst = assemble_martingale(&spec, c, Coverage::RealTime(ticks), WalkSource::TwistShrink)
                .unwrap();
            assert!(!inst.truncated, "{}", spec.label());
            assert!(inst.horizon_covered(ticks));
        }
    }

    #[test]
    fn crossing_coverage() {
        let c = clock(5);
        let inst = assemble_martingale(
            &GeneratorSpec::g3(1),
            c,
            Coverage::Crossings { level: Level::new(3), count: 50 },
            WalkSource::Direct,
        )
        .unwrap();
        assert_eq!(inst.crossing_times(Level::new(3)).unwrap().count(), 50);
    }
}
