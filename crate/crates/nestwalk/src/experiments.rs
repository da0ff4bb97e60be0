//! Experiments: exact identity suite (E9), construction rates (E1–E4),
//! quadratic-variation and path approximation rates (E5, E6), generator
//! properties (E8), independence tests (E7) and the bound table.
//!
//! Each replication is a pure function of `(seed, rep)` and runs on one
//! thread; results are merged in replication order, so output does not
//! depend on the worker count.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use nestwalk_core::bounds::{eval_bound, BoundQuery, BoundResult, TheoremId};
use nestwalk_core::embedding::{
    check_jump_identity, check_nesting, check_skorohod_identity, max_clock_deviation, walk_at_jumps,
    walk_on_clock,
};
use nestwalk_core::rng::{replication_key, stream, Stream};
use nestwalk_core::{
    assemble_martingale, build_nested, composed_times, discrete_qvar, embedded_walk, skorohod_times,
    sup_distance, sup_distance_step, Coverage, Dyadic, GeneratorKind, Level, MartingaleInstance,
    MicroClock, NestedWalkFamily, PlPath, QuasiInverse, Ratio, WalkSource,
};
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::dump::{write_stops, Dump};
use crate::error::{HarnessError, Result};
use crate::indep::independence_test;
use crate::report::{
    BoundRow, ExactCheck, ExperimentReport, FitSummary, GaussSummary, IndepSummary, LevelSummary,
    Record,
};
use crate::stats::{binomial_band, fit_rate, inversions, ks_normal, spread, Normalizer};

/// Coverage retries double the horizon margin this many times.
const MAX_ATTEMPTS: usize = 4;

// ---------------------------------------------------------------- helpers

fn run_reps<T: Send>(cfg: &ExperimentConfig, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    let out: Vec<Result<T>> = pool.install(|| (0..cfg.reps).into_par_iter().map(&f).collect());
    // first failure in replication order, independent of scheduling
    out.into_iter().collect()
}

fn fine_units(r: Ratio, m_fine: u32) -> f64 {
    r.to_f64() / (1u64 << m_fine) as f64
}

/// `floor(K 4^m)`: level-`m` steps inside `[0, K]`.
fn steps_within(k: Dyadic, m: u32) -> u64 {
    let two_m = 2 * m;
    if k.exp <= two_m {
        k.num << (two_m - k.exp)
    } else {
        k.num >> (k.exp - two_m)
    }
}

fn steps_covering(k: Dyadic, m: u32) -> Result<u64> {
    k.ceil_scaled(2 * m)
        .ok_or(HarnessError::Core(nestwalk_core::Error::Resource { required: u128::MAX }))
}

/// Exact value of a piecewise-linear path at an integer time.
fn pl_at(p: &PlPath, t: i64) -> Ratio {
    let times = p.times();
    let i = times.partition_point(|&s| s <= t).clamp(1, times.len()) - 1;
    let v = if times[i] == t || i + 1 == times.len() {
        Ratio::from_int(p.values()[i] as i128)
    } else {
        let (t0, t1) = (times[i] as i128, times[i + 1] as i128);
        let (v0, v1) = (p.values()[i] as i128, p.values()[i + 1] as i128);
        Ratio::from_int(v0) + Ratio::new((v1 - v0) * (t as i128 - t0), t1 - t0)
    };
    v.shr(p.shift())
}

/// Scale for the martingale bounds: `max(<M>_K bound, e)`.
fn martingale_scale(cfg: &ExperimentConfig) -> f64 {
    let k = cfg.horizon.to_ratio();
    let speed = cfg.generator.speed_bound(k);
    (k * speed).to_f64().max(std::f64::consts::E)
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    halving: u64,
    refinement: u64,
    skorohod: u64,
    jumps: u64,
    nesting: u64,
    duality: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.halving += o.halving;
        self.refinement += o.refinement;
        self.skorohod += o.skorohod;
        self.jumps += o.jumps;
        self.nesting += o.nesting;
        self.duality += o.duality;
    }

    fn checks(&self) -> Vec<ExactCheck> {
        [
            ("twisted halving", self.halving),
            ("refinement", self.refinement),
            ("skorohod = <M> at tau", self.skorohod),
            ("N_m(tau_k) = k 4^-m", self.jumps),
            ("tau nesting", self.nesting),
            ("<M> at T_s = s", self.duality),
        ]
        .into_iter()
        .filter(|(_, n)| *n > 0)
        .map(|(name, checked)| ExactCheck { name, checked })
        .collect()
    }
}

struct Exp {
    id: &'static str,
    theorem: Option<TheoremId>,
    /// Uses the martingale scale `a` in its bound.
    scaled: bool,
    /// Rate shape used for `scaled_median`: `m 2^{-m/2}` or `sqrt(m) 2^{-m}`.
    shape: Option<Normalizer>,
}

const fn exp(id: &'static str, theorem: Option<TheoremId>, scaled: bool, shape: Option<Normalizer>) -> Exp {
    Exp {
        id,
        theorem,
        scaled,
        shape,
    }
}

const CONSTRUCT: [Exp; 7] = [
    exp("E1", Some(TheoremId::Tlag), false, Some(Normalizer::SqrtM)),
    exp("E1r", Some(TheoremId::Refin), false, Some(Normalizer::M)),
    exp("E2", Some(TheoremId::Wiener), false, Some(Normalizer::M)),
    exp("E3", Some(TheoremId::WienerM), false, Some(Normalizer::M)),
    exp("E3s", Some(TheoremId::Equid), false, Some(Normalizer::SqrtM)),
    exp("E3c", Some(TheoremId::Equid), false, Some(Normalizer::SqrtM)),
    exp("E4", None, false, None),
];

const QVAR: [Exp; 1] = [exp("E5", Some(TheoremId::QvarA), true, Some(Normalizer::SqrtM))];

const APPROX: [Exp; 4] = [
    exp("E6a", Some(TheoremId::ApproxA), true, Some(Normalizer::M)),
    exp("E6b", Some(TheoremId::ApproxNmA), true, Some(Normalizer::M)),
    // per-replication envelopes
    exp("E6t", None, false, None),
    exp("E6d", None, false, None),
];

fn bound_for(cfg: &ExperimentConfig, e: &Exp, m: u32) -> Result<Option<BoundResult>> {
    let Some(t) = e.theorem else { return Ok(None) };
    let mut q = BoundQuery::new(t, cfg.horizon.to_f64(), m, cfg.c_const);
    if e.scaled {
        q = q.with_a(martingale_scale(cfg));
    }
    Ok(Some(eval_bound(&q)?))
}

fn record(e: &Exp, m: u32, rep: usize, seed: u64, value: f64, envelope: Option<f64>) -> Record {
    Record {
        exp_id: e.id,
        m,
        rep,
        sup_error: value,
        envelope,
        violated: envelope.is_some_and(|env| value > env),
        seed,
    }
}

fn summarize(cfg: &ExperimentConfig, exps: &[Exp], records: &[Record]) -> Result<Vec<LevelSummary>> {
    let mut out = Vec::new();
    for e in exps {
        for m in cfg.levels() {
            let rows: Vec<&Record> = records.iter().filter(|r| r.exp_id == e.id && r.m == m).collect();
            let values: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
            let Some(sp) = spread(&values) else { continue };
            let b = bound_for(cfg, e, m)?;
            let cm = ((m + 2) as f64).log2();
            let scaled_median = e.shape.map(|s| {
                let rate = match s {
                    Normalizer::M => m as f64 * 2f64.powf(-(m as f64) / 2.0),
                    _ => (m as f64).sqrt() * 2f64.powi(-(m as i32)),
                };
                sp.median / (cm * rate)
            });
            out.push(LevelSummary {
                exp_id: e.id,
                m,
                spread: sp,
                envelope: b.map(|b| b.envelope),
                probability: b.map(|b| b.probability),
                clamped: b.is_some_and(|b| b.clamped),
                violations: rows.iter().filter(|r| r.violated).count(),
                strict: m >= cfg.strict_from,
                scaled_median,
            });
        }
    }
    Ok(out)
}

struct FitSpec {
    id: &'static str,
    normalizer: Normalizer,
    expected: f64,
    accept: (f64, f64),
    min_level: u32,
    gated: bool,
}

fn add_fits(cfg: &ExperimentConfig, report: &mut ExperimentReport, specs: &[FitSpec]) -> Result<()> {
    let top = cfg.m_fine.saturating_sub(4);
    for s in specs {
        let (levels, medians): (Vec<u32>, Vec<f64>) = report
            .levels
            .iter()
            .filter(|l| l.exp_id == s.id && l.m >= s.min_level && l.m <= top)
            .map(|l| (l.m, l.spread.median))
            .unzip();
        if levels.len() < 3 {
            continue;
        }
        let fit = fit_rate(&levels, &medians, s.normalizer)?;
        let pass = fit.slope >= s.accept.0 && fit.slope <= s.accept.1;
        if s.gated {
            report.verdict(
                format!("{} slope in [{}, {}]", s.id, s.accept.0, s.accept.1),
                pass,
                format!("slope {:.4} over m = {:?}", fit.slope, levels),
            );
            let all: Vec<f64> = report
                .levels
                .iter()
                .filter(|l| l.exp_id == s.id)
                .map(|l| l.spread.median)
                .collect();
            let inv = inversions(&all);
            report.verdict(
                format!("{} medians decrease in m", s.id),
                inv <= 1,
                format!("{inv} inversion(s)"),
            );
        }
        report.fits.push(FitSummary {
            exp_id: s.id,
            normalizer: s.normalizer,
            levels,
            fit,
            expected: s.expected,
            accept: s.accept,
            pass,
            gated: s.gated,
        });
    }
    Ok(())
}

fn violation_verdicts(cfg: &ExperimentConfig, report: &mut ExperimentReport, ids: &[&str]) {
    for id in ids {
        let (count, levels): (usize, Vec<u32>) = report
            .levels
            .iter()
            .filter(|l| l.exp_id == *id && l.strict)
            .fold((0, Vec::new()), |(c, mut v), l| {
                v.push(l.m);
                (c + l.violations, v)
            });
        if levels.is_empty() {
            continue;
        }
        report.verdict(
            format!("{id} envelope violations at m >= {}", cfg.strict_from),
            count == 0,
            format!("{count} violation(s) over m = {levels:?}, {} replications", cfg.reps),
        );
    }
}

fn stops_path(cfg: &ExperimentConfig, label: &str, m: u32, rep: usize) -> Result<PathBuf> {
    let out = cfg
        .out
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("exporting stopping sequences needs --out".into()))?;
    Ok(out.join("stops").join(format!("{label}_m{m}_r{rep}.csv")))
}

// ------------------------------------------------------- nested family

fn exact_family(family: &NestedWalkFamily, clock: &MicroClock, key: u64, rep: usize, tally: &mut Tally) -> Result<()> {
    let m_f = family.fine_level().get();
    let fail = |check, level, index| HarnessError::Exact {
        check,
        seed: key,
        rep,
        level,
        index,
    };
    for m in 0..m_f {
        let coarse = family.shrunken(Level::new(m));
        let fine = family.shrunken(Level::new(m + 1));
        let t = family.crossings(Level::new(m + 1));
        let n = coarse.steps().min(t.count());
        let coarse_path = PlPath::from_walk(coarse, clock);
        let fine_path = PlPath::from_walk(fine, clock);
        let dt_c = clock.ticks_per(Level::new(m)) as i64;
        let dt_f = clock.ticks_per(Level::new(m + 1)) as i64;
        for k in 0..=n {
            let j = t.time(k).unwrap_or(0) as usize;
            if fine.value(j) != 2 * coarse.value(k) {
                return Err(fail("twisted halving", m + 1, k));
            }
            if pl_at(&fine_path, j as i64 * dt_f) != pl_at(&coarse_path, k as i64 * dt_c) {
                return Err(fail("refinement", m + 1, k));
            }
        }
        tally.halving += n as u64 + 1;
        tally.refinement += n as u64 + 1;
    }
    Ok(())
}

struct FamilyRep {
    records: Vec<Record>,
    tally: Tally,
}

fn measure_family(
    cfg: &ExperimentConfig,
    clock: &MicroClock,
    family: &NestedWalkFamily,
    key: u64,
    rep: usize,
) -> Result<Option<FamilyRep>> {
    let k = cfg.horizon;
    let m_f = cfg.m_fine;
    let h = Ratio::from_int(clock.horizon_ticks(k)? as i128);
    let fine_level = Level::new(m_f);
    if !family.covers(fine_level, k) {
        return Ok(None);
    }
    let w = family.shrunken(fine_level);
    let w_path = PlPath::from_walk(w, clock);
    let mut staged = Vec::new();
    for m in cfg.levels() {
        let level = Level::new(m);
        let need = steps_covering(k, m)?;
        let t = family.crossings(Level::new(m + 1));
        let s = skorohod_times(w, level)?;
        let composed = composed_times(family, level, fine_level)?;
        if !family.covers(level, k)
            || !family.covers(Level::new(m + 1), k)
            || (t.count() as u64) < need
            || (s.count() as u64) < need
            || (composed.count() as u64) < need
        {
            return Ok(None);
        }
        staged.push((m, t, s, composed));
    }

    let mut tally = Tally::default();
    exact_family(family, clock, key, rep, &mut tally)?;

    let mut records = Vec::new();
    let fine_per_level = |m: u32| clock.fine_steps_per(Level::new(m));
    for (m, t, s, composed) in staged {
        let level = Level::new(m);
        let n = steps_within(k, m);
        let env = |i: usize| -> Result<Option<f64>> { Ok(bound_for(cfg, &CONSTRUCT[i], m)?.map(|b| b.envelope)) };
        let bm_tilde = PlPath::from_walk(family.shrunken(level), clock);

        let lag = max_clock_deviation(t, n, 4).expect("coverage checked") as f64 / 4f64.powi(m as i32 + 1);
        records.push(record(&CONSTRUCT[0], m, rep, key, lag, env(0)?));

        let next = PlPath::from_walk(family.shrunken(Level::new(m + 1)), clock);
        let refin = fine_units(sup_distance(&next, &bm_tilde, h)?, m_f);
        records.push(record(&CONSTRUCT[1], m, rep, key, refin, env(1)?));

        let e2 = fine_units(sup_distance(&w_path, &bm_tilde, h)?, m_f);
        records.push(record(&CONSTRUCT[2], m, rep, key, e2, env(2)?));

        let b = embedded_walk(w, &s, level)?;
        let b_path = PlPath::from_walk(&b.values, clock);
        let e3 = fine_units(sup_distance(&w_path, &b_path, h)?, m_f);
        records.push(record(&CONSTRUCT[3], m, rep, key, e3, env(3)?));

        let unit = 4f64.powi(m_f as i32);
        let dev = max_clock_deviation(&s, n, fine_per_level(m)).expect("coverage checked") as f64 / unit;
        records.push(record(&CONSTRUCT[4], m, rep, key, dev, env(4)?));

        let dev = max_clock_deviation(&composed, n, fine_per_level(m)).expect("coverage checked") as f64 / unit;
        records.push(record(&CONSTRUCT[5], m, rep, key, dev, env(5)?));

        let tilde = family.shrunken(level);
        let equal = (0..=n as usize).filter(|&i| b.values.value(i) == tilde.value(i)).count();
        records.push(record(&CONSTRUCT[6], m, rep, key, equal as f64 / (n + 1) as f64, None));

        if cfg.export_stops {
            let u = clock.ticks_per_step();
            let ticks: Vec<u64> = std::iter::once(0).chain(s.times.iter().map(|&x| x * u)).collect();
            let values: Vec<i64> = std::iter::once(0).chain(s.times.iter().map(|&x| w.value(x as usize))).collect();
            write_stops(&stops_path(cfg, "bm", m, rep)?, &s, &ticks, &values)?;
        }
    }
    Ok(Some(FamilyRep { records, tally }))
}

fn construct_rep(cfg: &ExperimentConfig, clock: &MicroClock, rep: usize) -> Result<FamilyRep> {
    let key = replication_key(cfg.seed, rep as u64);
    let overflow = || HarnessError::Core(nestwalk_core::Error::Resource { required: u128::MAX });
    let mut ext = cfg.horizon.scaled(3, 1).ok_or_else(overflow)?;
    for _ in 0..MAX_ATTEMPTS {
        let family = build_nested(key, Level::new(cfg.m_fine), ext)?;
        if let Some(out) = measure_family(cfg, clock, &family, key, rep)? {
            if rep == 0 {
                if let Some(path) = &cfg.dump {
                    Dump::from_family(&family).write(path)?;
                }
            }
            return Ok(out);
        }
        ext = ext.scaled(2, 0).ok_or_else(overflow)?;
    }
    Err(HarnessError::Core(nestwalk_core::Error::Resource {
        required: ext.ceil_scaled(2 * cfg.m_fine).unwrap_or(u64::MAX) as u128,
    }))
}

/// E1–E4 on the twist-and-shrink family.
pub fn run_construct(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let clock = cfg.clock()?;
    let reps = run_reps(cfg, |rep| construct_rep(cfg, &clock, rep))?;
    let mut report = ExperimentReport::new("construct", cfg);
    let mut tally = Tally::default();
    for r in reps {
        tally.add(&r.tally);
        report.records.extend(r.records);
    }
    report.exact = tally.checks();
    report.verdict("E9 exact identities", true, format!("{} checks", tally.halving + tally.refinement));
    report.levels = summarize(cfg, &CONSTRUCT, &report.records)?;
    violation_verdicts(cfg, &mut report, &["E1", "E1r", "E2", "E3", "E3s", "E3c"]);
    let path_rate = |id| FitSpec {
        id,
        normalizer: Normalizer::M,
        expected: -0.5,
        accept: (-0.75, -0.35),
        min_level: 0,
        gated: false,
    };
    let clock_rate = |id| FitSpec {
        id,
        normalizer: Normalizer::SqrtM,
        expected: -1.0,
        accept: (-1.15, -0.85),
        min_level: 0,
        gated: false,
    };
    add_fits(cfg, &mut report, &[path_rate("E2"), path_rate("E3"), clock_rate("E3s")])?;
    Ok(report)
}

// ------------------------------------------------------ martingales

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Want {
    qvar: bool,
    approx: bool,
}

struct MartRep {
    records: Vec<Record>,
    tally: Tally,
    /// `M(K)`.
    end_value: f64,
    clock_hash: u64,
}

fn assemble_covering(cfg: &ExperimentConfig, clock: &MicroClock, key: u64) -> Result<MartingaleInstance> {
    let spec = cfg.generator.with_seed(key);
    let h = clock.horizon_ticks(cfg.horizon)?;
    let mut cover = h + h.div_ceil(2);
    for _ in 0..MAX_ATTEMPTS {
        let inst = assemble_martingale(&spec, *clock, Coverage::RealTime(cover), cfg.source)?;
        let intrinsic = inst.time_change.eval_tick(h)?;
        let mut ok = !inst.truncated;
        for m in cfg.levels() {
            if !ok {
                break;
            }
            let level = Level::new(m);
            let s = skorohod_times(&inst.fine_walk, level)?;
            let reach = Ratio::from_int((s.count() as u64 * clock.ticks_per(level)) as i128);
            ok = reach >= intrinsic;
        }
        if ok {
            return Ok(inst);
        }
        cover = cover.checked_mul(2).ok_or(HarnessError::Core(nestwalk_core::Error::Resource {
            required: u128::MAX,
        }))?;
    }
    Err(HarnessError::Core(nestwalk_core::Error::Resource { required: cover as u128 }))
}

fn exact_martingale(
    cfg: &ExperimentConfig,
    inst: &MartingaleInstance,
    key: u64,
    rep: usize,
    tally: &mut Tally,
) -> Result<()> {
    let clock = inst.clock();
    let tc = &inst.time_change;
    let fail = |check, level, index| HarnessError::Exact {
        check,
        seed: key,
        rep,
        level,
        index,
    };
    let mut finer = None;
    let (lo, hi) = cfg.level_range();
    for m in (lo..=(hi + 1).min(cfg.m_fine)).rev() {
        let level = Level::new(m);
        let s = skorohod_times(&inst.fine_walk, level)?;
        let tau = inst.crossing_times(level)?;
        if let Some(k) = check_skorohod_identity(&s, &tau, tc)? {
            return Err(fail("skorohod = <M> at tau", m, k));
        }
        tally.skorohod += s.count() as u64;
        let n = discrete_qvar(&tau, level, clock);
        if let Some(k) = check_jump_identity(&n) {
            return Err(fail("N_m(tau_k) = k 4^-m", m, k));
        }
        tally.jumps += tau.count() as u64;
        if let Some(f) = &finer {
            if let Some(k) = check_nesting(&tau, f) {
                return Err(fail("tau nesting", m, k));
            }
            tally.nesting += tau.count() as u64;
        }
        finer = Some(tau);
    }
    let mut rng = stream(key, Stream::Probe);
    let total = tc.total_intrinsic() as u128 * 256;
    for i in 0..cfg.duality_probes {
        let s = Ratio::new((rng.next_u64() as u128 % (total + 1)) as i128, 256);
        let ok = match tc.quasi_inverse(s)? {
            QuasiInverse::Finite(t) => tc.eval(t)? == s,
            QuasiInverse::Infinite => false,
        };
        if !ok {
            return Err(fail("<M> at T_s = s", cfg.m_fine, i));
        }
        tally.duality += 1;
    }
    Ok(())
}

fn martingale_rep(cfg: &ExperimentConfig, clock: &MicroClock, rep: usize, want: Want) -> Result<MartRep> {
    let key = replication_key(cfg.seed, rep as u64);
    let inst = assemble_covering(cfg, clock, key)?;
    let mut tally = Tally::default();
    exact_martingale(cfg, &inst, key, rep, &mut tally)?;
    if rep == 0 {
        if let Some(path) = &cfg.dump {
            Dump::from_martingale(&inst, cfg.horizon)?.write(path)?;
        }
    }

    let m_f = cfg.m_fine;
    let h_ticks = clock.horizon_ticks(cfg.horizon)?;
    let h = Ratio::from_int(h_ticks as i128);
    let tc = &inst.time_change;
    let end = tc.total_real();
    let m_path = inst.path();
    let qv = inst.qv_path();
    let unit = clock.ticks_per_unit() as f64;
    let mut records = Vec::new();
    for m in cfg.levels() {
        let level = Level::new(m);
        let s = skorohod_times(&inst.fine_walk, level)?;
        let b = embedded_walk(&inst.fine_walk, &s, level)?;
        let tau = inst.crossing_times(level)?;
        let n_m = discrete_qvar(&tau, level, clock).as_step_path(end)?;
        let qv_err = sup_distance_step(&qv, &n_m, h)?;
        let e5 = qv_err.to_f64() / unit;
        if want.qvar {
            let env = bound_for(cfg, &QVAR[0], m)?.map(|b| b.envelope);
            records.push(record(&QVAR[0], m, rep, key, e5, env));
        }
        if want.approx {
            let on_clock = walk_on_clock(&b.values, tc)?;
            let at_jumps = walk_at_jumps(&b.values, &tau, clock, end)?;
            let e6a = fine_units(sup_distance(&m_path, &on_clock, h)?, m_f);
            let e6b = fine_units(sup_distance_step(&m_path, &at_jumps, h)?, m_f);
            let env_a = bound_for(cfg, &APPROX[0], m)?.map(|b| b.envelope);
            let env_b = bound_for(cfg, &APPROX[1], m)?.map(|b| b.envelope);
            records.push(record(&APPROX[0], m, rep, key, e6a, env_a));
            records.push(record(&APPROX[1], m, rep, key, e6b, env_b));

            // sup|M - B_m(N_m)| <= sup|M - B_m(<M>)| + 2 x (path envelope at m)
            let wiener = eval_bound(&BoundQuery::new(TheoremId::Wiener, cfg.horizon.to_f64(), m, cfg.c_const))?;
            records.push(record(&APPROX[2], m, rep, key, e6b, Some(e6a + 2.0 * wiener.envelope)));

            // B_m is 2^m-Lipschitz, so sup|B_m(<M>) - B_m(N_m)| <= 2^m sup|<M> - N_m|; compared exactly
            let gap = sup_distance_step(&on_clock, &at_jumps, h)?;
            let lhs = gap * Ratio::from_int(clock.ticks_per_unit() as i128);
            let rhs = qv_err * Ratio::from_int(1i128 << (m + m_f));
            let mut r = record(&APPROX[3], m, rep, key, fine_units(gap, m_f), Some(e5 * (1u64 << m) as f64));
            r.violated = lhs > rhs;
            records.push(r);
        }
        if cfg.export_stops {
            let ticks: Vec<u64> = std::iter::once(0).chain(tau.times.iter().copied()).collect();
            let values: Vec<i64> = std::iter::once(0)
                .chain(s.times.iter().map(|&x| inst.fine_walk.value(x as usize)))
                .collect();
            write_stops(&stops_path(cfg, inst.spec.label(), m, rep)?, &tau, &ticks, &values)?;
        }
    }

    let end_value = fine_units(pl_at(&m_path, h_ticks as i64), m_f);
    let mut hasher = DefaultHasher::new();
    let upto = tc.step_at(h_ticks).min(tc.steps());
    tc.durations()[..upto].hash(&mut hasher);
    Ok(MartRep {
        records,
        tally,
        end_value,
        clock_hash: hasher.finish(),
    })
}

fn run_martingale(cfg: &ExperimentConfig, command: &'static str, want: Want) -> Result<ExperimentReport> {
    cfg.validate()?;
    let clock = cfg.clock()?;
    let reps = run_reps(cfg, |rep| martingale_rep(cfg, &clock, rep, want))?;
    let mut report = ExperimentReport::new(command, cfg);
    let mut tally = Tally::default();
    let mut ends = Vec::with_capacity(reps.len());
    let mut hashes = Vec::with_capacity(reps.len());
    for r in reps {
        tally.add(&r.tally);
        report.records.extend(r.records);
        ends.push(r.end_value);
        hashes.push(r.clock_hash);
    }
    report.exact = tally.checks();
    report.verdict(
        "E9 exact identities",
        true,
        format!("{} checks", tally.skorohod + tally.jumps + tally.nesting + tally.duality),
    );
    if want.qvar {
        report.levels.extend(summarize(cfg, &QVAR, &report.records)?);
        violation_verdicts(cfg, &mut report, &["E5"]);
        add_fits(
            cfg,
            &mut report,
            &[FitSpec {
                id: "E5",
                normalizer: Normalizer::SqrtM,
                expected: -1.0,
                accept: (-1.15, -0.85),
                min_level: 4,
                gated: true,
            }],
        )?;
        if let GeneratorKind::Deterministic { map } = &cfg.generator.kind {
            let variance = map.eval(cfg.horizon.to_ratio()).to_f64();
            let ks = ks_normal(&ends, variance)?;
            let invariant = hashes.iter().all(|&x| x == hashes[0]);
            report.verdict("E8 <M> seed-invariant", invariant, format!("{} replications", hashes.len()));
            report.verdict(
                "E8 M(K) Gaussian at alpha 0.01",
                ks.p_value >= 0.01,
                format!("KS D = {:.4}, p = {:.4}", ks.statistic, ks.p_value),
            );
            report.gaussian = Some(GaussSummary {
                samples: ends.len(),
                variance,
                ks,
                clock_seed_invariant: invariant,
            });
        }
    }
    if want.approx {
        report.levels.extend(summarize(cfg, &APPROX, &report.records)?);
        violation_verdicts(cfg, &mut report, &["E6a", "E6b"]);
        for id in ["E6t", "E6d"] {
            let bad = report.records.iter().filter(|r| r.exp_id == id && r.violated).count();
            let name = if id == "E6t" {
                "E6t triangle: sup|M - B_m(N_m)| within sup|M - B_m(<M>)| + 2 envelope"
            } else {
                "E6d Lipschitz: sup|B_m(<M>) - B_m(N_m)| <= 2^m sup|<M> - N_m|"
            };
            report.verdict(name, bad == 0, format!("{bad} violation(s)"));
        }
        let path_rate = |id| FitSpec {
            id,
            normalizer: Normalizer::M,
            expected: -0.5,
            accept: (-0.75, -0.35),
            min_level: 0,
            gated: true,
        };
        add_fits(cfg, &mut report, &[path_rate("E6a"), path_rate("E6b")])?;
    }
    Ok(report)
}

/// E5 (and E8 for a deterministic clock).
pub fn run_qvar(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_martingale(cfg, "qvar", Want { qvar: true, approx: false })
}

/// E6: `M` against `B_m(<M>)` and `B_m(N_m)`.
pub fn run_approx(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_martingale(cfg, "approx", Want { qvar: false, approx: true })
}

// ------------------------------------------------------ independence

/// Level at which signs and gaps are read.
pub fn indep_level(cfg: &ExperimentConfig) -> u32 {
    cfg.m_fine.saturating_sub(3).max(1).min(cfg.m_fine)
}

/// Signs of the level-`m` embedded steps and the real-time gaps between
/// consecutive crossings, `n` of each.
pub fn signs_and_gaps(cfg: &ExperimentConfig, key: u64) -> Result<(Vec<i8>, Vec<u64>)> {
    let clock = cfg.clock()?;
    let level = Level::new(indep_level(cfg));
    let n = cfg.indep_crossings;
    let spec = cfg.generator.with_seed(key);
    let inst = assemble_martingale(&spec, clock, Coverage::Crossings { level, count: n }, WalkSource::Direct)?;
    let s = skorohod_times(&inst.fine_walk, level)?;
    let b = embedded_walk(&inst.fine_walk, &s, level)?;
    let tau = inst.crossing_times(level)?;
    let signs = b.values.step_signs()[..n].to_vec();
    let gaps = tau.gaps()[..n].to_vec();
    Ok((signs, gaps))
}

/// E7: permutation test per replication; rejection rate against size or power.
pub fn run_indep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let results = run_reps(cfg, |rep| {
        let key = replication_key(cfg.seed, rep as u64);
        let (signs, gaps) = signs_and_gaps(cfg, key)?;
        // permutations only need speed; the seed still comes from the shuffle stream
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(stream(key, Stream::Shuffle).next_u64());
        independence_test(&signs, &gaps, cfg.shuffles, cfg.statistic, &mut rng)
    })?;
    let mut report = ExperimentReport::new("indep", cfg);
    let p_values: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let rejections = p_values.iter().filter(|&&p| p < cfg.alpha).count();
    let rate = rejections as f64 / cfg.reps as f64;
    let expect_reject = matches!(cfg.generator.kind, GeneratorKind::SignDependent { .. });
    let level = indep_level(cfg);
    for (rep, r) in results.iter().enumerate() {
        report.records.push(Record {
            exp_id: "E7",
            m: level,
            rep,
            sup_error: r.statistic,
            envelope: None,
            violated: r.p_value < cfg.alpha,
            seed: replication_key(cfg.seed, rep as u64),
        });
    }
    let band = (!expect_reject).then(|| binomial_band(cfg.reps as u64, cfg.alpha, 0.99));
    if let Some((lo, hi)) = band {
        report.verdict(
            format!("E7 size at alpha {} ({})", cfg.alpha, cfg.generator.label()),
            (lo..=hi).contains(&(rejections as u64)),
            format!("{rejections} / {} rejections, 99% band [{lo}, {hi}]", cfg.reps),
        );
    } else {
        report.verdict(
            format!("E7 power >= 0.95 at alpha {} ({})", cfg.alpha, cfg.generator.label()),
            rate >= 0.95,
            format!("{rejections} / {} rejections", cfg.reps),
        );
    }
    report.independence = Some(IndepSummary {
        generator: cfg.generator.label().into(),
        level,
        crossings: cfg.indep_crossings,
        shuffles: cfg.shuffles,
        alpha: cfg.alpha,
        statistic: cfg.statistic,
        reps: cfg.reps,
        rejections,
        rate,
        expect_reject,
        band,
        p_values,
    });
    Ok(report)
}

// ------------------------------------------------------ exact suite

/// E9 over the nested family and every generator kind; the first failure
/// aborts with its reproduction data.
pub fn run_exact_suite(cfg: &ExperimentConfig) -> Result<Vec<ExactCheck>> {
    cfg.validate()?;
    let clock = cfg.clock()?;
    let generators = [
        cfg.generator.clone(),
        crate::config::parse_generator("g1")?,
        crate::config::parse_generator("g2")?,
        crate::config::parse_generator("g3")?,
        crate::config::parse_generator("g4")?,
    ];
    let tallies = run_reps(cfg, |rep| {
        let key = replication_key(cfg.seed, rep as u64);
        let mut tally = Tally::default();
        let ext = cfg.horizon.scaled(3, 1).expect("horizon fits");
        let family = build_nested(key, Level::new(cfg.m_fine), ext)?;
        exact_family(&family, &clock, key, rep, &mut tally)?;
        for g in &generators[1..] {
            let mut c = cfg.clone();
            c.generator = g.clone();
            let inst = assemble_covering(&c, &clock, key)?;
            exact_martingale(&c, &inst, key, rep, &mut tally)?;
        }
        Ok(tally)
    })?;
    let mut total = Tally::default();
    for t in &tallies {
        total.add(t);
    }
    Ok(total.checks())
}

// ------------------------------------------------------ bounds

/// Every bound over the configured levels at `(K, C)`.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new("bounds", cfg);
    let k = cfg.horizon.to_f64();
    let a = martingale_scale(cfg);
    for t in TheoremId::ALL {
        for m in cfg.levels() {
            let mut q = BoundQuery::new(t, k, m, cfg.c_const);
            if t.is_martingale() {
                q = q.with_a(a);
            }
            let r = eval_bound(&q)?;
            report.bounds.push(BoundRow {
                theorem: t.name().into(),
                m,
                k,
                c: cfg.c_const,
                a: t.is_martingale().then_some(a),
                envelope: r.envelope,
                probability: r.probability,
                clamped: r.clamped,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_counts() {
        assert_eq!(steps_within(Dyadic::ONE, 3), 64);
        assert_eq!(steps_within(Dyadic::new(3, 1), 0), 1);
        assert_eq!(steps_covering(Dyadic::new(3, 1), 0).unwrap(), 2);
    }

    #[test]
    fn pl_at_interpolates() {
        let p = PlPath::new(vec![0, 4, 8], vec![0, 8, 0], 1).unwrap();
        assert_eq!(pl_at(&p, 2), Ratio::from_int(2));
        assert_eq!(pl_at(&p, 4), Ratio::from_int(4));
        assert_eq!(pl_at(&p, 7), Ratio::from_int(1));
        assert_eq!(pl_at(&p, 8), Ratio::ZERO);
    }
}
