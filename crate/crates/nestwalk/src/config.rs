//! Experiment configuration and the flat `key = value` config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nestwalk_core::{Dyadic, GeneratorKind, GeneratorSpec, Level, MicroClock, QvMap, Ratio, WalkSource};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::indep::Statistic;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Text,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(HarnessError::Usage(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub m_fine: u32,
    /// Inclusive level range; `None` means `3..=m_fine-4`.
    pub levels: Option<(u32, u32)>,
    pub horizon: Dyadic,
    pub reps: usize,
    /// Generator with a placeholder seed; replications reseed it.
    pub generator: GeneratorSpec,
    pub c_const: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
    pub ticks_per_step: u64,
    /// Bound checks below this level are informational.
    pub strict_from: u32,
    pub source: WalkSource,
    pub indep_crossings: usize,
    pub shuffles: usize,
    pub alpha: f64,
    pub statistic: Statistic,
    /// Random intrinsic times probed per replication for `<M>_{T_s} = s`.
    pub duality_probes: usize,
    pub export_stops: bool,
    pub dump: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            m_fine: 10,
            levels: None,
            horizon: Dyadic::ONE,
            reps: 50,
            generator: GeneratorSpec::g1(0),
            c_const: 3.0,
            out: None,
            format: Format::Text,
            jobs: 1,
            ticks_per_step: 4,
            strict_from: 6,
            source: WalkSource::Direct,
            // smallest power of two reaching 0.95 power against g4 in pilots
            indep_crossings: 1 << 14,
            shuffles: 10_000,
            alpha: 0.01,
            statistic: Statistic::WithLevel,
            duality_probes: 100,
            export_stops: false,
            dump: None,
        }
    }
}

impl ExperimentConfig {
    pub fn level_range(&self) -> (u32, u32) {
        self.levels
            .unwrap_or((3.min(self.m_fine), self.m_fine.saturating_sub(4).max(3.min(self.m_fine))))
    }

    pub fn levels(&self) -> Vec<u32> {
        let (a, b) = self.level_range();
        (a..=b).collect()
    }

    pub fn clock(&self) -> Result<MicroClock> {
        Ok(MicroClock::new(Level::new(self.m_fine), self.ticks_per_step)?)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |s: &str| Err(HarnessError::Usage(s.into()));
        if self.m_fine == 0 || self.m_fine > nestwalk_core::dyadic::MAX_LEVEL {
            return usage("m_fine must lie in 1..=26");
        }
        let (a, b) = self.level_range();
        if a > b || b >= self.m_fine {
            return usage("levels must satisfy a <= b < m_fine");
        }
        if self.horizon.num == 0 {
            return usage("horizon must be positive");
        }
        if self.reps == 0 {
            return Err(HarnessError::Validation("at least one replication is required".into()));
        }
        if !(self.c_const > 1.0) {
            return usage("C must exceed 1");
        }
        if self.jobs == 0 {
            return usage("jobs must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return usage("alpha must lie in (0, 1)");
        }
        self.clock()?.horizon_ticks(self.horizon)?;
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| HarnessError::Usage(format!("invalid value `{value}` for {what}"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "m_fine" | "m-fine" => self.m_fine = value.parse().map_err(|_| bad(key))?,
            "levels" => self.levels = Some(parse_levels(value)?),
            "horizon" => self.horizon = value.parse().map_err(|_| bad(key))?,
            "reps" => self.reps = value.parse().map_err(|_| bad(key))?,
            "gen" => self.generator = parse_generator(value)?,
            "g2_map" => set_map(&mut self.generator, value)?,
            "g3_durations" | "g3_p" | "g4_durations" => set_param(&mut self.generator, key, value)?,
            "c_const" | "c-const" | "c" => self.c_const = value.parse().map_err(|_| bad(key))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "jobs" => self.jobs = value.parse().map_err(|_| bad(key))?,
            "ticks_per_step" => self.ticks_per_step = value.parse().map_err(|_| bad(key))?,
            "strict_from" => self.strict_from = value.parse().map_err(|_| bad(key))?,
            "source" => {
                self.source = match value {
                    "direct" => WalkSource::Direct,
                    "twist" => WalkSource::TwistShrink,
                    _ => return Err(bad(key)),
                }
            }
            "indep_crossings" => self.indep_crossings = value.parse().map_err(|_| bad(key))?,
            "shuffles" => self.shuffles = value.parse().map_err(|_| bad(key))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad(key))?,
            "statistic" => {
                self.statistic = match value {
                    "lagged" => Statistic::Lagged,
                    "with_level" => Statistic::WithLevel,
                    _ => return Err(bad(key)),
                }
            }
            "duality_probes" => self.duality_probes = value.parse().map_err(|_| bad(key))?,
            "export_stops" => self.export_stops = value.parse().map_err(|_| bad(key))?,
            "dump" => self.dump = Some(PathBuf::from(value)),
            _ => return Err(HarnessError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file; `#` starts a comment.
    pub fn load(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        // `gen` first so generator parameters can appear in any order
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            entries.push((k.trim().to_string(), v.trim().trim_matches('"').to_string()));
        }
        entries.sort_by_key(|(k, _)| k != "gen");
        for (k, v) in entries {
            self.set(&k, &v)?;
        }
        Ok(())
    }
}

/// `a..b` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<(u32, u32)> {
    let bad = || HarnessError::Usage(format!("invalid level range `{s}`"));
    match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        }
        None => {
            let m = s.trim().parse().map_err(|_| bad())?;
            Ok((m, m))
        }
    }
}

pub fn parse_generator(s: &str) -> Result<GeneratorSpec> {
    match s.to_ascii_lowercase().as_str() {
        "g1" => Ok(GeneratorSpec::g1(0)),
        "g2" => Ok(GeneratorSpec::g2(0, QvMap::half_speed())),
        "g3" => Ok(GeneratorSpec::g3(0)),
        "g4" => Ok(GeneratorSpec::g4(0)),
        _ => Err(HarnessError::Usage(format!("unknown generator `{s}`"))),
    }
}

fn parse_ratio(s: &str) -> Result<Ratio> {
    let bad = || HarnessError::Usage(format!("invalid rational `{s}`"));
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: i128 = n.trim().parse().map_err(|_| bad())?;
    let d: i128 = d.trim().parse().map_err(|_| bad())?;
    if d <= 0 {
        return Err(bad());
    }
    Ok(Ratio::new(n, d))
}

/// `t0:f0,t1:f1,...` with rational entries, e.g. `0:0,1:1/2`.
pub fn parse_map(s: &str) -> Result<QvMap> {
    let points = s
        .split(',')
        .map(|p| {
            let (t, f) = p
                .split_once(':')
                .ok_or_else(|| HarnessError::Usage(format!("map point `{p}` is not t:f")))?;
            Ok((parse_ratio(t)?, parse_ratio(f)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QvMap::new(points)?)
}

fn set_map(g: &mut GeneratorSpec, value: &str) -> Result<()> {
    match &mut g.kind {
        GeneratorKind::Deterministic { map } => {
            *map = parse_map(value)?;
            Ok(())
        }
        _ => Err(HarnessError::Usage("g2_map needs gen = g2".into())),
    }
}

fn set_param(g: &mut GeneratorSpec, key: &str, value: &str) -> Result<()> {
    let bad = || HarnessError::Usage(format!("invalid value `{value}` for {key}"));
    match (&mut g.kind, key) {
        (
            GeneratorKind::Independent {
                short_halves,
                long_halves,
                ..
            },
            "g3_durations",
        ) => {
            // two multiples of U, each a whole number of halves
            let (a, b) = value.split_once(',').ok_or_else(bad)?;
            let halves = |x: &str| -> Result<u64> {
                let r = parse_ratio(x)? * Ratio::from_int(2);
                if !r.is_integer() || r <= Ratio::ZERO {
                    return Err(bad());
                }
                Ok(r.numer() as u64)
            };
            *short_halves = halves(a)?;
            *long_halves = halves(b)?;
        }
        (GeneratorKind::Independent { p_short, .. }, "g3_p") => {
            *p_short = value.parse().map_err(|_| bad())?;
        }
        (GeneratorKind::SignDependent { above, below }, "g4_durations") => {
            let (a, b) = value.split_once(',').ok_or_else(bad)?;
            *above = a.trim().parse().map_err(|_| bad())?;
            *below = b.trim().parse().map_err(|_| bad())?;
        }
        _ => {
            return Err(HarnessError::Usage(format!(
                "{key} does not apply to generator {}",
                g.label()
            )))
        }
    }
    Ok(())
}

/// Compact description for report headers.
pub fn describe_generator(g: &GeneratorSpec) -> String {
    match &g.kind {
        GeneratorKind::Bm => "g1".into(),
        GeneratorKind::Deterministic { map } => {
            let pts: Vec<String> = map.points().iter().map(|(t, f)| format!("{t}:{f}")).collect();
            format!("g2 map={}", pts.join(","))
        }
        GeneratorKind::Independent {
            short_halves,
            long_halves,
            p_short,
        } => format!("g3 durations={short_halves}/2,{long_halves}/2 p={p_short}"),
        GeneratorKind::SignDependent { above, below } => format!("g4 durations={above},{below}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let mut c = ExperimentConfig::default();
        c.apply_text(
            "# profile\nseed = 7\nm_fine = 8\nlevels = 3..4\nhorizon = 1/2^1\ng2_map = 0:0,1:3/4\ngen = g2\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.levels(), vec![3, 4]);
        assert_eq!(c.horizon, Dyadic::new(1, 1));
        assert_eq!(describe_generator(&c.generator), "g2 map=0:0,1:3/4");
        c.validate().unwrap();
    }

    #[test]
    fn bad_inputs() {
        let mut c = ExperimentConfig::default();
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("gen", "g9").is_err());
        assert!(c.set("g4_durations", "1,2").is_err());
        assert!(c.apply_text("seed 3").is_err());
        c.c_const = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_levels() {
        let c = ExperimentConfig::default();
        assert_eq!(c.levels(), vec![3, 4, 5, 6]);
    }
}
