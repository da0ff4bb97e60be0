//! Experiment reports and their JSON / CSV / text renderings.
//!
//! Reports carry no wall-clock data and no worker count, so a rerun with the
//! same configuration renders byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{describe_generator, ExperimentConfig, Format};
use crate::error::{HarnessError, Result};
use crate::indep::Statistic;
use crate::stats::{KsResult, Normalizer, RateFit, Spread};

/// One `(experiment, level, replication)` measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub exp_id: &'static str,
    pub m: u32,
    pub rep: usize,
    pub sup_error: f64,
    pub envelope: Option<f64>,
    pub violated: bool,
    /// Key of the replication's random streams.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub exp_id: &'static str,
    pub m: u32,
    pub spread: Spread,
    /// Theorem envelope, when the envelope does not vary per replication.
    pub envelope: Option<f64>,
    pub probability: Option<f64>,
    pub clamped: bool,
    pub violations: usize,
    /// Whether violations at this level count against the verdict.
    pub strict: bool,
    /// Median divided by `c_m` times the theorem's rate shape, `c_m = log2(m + 2)`.
    pub scaled_median: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub exp_id: &'static str,
    pub normalizer: Normalizer,
    pub levels: Vec<u32>,
    pub fit: RateFit,
    pub expected: f64,
    pub accept: (f64, f64),
    pub pass: bool,
    /// Whether the fit enters the verdicts.
    pub gated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactCheck {
    pub name: &'static str,
    pub checked: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndepSummary {
    pub generator: String,
    pub level: u32,
    pub crossings: usize,
    pub shuffles: usize,
    pub alpha: f64,
    pub statistic: Statistic,
    pub reps: usize,
    pub rejections: usize,
    pub rate: f64,
    pub expect_reject: bool,
    /// Acceptance band for the rejection count under independence.
    pub band: Option<(u64, u64)>,
    pub p_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussSummary {
    pub samples: usize,
    pub variance: f64,
    pub ks: KsResult,
    pub clock_seed_invariant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub theorem: String,
    pub m: u32,
    pub k: f64,
    pub c: f64,
    pub a: Option<f64>,
    pub envelope: f64,
    pub probability: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub m_fine: u32,
    pub levels: Vec<u32>,
    pub horizon: String,
    pub reps: usize,
    pub generator: String,
    pub c_const: f64,
    pub ticks_per_step: u64,
    pub strict_from: u32,
    pub source: String,
}

impl ConfigEcho {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        ConfigEcho {
            seed: cfg.seed,
            m_fine: cfg.m_fine,
            levels: cfg.levels(),
            horizon: cfg.horizon.to_string(),
            reps: cfg.reps,
            generator: describe_generator(&cfg.generator),
            c_const: cfg.c_const,
            ticks_per_step: cfg.ticks_per_step,
            strict_from: cfg.strict_from,
            source: format!("{:?}", cfg.source).to_lowercase(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub command: &'static str,
    pub config: ConfigEcho,
    pub exact: Vec<ExactCheck>,
    pub levels: Vec<LevelSummary>,
    pub fits: Vec<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub independence: Option<IndepSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundRow>,
    pub verdicts: Vec<Verdict>,
    pub records: Vec<Record>,
}

impl ExperimentReport {
    pub fn new(command: &'static str, cfg: &ExperimentConfig) -> Self {
        ExperimentReport {
            command,
            config: ConfigEcho::new(cfg),
            exact: Vec::new(),
            levels: Vec::new(),
            fits: Vec::new(),
            independence: None,
            gaussian: None,
            bounds: Vec::new(),
            verdicts: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn level(&self, exp_id: &str, m: u32) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.exp_id == exp_id && l.m == m)
    }

    pub fn fit(&self, exp_id: &str) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.exp_id == exp_id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Measurement rows, or the bound table for the `bounds` command.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| HarnessError::Format(e.to_string());
        if self.command == "bounds" {
            w.write_record(["theorem", "m", "K", "C", "a", "envelope", "probability", "clamped"])
                .map_err(err)?;
            for b in &self.bounds {
                w.write_record([
                    b.theorem.clone(),
                    b.m.to_string(),
                    b.k.to_string(),
                    b.c.to_string(),
                    b.a.map(|a| a.to_string()).unwrap_or_default(),
                    b.envelope.to_string(),
                    b.probability.to_string(),
                    b.clamped.to_string(),
                ])
                .map_err(err)?;
            }
        } else {
            for r in &self.records {
                w.serialize(r).map_err(err)?;
            }
            if self.records.is_empty() {
                w.write_record(["exp_id", "m", "rep", "sup_error", "envelope", "violated", "seed"])
                    .map_err(err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Format(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "== {} ==", self.command);
        let _ = writeln!(
            s,
            "seed {} | m_fine {} | levels {:?} | K {} | reps {} | generator {} | C {}",
            c.seed, c.m_fine, c.levels, c.horizon, c.reps, c.generator, c.c_const
        );
        if !self.exact.is_empty() {
            let _ = writeln!(s, "\nexact identities (all hold):");
            for e in &self.exact {
                let _ = writeln!(s, "  {:<28} {:>12} checks", e.name, e.checked);
            }
        }
        if !self.levels.is_empty() {
            let _ = writeln!(
                s,
                "\n{:<6} {:>3} {:>12} {:>12} {:>12} {:>12} {:>10} {:>6}",
                "exp", "m", "min", "median", "max", "envelope", "prob", "viol"
            );
            for l in &self.levels {
                let env = l.envelope.map(|e| format!("{e:.6}")).unwrap_or_else(|| "-".into());
                let prob = l.probability.map(|p| format!("{p:.2e}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "{:<6} {:>3} {:>12.6} {:>12.6} {:>12.6} {:>12} {:>10} {:>5}{}",
                    l.exp_id,
                    l.m,
                    l.spread.min,
                    l.spread.median,
                    l.spread.max,
                    env,
                    prob,
                    l.violations,
                    if l.strict { "" } else { "*" }
                );
            }
            let _ = writeln!(s, "(* informational level)");
        }
        if !self.fits.is_empty() {
            let _ = writeln!(s, "\nrate fits:");
            for f in &self.fits {
                let _ = writeln!(
                    s,
                    "  {:<5} slope {:+.4} [{:+.3}, {:+.3}] intercept {:+.4} residual {:.4} | expected {:+.2}, accept [{:+.2}, {:+.2}] {}",
                    f.exp_id,
                    f.fit.slope,
                    f.fit.band.0,
                    f.fit.band.1,
                    f.fit.intercept,
                    f.fit.residual,
                    f.expected,
                    f.accept.0,
                    f.accept.1,
                    if !f.gated { "(informational)" } else if f.pass { "ok" } else { "OUT" }
                );
            }
        }
        if let Some(i) = &self.independence {
            let _ = writeln!(
                s,
                "\nindependence ({}, level {}, n = {}, {} shuffles): {} / {} rejections at alpha {} (rate {:.3})",
                i.generator, i.level, i.crossings, i.shuffles, i.rejections, i.reps, i.alpha, i.rate
            );
            if let Some((lo, hi)) = i.band {
                let _ = writeln!(s, "  band under independence: [{lo}, {hi}]");
            }
        }
        if let Some(g) = &self.gaussian {
            let _ = writeln!(
                s,
                "\nGaussianity of M(K): KS D = {:.4}, p = {:.4} over {} samples; clock seed-invariant: {}",
                g.ks.statistic, g.ks.p_value, g.samples, g.clock_seed_invariant
            );
        }
        if !self.bounds.is_empty() {
            let _ = writeln!(s, "\n{:<11} {:>3} {:>14} {:>12}", "theorem", "m", "envelope", "probability");
            for b in &self.bounds {
                let _ = writeln!(
                    s,
                    "{:<11} {:>3} {:>14.6e} {:>12.3e}{}",
                    b.theorem,
                    b.m,
                    b.envelope,
                    b.probability,
                    if b.clamped { " (clamped)" } else { "" }
                );
            }
        }
        if !self.verdicts.is_empty() {
            let _ = writeln!(s, "\nverdicts:");
            for v in &self.verdicts {
                let _ = writeln!(s, "  [{}] {} — {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
        }
        s
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Text => Ok(self.to_text()),
        }
    }

    /// Writes `<dir>/<command>.<ext>`; returns the path.
    pub fn emit(&self, format: Format, dir: &Path) -> Result<PathBuf> {
        if self.command != "bounds" && self.config.reps == 0 {
            return Err(HarnessError::Validation("report has no replications".into()));
        }
        let body = self.render(format)?;
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let ext = match format {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "txt",
        };
        let path = dir.join(format!("{}.{ext}", self.command));
        fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}
