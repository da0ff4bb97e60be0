use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nestwalk::experiments::{run_approx, run_bounds, run_construct, run_indep, run_qvar};
use nestwalk::{ExperimentConfig, ExperimentReport, HarnessError, Result};

#[derive(Parser)]
#[command(name = "nestwalk", version, about = "Nested random-walk approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nested family: time lags, refinement, Wiener and Skorohod approximations (E1-E4)
    Construct(Opts),
    /// Quadratic variation against the crossing-count estimator (E5)
    Qvar(Opts),
    /// Martingale against embedded walks on both clocks (E6)
    Approx(Opts),
    /// Permutation test of signs against inter-crossing gaps (E7)
    Indep(Opts),
    /// Table of every bound over the configured levels
    Bounds(Opts),
    /// Every experiment in turn
    All(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// key = value file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    m_fine: Option<String>,
    /// Inclusive range `a..b`
    #[arg(long)]
    levels: Option<String>,
    /// Dyadic `p/2^q` or integer
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// g1 | g2 | g3 | g4
    #[arg(long)]
    gen: Option<String>,
    #[arg(long)]
    c_const: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// json | csv | text
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    jobs: Option<String>,
    /// Fine walk for martingales: direct | twist
    #[arg(long)]
    source: Option<String>,
    /// Permutations per independence test
    #[arg(long)]
    shuffles: Option<String>,
    /// Crossings per independence test
    #[arg(long)]
    indep_crossings: Option<String>,
    /// Write stopping sequences as CSV under <out>/stops
    #[arg(long)]
    export_stops: bool,
    /// Binary dump of replication 0's walk
    #[arg(long)]
    dump: Option<String>,
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.load(path)?;
        }
        let flags = [
            ("gen", &self.gen),
            ("seed", &self.seed),
            ("m_fine", &self.m_fine),
            ("levels", &self.levels),
            ("horizon", &self.horizon),
            ("reps", &self.reps),
            ("c_const", &self.c_const),
            ("out", &self.out),
            ("format", &self.format),
            ("jobs", &self.jobs),
            ("source", &self.source),
            ("dump", &self.dump),
            ("shuffles", &self.shuffles),
            ("indep_crossings", &self.indep_crossings),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.export_stops {
            cfg.export_stops = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    match &cfg.out {
        Some(dir) => {
            report.emit(cfg.format, dir)?;
        }
        None => {
            let body = report.render(cfg.format)?;
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| HarnessError::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<bool> {
    let (opts, runners): (Opts, Vec<fn(&ExperimentConfig) -> Result<ExperimentReport>>) = match command {
        Command::Construct(o) => (o, vec![run_construct]),
        Command::Qvar(o) => (o, vec![run_qvar]),
        Command::Approx(o) => (o, vec![run_approx]),
        Command::Indep(o) => (o, vec![run_indep]),
        Command::Bounds(o) => (o, vec![run_bounds]),
        Command::All(o) => (o, vec![run_construct, run_qvar, run_approx, run_indep, run_bounds]),
    };
    let cfg = opts.config()?;
    let mut pass = true;
    for run in runners {
        let report = run(&cfg)?;
        pass &= report.passed();
        emit(&cfg, &report)?;
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nestwalk: {e}");
            if let HarnessError::Exact { seed, rep, level, .. } = &e {
                eprintln!("reproduce with replication key {seed} (replication {rep}) at level {level}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
