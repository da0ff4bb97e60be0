//! Acceptance suite at desk scale: one PASS/FAIL line per criterion.
//!
//! Exact identities, envelope accounting, the Hoeffding cross-check and
//! determinism are hard assertions. Rate fits and the independence
//! dichotomy are empirical calibrations: their outcome is printed as-is and
//! does not fail the test run.

use nestwalk::config::parse_generator;
use nestwalk::experiments::{run_approx, run_construct, run_exact_suite, run_indep, run_qvar};
use nestwalk::{ExperimentConfig, ExperimentReport};
use nestwalk_core::bounds::hoeffding_tail;
use nestwalk_core::rng::{CoinStream, Stream};

struct Line {
    id: &'static str,
    pass: bool,
    hard: bool,
}

fn report_line(lines: &mut Vec<Line>, id: &'static str, pass: bool, hard: bool, what: &str, detail: String) {
    println!("{} [{id}] {what} — {detail}", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, pass, hard });
}

fn desk() -> ExperimentConfig {
    ExperimentConfig {
        reps: 50,
        ..ExperimentConfig::default()
    }
}

fn with_gen(cfg: &ExperimentConfig, g: &str) -> ExperimentConfig {
    ExperimentConfig {
        generator: parse_generator(g).unwrap(),
        ..cfg.clone()
    }
}

fn verdict<'a>(r: &'a ExperimentReport, prefix: &str) -> (bool, &'a str) {
    let v = r
        .verdicts
        .iter()
        .find(|v| v.name.starts_with(prefix))
        .unwrap_or_else(|| panic!("no verdict `{prefix}` in {}", r.command));
    (v.pass, &v.detail)
}

fn slope(r: &ExperimentReport, id: &str) -> (bool, String) {
    let f = r.fit(id).expect("fit present");
    (f.pass, format!("{:+.4} over m = {:?}", f.fit.slope, f.levels))
}

fn determinism(cfg: &ExperimentConfig, run: fn(&ExperimentConfig) -> nestwalk::Result<ExperimentReport>) -> bool {
    let bodies: Vec<(String, String)> = [1, 3]
        .iter()
        .map(|&jobs| {
            let c = ExperimentConfig { jobs, ..cfg.clone() };
            let a = run(&c).unwrap();
            let b = run(&c).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            (a.to_json().unwrap(), a.to_csv().unwrap())
        })
        .collect();
    bodies[0] == bodies[1]
}

fn main() {
    let mut lines = Vec::new();
    let cfg = desk();

    // 1
    let checks = run_exact_suite(&cfg).expect("exact identities hold");
    let total: u64 = checks.iter().map(|c| c.checked).sum();
    let kinds: Vec<&str> = checks.iter().map(|c| c.name).collect();
    report_line(
        &mut lines,
        "1",
        kinds.len() == 6,
        true,
        "exact identities, nested family and G1-G4",
        format!("{total} checks over {} replications: {kinds:?}", cfg.reps),
    );

    // 2 and 5
    let construct = run_construct(&cfg).unwrap();
    let (p2a, d2a) = verdict(&construct, "E2 envelope");
    let (p2b, d2b) = verdict(&construct, "E3 envelope");
    report_line(
        &mut lines,
        "2",
        p2a && p2b,
        true,
        "path envelopes at C = 3, m >= 6",
        format!("tilde: {d2a}; embedded: {d2b}"),
    );
    let (p5, d5) = verdict(&construct, "E3s envelope");
    report_line(&mut lines, "5", p5, true, "Skorohod time envelope at C = 3, m >= 6", d5.to_string());

    // 3
    for g in ["g1", "g3"] {
        let r = run_qvar(&with_gen(&cfg, g)).unwrap();
        let (pass, detail) = slope(&r, "E5");
        report_line(&mut lines, "3", pass, false, &format!("{g} qvar slope in [-1.15, -0.85]"), detail);
        // consecutive medians against 2^-1 sqrt((m+1)/m), within a factor 1.6
        let ratios: Vec<f64> = (4..6)
            .map(|m| {
                let (a, b) = (r.level("E5", m).unwrap(), r.level("E5", m + 1).unwrap());
                b.spread.median / a.spread.median / (0.5 * ((m + 1) as f64 / m as f64).sqrt())
            })
            .collect();
        report_line(
            &mut lines,
            "3",
            ratios.iter().all(|&q| (1.0 / 1.6..=1.6).contains(&q)),
            false,
            &format!("{g} qvar median ratios per level near the rate"),
            format!("{ratios:.3?}"),
        );
    }

    // 4
    for g in ["g1", "g2", "g3", "g4"] {
        let r = run_approx(&with_gen(&cfg, g)).unwrap();
        let (pa, da) = slope(&r, "E6a");
        let (pb, db) = slope(&r, "E6b");
        report_line(&mut lines, "4", pa, false, &format!("{g} sup|M - B_m(<M>)| slope in [-0.75, -0.35]"), da);
        report_line(&mut lines, "4", pb, false, &format!("{g} sup|M - B_m(N_m)| slope in [-0.75, -0.35]"), db);
        let (pt, dt) = verdict(&r, "E6t");
        report_line(&mut lines, "4", pt, true, &format!("{g} triangle sanity per replication"), dt.to_string());
    }

    // 6
    let indep = ExperimentConfig { reps: 200, ..cfg.clone() };
    for g in ["g3", "g4"] {
        let r = run_indep(&with_gen(&indep, g)).unwrap();
        let (pass, detail) = verdict(&r, "E7");
        let what = if g == "g3" { "g3 size at alpha 0.01" } else { "g4 power >= 0.95 at alpha 0.01" };
        report_line(&mut lines, "6", pass, false, what, detail.to_string());
    }

    // 7
    let mut coins = CoinStream::new(7, Stream::Probe);
    let samples = 100_000;
    let hits = (0..samples)
        .filter(|_| (0..100).map(|_| coins.next_step() as i32).sum::<i32>().abs() >= 20)
        .count();
    let p = hits as f64 / samples as f64;
    report_line(
        &mut lines,
        "7",
        p <= hoeffding_tail(2.0),
        true,
        "P(|S_100| >= 20) below 2e^-2",
        format!("empirical {p:.5} vs {:.5}", hoeffding_tail(2.0)),
    );

    // 8
    let small = ExperimentConfig {
        reps: 4,
        m_fine: 8,
        levels: Some((3, 4)),
        ..cfg.clone()
    };
    let indep_small = ExperimentConfig {
        shuffles: 500,
        ..small.clone()
    };
    let same = determinism(&small, run_construct)
        && determinism(&with_gen(&small, "g4"), run_approx)
        && determinism(&with_gen(&small, "g2"), run_qvar)
        && determinism(&with_gen(&indep_small, "g3"), run_indep);
    report_line(
        &mut lines,
        "8",
        same,
        true,
        "byte-identical JSON/CSV across reruns and --jobs 1/3",
        "construct, qvar, approx, indep".into(),
    );

    let hard_failures: Vec<&str> = lines.iter().filter(|l| l.hard && !l.pass).map(|l| l.id).collect();
    let soft_failures = lines.iter().filter(|l| !l.hard && !l.pass).count();
    println!(
        "acceptance: {} lines, {} hard failure(s), {soft_failures} empirical criterion line(s) outside tolerance",
        lines.len(),
        hard_failures.len()
    );
    if !hard_failures.is_empty() {
        eprintln!("criteria failed: {hard_failures:?}");
        std::process::exit(1);
    }
}
