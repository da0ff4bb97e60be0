use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nestwalk::dump::Dump;

fn nestwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestwalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &[&str] = &["--m-fine", "7", "--levels", "3..3", "--reps", "3"];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    nestwalk(&refs)
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(nestwalk(&["qvar", "--gen", "g9"]).status.code(), Some(2));
    assert_eq!(nestwalk(&["qvar", "--c-const", "1"]).status.code(), Some(2));
    assert_eq!(nestwalk(&["nonsense"]).status.code(), Some(2));
    assert_eq!(nestwalk(&["construct", "--levels", "5..9", "--m-fine", "8"]).status.code(), Some(2));
}

#[test]
fn empty_replication_set_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = nestwalk(&["qvar", "--reps", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("sub");
    let o = run(&with(&["bounds"], &["--out", out.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn csv_has_one_row_per_experiment_level_and_replication() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases = [("construct", 7), ("qvar", 1), ("approx", 4)];
    for (cmd, exps) in cases {
        let o = nestwalk(&[cmd, "--m-fine", "7", "--levels", "3..4", "--reps", "3", "--format", "csv", "--out", out]);
        assert!(o.status.code().is_some_and(|c| c <= 1), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(Path::new(out).join(format!("{cmd}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "exp_id,m,rep,sup_error,envelope,violated,seed");
        assert_eq!(lines.count(), exps * 2 * 3, "{cmd}");
    }
}

#[test]
fn output_is_identical_across_worker_counts() {
    for cmd in ["construct", "approx", "indep"] {
        let mut bodies = Vec::new();
        for jobs in ["1", "3"] {
            for format in ["json", "csv"] {
                let size: &[&str] = if cmd == "indep" { &["--m-fine", "8", "--reps", "3", "--shuffles", "200"] } else { SMALL };
                let o = run(&with(&[cmd, "--jobs", jobs, "--format", format], size));
                assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
                bodies.push(o.stdout);
            }
        }
        assert_eq!(bodies[0], bodies[2], "{cmd} json");
        assert_eq!(bodies[1], bodies[3], "{cmd} csv");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# small run\nseed = 9\nm_fine = 7\nlevels = 3..4\nreps = 2\ngen = g4\nformat = json\n",
    )
    .unwrap();
    let o = nestwalk(&["qvar", "--config", cfg.to_str().unwrap(), "--reps", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["reps"], 3);
    assert_eq!(v["config"]["m_fine"], 7);
    assert!(v["config"]["generator"].as_str().unwrap().starts_with("g4"));
}

#[test]
fn bounds_table_covers_every_theorem() {
    let o = nestwalk(&["bounds", "--levels", "6..8", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 13 * 3);
    assert!(text.lines().any(|l| l.starts_with("wiener,8,")));
}

#[test]
fn dumps_and_stops_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let dump = dir.path().join("fam.bin");
    let o = run(&with(
        &["construct", "--out", out.to_str().unwrap(), "--dump", dump.to_str().unwrap(), "--export-stops"],
        SMALL,
    ));
    assert!(o.status.code().is_some_and(|c| c <= 1));
    let d = Dump::read(&dump).unwrap();
    assert_eq!(d.m_fine, 7);
    assert_eq!(d.levels.len(), 8);
    let stops = fs::read_to_string(out.join("stops").join("bm_m3_r0.csv")).unwrap();
    assert!(stops.starts_with("k,time_microticks,value_numerator,level\n0,0,0,3\n"));

    let mdump = dir.path().join("g4.bin");
    let o = run(&with(&["qvar", "--gen", "g4", "--dump", mdump.to_str().unwrap()], SMALL));
    assert!(o.status.code().is_some_and(|c| c <= 1));
    let d = Dump::read(&mdump).unwrap();
    let (u, durs) = d.durations.unwrap();
    assert_eq!(u, 4);
    assert_eq!(durs.len(), d.levels[0].1.len());
    assert!(durs.iter().all(|&x| x == 4 || x == 8));
}
