use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn adf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adf")).args(args).output().expect("spawn adf")
}

fn ok(args: &[&str]) -> Output {
    let o = adf(args);
    assert!(
        o.status.success(),
        "adf {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&[
        "synth", "--flights", "6", "--duration", "600", "--points", "3000", "--seed", seed, "--out", s(dir),
    ]);
}

#[test]
fn full_pipeline() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "5");
    let traj = d.join("trajectories.jsonl");
    let pts = d.join("points.csv");
    let base = d.join("baseline.csv");
    let idx = d.join("index.bin");
    let ext = d.join("extract.csv");

    ok(&["baseline-pois", "--trajectories", s(&traj), "--out", s(&base)]);
    let b = fs::read_to_string(&base).unwrap();
    assert!(b.lines().count() > 1, "{b}");

    ok(&["build-index", "--points", s(&pts), "--out", s(&idx)]);
    ok(&[
        "extract-pois", "--trajectories", s(&traj), "--points", s(&pts), "--index", s(&idx), "--out", s(&ext),
    ]);
    let e = fs::read_to_string(&ext).unwrap();
    let rows: Vec<&str> = e.lines().skip(1).collect();
    assert_eq!(rows.len(), 6 * 600);
    let flagged = rows.iter().filter(|r| r.ends_with(",1")).count();
    assert_eq!(flagged, 6 * 150);

    let o = ok(&["evaluate", "--baseline", s(&base), "--candidate", s(&ext), "--threshold", "200"]);
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("threshold_m\tmatched"));
    let cols: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(cols.len(), 7);
    assert_eq!(cols[0], "200");

    let o = ok(&["evaluate", "--baseline", s(&d.join("onsets.csv")), "--candidate", s(&base)]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 10);
}

#[test]
fn snapshot_reload_matches_fresh_index() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "2");
    let pts = d.join("points.csv");
    let idx = d.join("index.bin");
    ok(&["--seed", "9", "build-index", "--points", s(&pts), "--out", s(&idx)]);
    let reloaded = ok(&["--seed", "9", "eval-field", "--points", s(&pts), "--index", s(&idx)]).stdout;
    let fresh = ok(&["--seed", "9", "eval-field", "--points", s(&pts)]).stdout;
    assert_eq!(reloaded, fresh);

    let traj = d.join("trajectories.jsonl");
    let a = ok(&["--seed", "9", "extract-pois", "--trajectories", s(&traj), "--points", s(&pts), "--index", s(&idx)]);
    let b = ok(&["--seed", "9", "extract-pois", "--trajectories", s(&traj), "--points", s(&pts)]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn index_from_other_points_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let (d1, d2) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&d1, "1");
    synth(&d2, "2");
    let idx = tmp.path().join("index.bin");
    ok(&["build-index", "--points", s(&d1.join("points.csv")), "--out", s(&idx)]);
    let o = adf(&["eval-field", "--points", s(&d2.join("points.csv")), "--index", s(&idx)]);
    assert_eq!(o.status.code(), Some(3));
}

const POI_HEADER: &str = "flight_id,point_index,lon_deg,lat_deg,alt_m,score\n";

#[test]
fn evaluate_micro_fixture() {
    // Along the equator 0.001 deg of longitude is about 111.3 m.
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, format!("{POI_HEADER}a,0,0,0,0,1\na,1,0.01,0,0,1\na,2,0.02,0,0,1\n")).unwrap();
    fs::write(&b, format!("{POI_HEADER}b,0,0.001,0,0,1\nb,1,0.0115,0,0,1\nb,2,0.05,0,0,1\n")).unwrap();

    let o = ok(&["evaluate", "--baseline", s(&a), "--candidate", s(&b), "--threshold", "150"]);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().nth(1).unwrap(), "150\t1\t2\t2\t33.33\t33.33\t33.33");

    let o = ok(&["evaluate", "--baseline", s(&a), "--candidate", s(&b), "--threshold", "200"]);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().nth(1).unwrap(), "200\t2\t1\t1\t66.67\t66.67\t66.67");
}

#[test]
fn outputs_are_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (d1, d2) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&d1, "4");
    synth(&d2, "4");
    for f in ["trajectories.jsonl", "points.csv", "onsets.csv"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let run = |d: &Path| {
        ok(&[
            "extract-pois",
            "--trajectories",
            s(&d.join("trajectories.jsonl")),
            "--points",
            s(&d.join("points.csv")),
        ])
        .stdout
    };
    assert_eq!(run(&d1), run(&d2));
}

fn row(id: &str, t: f64, lon: f64) -> String {
    format!("{{\"flight_id\":\"{id}\",\"t\":{t},\"lon\":{lon},\"lat\":30.0,\"alt\":3000.0}}\n")
}

#[test]
fn non_monotone_flight_is_skipped_with_warning() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("t.jsonl");
    let mut text = String::new();
    for i in 0..40 {
        text += &row("GOOD", i as f64, 104.0 + 0.001 * i as f64);
    }
    for (i, t) in [0.0, 1.0, 2.0, 1.5, 3.0, 4.0, 5.0, 6.0].iter().enumerate() {
        text += &row("BAD", *t, 104.0 + 0.001 * i as f64);
    }
    fs::write(&p, text).unwrap();
    let o = ok(&["baseline-pois", "--trajectories", s(&p)]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("skipped flight BAD"), "{err}");
    assert!(err.contains("ingested 1 flights from 48 rows; skipped 1"), "{err}");
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(!out.contains("BAD"));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.csv");
    assert_eq!(adf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(adf(&["evaluate", "--baseline", "x"]).status.code(), Some(2));
    let o = adf(&["--sigma0=-5", "evaluate", "--baseline", "x", "--candidate", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--sigma0"));
    assert_eq!(
        adf(&["--mode", "fast", "extract-pois", "--trajectories", "x", "--points", "y"]).status.code(),
        Some(2)
    );

    let o = adf(&["evaluate", "--baseline", s(&missing), "--candidate", s(&missing)]);
    assert_eq!(o.status.code(), Some(3));
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "flight_id,point_index,lon_deg,lat_deg,alt_m,score\na,0,1,2\n").unwrap();
    let o = adf(&["evaluate", "--baseline", s(&bad), "--candidate", s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let corrupt = tmp.path().join("index.bin");
    fs::write(&corrupt, b"not an index").unwrap();
    let good = tmp.path().join("p.csv");
    fs::write(&good, format!("{POI_HEADER}a,0,0,0,0,1\na,1,0.01,0,0,1\n")).unwrap();
    let o = adf(&["eval-field", "--points", s(&good), "--index", s(&corrupt)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_reports_speedup() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "3");
    let o = ok(&["bench", "--points", s(&tmp.path().join("points.csv")), "--queries", "200"]);
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4, "{out}");
    assert!(lines[1].starts_with("ivf\t3000\t"));
    assert!(lines[2].starts_with("brute\t3000\t"));
    let ratio: f64 = lines[3].strip_prefix("# speedup\t").unwrap().parse().unwrap();
    assert!(ratio > 0.0);

    let o = ok(&["--mode", "brute", "bench", "--points", s(&tmp.path().join("points.csv"))]);
    assert!(!String::from_utf8(o.stdout).unwrap().contains("speedup"));
}

#[test]
fn ablate_covers_every_setting() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "6");
    let o = ok(&[
        "ablate",
        "--trajectories",
        s(&d.join("trajectories.jsonl")),
        "--points",
        s(&d.join("points.csv")),
    ]);
    let out = String::from_utf8(o.stdout).unwrap();
    let sweeps: Vec<&str> = out.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    let count = |k: &str| sweeps.iter().filter(|s| **s == k).count();
    assert_eq!(count("bandwidth"), 4);
    assert_eq!(count("nprobe"), 5);
    assert_eq!(count("k"), 3);
    assert_eq!(count("knn"), 1);
}
