use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn nhtopo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhtopo"))
        .args(args)
        .current_dir(dir)
        .env_remove("NHTOPO_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn chern_prints_both_parts() {
    let dir = tempfile::tempdir().unwrap();
    let o = nhtopo(&["chern", "--t", "1", "--m", "0.5", "--delta", "0.25", "--grid", "256"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("chern_re,chern_im"));
    let vals: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((vals[0].abs() - 1.0).abs() < 0.02 && vals[1].abs() < 0.02);
}

#[test]
fn flip_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let o = nhtopo(&["flip", "--m", "0.95", "--delta", "0.9", "--locate"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let x: f64 = text.lines().find_map(|l| l.strip_prefix("flip_kx=")).unwrap().parse().unwrap();
    assert!(x > -PI && x < -0.75 * PI, "{x}");
    let o = nhtopo(&["flip", "--m", "1.05", "--delta", "0.9", "--locate"], dir.path());
    assert!(stdout(&o).contains("flip_kx=none"));
}

#[test]
fn pbs_files_feed_pattern_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (m, out) in [("0.5", "pbs.csv"), ("-0.5", "pbs2.csv"), ("1.5", "pbs3.csv")] {
        let delta = if out == "pbs3.csv" { "0.25" } else { "2.75" };
        let o = nhtopo(&["pbs", "--m", m, "--delta", delta, "--nx", "512", "--ny", "512", "--cell", "auto", "--out", out], d);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(d.join(out).exists() && d.join(out).with_extension("json").exists());
    }
    let header = std::fs::read_to_string(d.join("pbs.csv")).unwrap();
    assert_eq!(header.lines().next(), Some("kx,ky,band,e_re,e_im"));

    let o = nhtopo(&["pattern-compare", "pbs.csv", "pbs2.csv", "--modulo-translation"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("EQUAL shift=(pi,pi)"), "{}", stdout(&o));
    let o = nhtopo(&["pattern-compare", "pbs.csv", "pbs2.csv"], d);
    assert!(stdout(&o).starts_with("NOT-EQUAL shift=identity"));
    let o = nhtopo(&["pattern-compare", "pbs.csv", "pbs3.csv", "--modulo-translation"], d);
    assert!(stdout(&o).starts_with("NOT-EQUAL"));
    let o = nhtopo(&["pattern-compare", "pbs.csv", "missing.csv"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn midpoint_method_and_pattern_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = nhtopo(
        &["pbs", "--method", "midpoint", "--nx", "128", "--ny", "128", "--out", "mid.csv", "--pattern-out", "pat.csv", "--gnuplot-script", "pat.gp"],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("method=midpoint"));
    let pat = std::fs::read_to_string(d.join("pat.csv")).unwrap();
    assert_eq!(pat.lines().next(), Some("kx_index,ky_index,kx,ky"));
    assert!(std::fs::read_to_string(d.join("pat.gp")).unwrap().contains("mid.csv"));
    let o = nhtopo(&["pattern-compare", "pat.csv", "mid.csv"], d);
    assert!(stdout(&o).starts_with("EQUAL"), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(nhtopo(&["nonsense"], d).status.code(), Some(2));
    assert_eq!(nhtopo(&["chern", "--grid", "x"], d).status.code(), Some(2));
    let o = nhtopo(&["chern", "--t", "0"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("InvalidParams"));
    let o = nhtopo(&["chern", "--grid", "8"], d);
    assert_eq!(o.status.code(), Some(1));
    let o = nhtopo(&["vorticity", "--m", "0.5", "--delta", "1.0", "--radius", "2"], d);
    assert_eq!(o.status.code(), Some(1));
    let o = nhtopo(&["homotopy", "--from", "0.5,0.25", "--to", "2.5,0.25", "--steps", "9", "--nx", "64", "--ny", "64"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("PhaseCrossing"));
    assert!(stdout(&o).contains("FAIL"));
    let o = nhtopo(&["phase-diagram", "--m-range", "1,2"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "bands", "pbs", "pattern-compare", "chern", "vorticity", "genvort", "flip", "jacobian", "phase-diagram", "homotopy",
    ] {
        let o = nhtopo(&[sub, "--help"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.contains("--workers"), "{sub}");
    }
}

#[test]
fn seeded_runs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = nhtopo(&["jacobian", "--random", "200", "--seed", "4"], dir.path());
    let b = nhtopo(&["jacobian", "--random", "200", "--seed", "4"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = nhtopo(&["jacobian", "--random", "200", "--seed", "5"], dir.path());
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn workers_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["phase-diagram", "--m-range", "-3,3,7", "--delta-range", "0,2,5", "--tasks", "phase,flip", "--out-dir"];
    let run = |extra: &[&str], out: &str, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_nhtopo"));
        cmd.args(args).arg(out).args(extra).current_dir(d).env_remove("NHTOPO_WORKERS");
        if let Some(v) = env {
            cmd.env("NHTOPO_WORKERS", v);
        }
        let o = cmd.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(d.join(out).join("phase.csv")).unwrap()
    };
    let a = run(&["--workers", "1"], "a", None);
    let b = run(&[], "b", Some("2"));
    assert_eq!(a, b);
    let o = Command::new(env!("CARGO_BIN_EXE_nhtopo"))
        .args(["chern", "--grid", "16"])
        .env("NHTOPO_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_drives_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{
        "model": {"t": 1.0, "m_range": [0.5, 2.5, 3], "delta_range": [0.25, 0.5, 2]},
        "grid": {"nx": 32, "ny": 32},
        "raster": {"cell": "auto"},
        "tasks": ["phase", "chern"],
        "output": {"dir": "cfg_out"},
        "workers": 1
    }"#;
    std::fs::write(d.join("sweep.json"), cfg).unwrap();
    let o = nhtopo(&["phase-diagram", "--config", "sweep.json", "--gnuplot-script", "phase.gp"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("cfg_out/phase.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("m,delta,phase_kind,gapless_branch,chern_re,chern_im,theta_r,theta_i,error"));
    assert!(d.join("cfg_out/manifest.json").exists());
    assert!(d.join("phase.gp").exists());
}

#[test]
fn remaining_subcommands_write_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = nhtopo(&["bands", "--nx", "32", "--ny", "32", "--out", "b.csv", "--gnuplot-script", "b.gp"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("b.csv")).unwrap().lines().count(), 1 + 2 * 32 * 32);

    let o = nhtopo(&["vorticity", "--m", "0.5", "--delta", "1.0", "--ep", "1"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: f64 = stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((v.abs() - 0.5).abs() < 0.01);

    let o = nhtopo(&["genvort", "--kx", "0", "--out", "g.csv", "--gnuplot-script", "g.gp"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("g.csv")).unwrap().lines().count(), 1 + 1025);

    let o = nhtopo(&["jacobian", "--kx", "0", "--ky", "1"], d);
    let det: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(det.abs() < 1e-10);

    let o = nhtopo(&["homotopy", "--from", "1.3,0.25", "--to", "1.7,0.25", "--nx", "128", "--ny", "128", "--out", "h.csv"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    assert_eq!(std::fs::read_to_string(d.join("h.csv")).unwrap().lines().count(), 6);
}
