use nhtopo::bz_grid::BzGrid;
use nhtopo::energy_plane::raster::CellSize;
use nhtopo::model::{ModelParams, PhaseKind};
use nhtopo::sweep::{
    homotopy_path_check, phase_diagram, write_phase_csv, write_results, GridConfig, Manifest, ModelSpan, OutputConfig,
    RasterConfig, Span, SweepConfig, Task, MANIFEST_NAME,
};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::Instant;

fn config(m: Span, d: Span, tasks: Vec<Task>, dir: &Path, workers: Option<usize>) -> SweepConfig {
    SweepConfig {
        model: ModelSpan { t: 1.0, m_range: m, delta_range: d },
        grid: GridConfig { nx: 32, ny: 32, n_ky: 256 },
        raster: RasterConfig { cell: CellSize::Auto },
        tasks,
        output: OutputConfig { dir: dir.to_path_buf() },
        workers,
    }
}

fn csv(cfg: &SweepConfig) -> Vec<u8> {
    let mut out = Vec::new();
    write_phase_csv(&phase_diagram(cfg).unwrap(), &mut out).unwrap();
    out
}

#[test]
fn output_does_not_depend_on_workers_or_task_order() {
    let dir = tempfile::tempdir().unwrap();
    let (m, d) = (Span(-3.0, 3.0, 13), Span(-2.0, 2.0, 9));
    let one = csv(&config(m, d, vec![Task::Phase, Task::Chern, Task::Flip], dir.path(), Some(1)));
    let three = csv(&config(m, d, vec![Task::Flip, Task::Chern, Task::Phase], dir.path(), Some(3)));
    assert_eq!(one, three);
    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().count(), 1 + 13 * 9);
}

#[test]
fn diagram_is_symmetric_in_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cells = phase_diagram(&config(Span(-4.0, 4.0, 33), Span(-3.0, 3.0, 25), vec![Task::Phase], dir.path(), None)).unwrap();
    for row in cells.chunks(25) {
        for j in 0..25 {
            let (a, b) = (&row[j], &row[24 - j]);
            assert_eq!(a.delta, -b.delta);
            assert_eq!(a.phase, b.phase);
            assert_eq!(a.errors, b.errors);
        }
    }
    assert!(cells.iter().any(|c| !c.errors.is_empty()), "phase-line cells record errors in place");
}

#[test]
fn flip_map_anchors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Span(0.5, 2.5, 3), Span(0.25, 0.5, 2), vec![Task::Phase, Task::Flip], dir.path(), None);
    cfg.grid.n_ky = 1024;
    let cells = phase_diagram(&cfg).unwrap();
    let at = |m: f64| cells.iter().find(|c| c.m == m && c.delta == 0.25).unwrap();
    for (m, want) in [(0.5, 1.0), (1.5, 0.0), (2.5, 0.0)] {
        let f = at(m).flip.as_ref().unwrap();
        assert!((f.theta_r - want).abs() < 1e-6, "m={m}: {}", f.theta_r);
        assert_eq!(at(m).phase.as_ref().unwrap().kind, PhaseKind::GappedC);
    }
}

#[test]
fn manifest_covers_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = config(Span(0.5, 1.5, 2), Span(0.25, 0.5, 2), vec![Task::Phase, Task::Pbs], &out, None);
    let cells = phase_diagram(&cfg).unwrap();
    let files = write_results(&cells, &cfg).unwrap();
    let manifest_path = out.join(MANIFEST_NAME);
    assert!(files.contains(&manifest_path));
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.config_sha256, cfg.hash());
    assert_eq!(manifest.files.len(), files.len() - 1);
    for entry in &manifest.files {
        let bytes = std::fs::read(out.join(&entry.path)).unwrap();
        assert_eq!(entry.bytes, bytes.len() as u64);
        assert_eq!(entry.sha256, hex::encode(Sha256::digest(&bytes)));
    }
    let mut on_disk = Vec::new();
    for e in walk(&out) {
        if e != manifest_path {
            on_disk.push(e);
        }
    }
    assert_eq!(on_disk.len(), manifest.files.len());
    assert!(manifest.files.iter().any(|f| f.path.ends_with(".json") && f.path.contains("pattern")));
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn full_phase_sweep_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cells = phase_diagram(&config(Span(-4.0, 4.0, 161), Span(-3.0, 3.0, 121), vec![Task::Phase], dir.path(), None)).unwrap();
    assert_eq!(cells.len(), 161 * 121);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn path_inside_one_region_passes() {
    let grid = BzGrid::square(512).unwrap();
    let a = ModelParams::unit(1.3, 0.25).unwrap();
    let b = ModelParams::unit(1.7, 0.25).unwrap();
    let r = homotopy_path_check(&a, &b, 5, &grid, CellSize::Auto, 1).unwrap();
    assert!(r.pass);
    assert_eq!(r.steps.len(), 5);
    assert!(r.phase_crossing.is_none());
    assert!(r.steps.iter().all(|s| s.verdict.as_ref().is_some_and(|v| v.equal)));
}

#[test]
fn path_through_gapless_region_reports_crossing() {
    let grid = BzGrid::square(256).unwrap();
    let a = ModelParams::unit(0.5, 0.25).unwrap();
    let b = ModelParams::unit(2.5, 0.25).unwrap();
    let r = homotopy_path_check(&a, &b, 9, &grid, CellSize::Auto, 1).unwrap();
    assert!(!r.pass);
    // m = 1.75 sits on the line where the ky = pi gap closes at |delta| = 0.25.
    assert_eq!(r.phase_crossing, Some(5));
    assert!(r.steps[5].error.as_deref().unwrap().contains("PhaseCrossing"));
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 10);
    assert!(homotopy_path_check(&a, &b, 1, &grid, CellSize::Auto, 1).is_err());
}
