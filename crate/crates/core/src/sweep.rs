//! Parameter-space drivers: phase diagrams, homotopy paths and result files.

use crate::bz_grid::BzGrid;
use crate::energy_plane::raster::CellSize;
use crate::energy_plane::{pbs_direct, PlaneError};
use crate::invariants::vorticity::DEFAULT_KY_SAMPLES;
use crate::invariants::{chern_number, flipping_index, ChernResult, FlippingIndex};
use crate::model::{classify_phase, ModelParams, PhaseClass, PhaseKind, Sign};
use crate::pattern::{pattern_equivalent, pattern_from_pbs, write_pattern, BzPattern, PatternVerdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("IoFailure: {path}: {source}")]
    IoFailure { path: String, source: std::io::Error },
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::IoFailure { path: path.display().to_string(), source }
}

/// Inclusive range `[lo, hi]` sampled at `count` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span(pub f64, pub f64, pub usize);

impl Span {
    pub fn values(&self) -> Vec<f64> {
        let Span(lo, hi, n) = *self;
        (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }

    fn check(&self, name: &str) -> Result<(), SweepError> {
        if self.2 < 2 {
            return Err(SweepError::InvalidConfig(format!("{name} needs at least 2 points")));
        }
        if !(self.0.is_finite() && self.1.is_finite()) {
            return Err(SweepError::InvalidConfig(format!("{name} is not finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Phase,
    Chern,
    Flip,
    Pbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpan {
    #[serde(default = "one")]
    pub t: f64,
    pub m_range: Span,
    pub delta_range: Span,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// `ky` samples for the flipping index.
    #[serde(default = "default_n_ky")]
    pub n_ky: usize,
}

fn default_n_ky() -> usize {
    DEFAULT_KY_SAMPLES
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 256, ny: 256, n_ky: DEFAULT_KY_SAMPLES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub cell: CellSize,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self { cell: CellSize::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelSpan,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub raster: RasterConfig,
    pub tasks: Vec<Task>,
    pub output: OutputConfig,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<SweepConfig, SweepError> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.model.m_range.check("m_range")?;
        self.model.delta_range.check("delta_range")?;
        if !(self.model.t.is_finite() && self.model.t > 0.0) {
            return Err(SweepError::InvalidConfig(format!("t must be positive, got {}", self.model.t)));
        }
        if self.tasks.is_empty() {
            return Err(SweepError::InvalidConfig("tasks is empty".into()));
        }
        if self.workers == Some(0) {
            return Err(SweepError::InvalidConfig("workers must be at least 1".into()));
        }
        BzGrid::new(self.grid.nx, self.grid.ny).map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    fn has(&self, t: Task) -> bool {
        self.tasks.contains(&t)
    }
}

/// Result of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCell {
    pub m: f64,
    pub delta: f64,
    pub phase: Option<PhaseClass>,
    pub chern: Option<ChernResult>,
    pub flip: Option<FlippingIndex>,
    pub pattern: Option<BzPattern>,
    pub errors: Vec<String>,
}

impl PhaseCell {
    fn evaluate(cfg: &SweepConfig, m: f64, delta: f64) -> PhaseCell {
        let mut cell = PhaseCell { m, delta, phase: None, chern: None, flip: None, pattern: None, errors: Vec::new() };
        let p = match ModelParams::new(cfg.model.t, m, delta) {
            Ok(p) => p,
            Err(e) => {
                cell.errors.push(e.to_string());
                return cell;
            }
        };
        match classify_phase(&p) {
            Ok(c) => cell.phase = Some(c),
            Err(e) => cell.errors.push(e.to_string()),
        }
        let gapped = cell.phase.as_ref().is_some_and(|c| c.kind == PhaseKind::GappedC);
        let grid = BzGrid::new(cfg.grid.nx, cfg.grid.ny).expect("validated grid");
        if cfg.has(Task::Chern) && gapped {
            match chern_number(&p, Sign::Plus, &grid) {
                Ok(c) => cell.chern = Some(c),
                Err(e) => cell.errors.push(e.to_string()),
            }
        }
        if cfg.has(Task::Flip) {
            match flipping_index(&p, cfg.grid.n_ky) {
                Ok(f) => cell.flip = Some(f),
                Err(e) => cell.errors.push(e.to_string()),
            }
        }
        if cfg.has(Task::Pbs) && gapped {
            match pbs_direct(&p, &grid, cfg.raster.cell).and_then(|s| {
                pattern_from_pbs(&s, &grid).map_err(|e| PlaneError::InvalidStep(e.to_string()))
            }) {
                Ok(pat) => cell.pattern = Some(pat),
                Err(e) => cell.errors.push(e.to_string()),
            }
        }
        cell
    }

    fn phase_kind(&self) -> &'static str {
        match &self.phase {
            Some(c) if c.kind == PhaseKind::GappedC => "GappedC",
            Some(_) => "GaplessNu",
            None => "boundary",
        }
    }
}

/// Runs `f` in a pool of `workers` threads, or in the current pool when unset.
fn with_pool<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    let Some(n) = workers else { return f() };
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Evaluates every `(m, delta)` point; rows ordered by `m`, then `delta`.
pub fn phase_diagram(cfg: &SweepConfig) -> Result<Vec<PhaseCell>, SweepError> {
    cfg.validate()?;
    let ms = cfg.model.m_range.values();
    let ds = cfg.model.delta_range.values();
    let points: Vec<(f64, f64)> = ms.iter().flat_map(|&m| ds.iter().map(move |&d| (m, d))).collect();
    Ok(with_pool(cfg.workers, || points.par_iter().map(|&(m, d)| PhaseCell::evaluate(cfg, m, d)).collect()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Quotes a CSV field when it holds a separator or quote.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Columns `m, delta, phase_kind, gapless_branch, chern_re, chern_im,
/// theta_r, theta_i, error`.
pub fn write_phase_csv<W: Write>(cells: &[PhaseCell], mut w: W) -> std::io::Result<()> {
    writeln!(w, "m,delta,phase_kind,gapless_branch,chern_re,chern_im,theta_r,theta_i,error")?;
    for c in cells {
        let branch = c.phase.as_ref().map(|p| p.gapless_label()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            c.m,
            c.delta,
            c.phase_kind(),
            branch,
            opt(c.chern.as_ref().map(|x| x.value.re)),
            opt(c.chern.as_ref().map(|x| x.value.im)),
            opt(c.flip.as_ref().map(|x| x.theta_r)),
            opt(c.flip.as_ref().map(|x| x.theta_i)),
            csv_field(&c.errors.join("; ")),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    /// How the imaginary flipping index is defined.
    pub theta_i: String,
    pub files: Vec<FileEntry>,
}

pub const THETA_I_DEFINITION: &str =
    "half the change between kx = 0 and kx = pi of the net ln|z| change along ky, divided by 2 pi";

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes `manifest.json` in `dir` listing `files` (paths relative to `dir`).
pub fn write_manifest(dir: &Path, config_hash: &str, files: &[PathBuf]) -> Result<PathBuf, SweepError> {
    let mut entries = Vec::with_capacity(files.len());
    for f in files {
        let bytes = std::fs::read(f).map_err(io_failure(f))?;
        let rel = f.strip_prefix(dir).unwrap_or(f);
        entries.push(FileEntry {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash.to_string(),
        theta_i: THETA_I_DEFINITION.to_string(),
        files: entries,
    };
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(io_failure(&path))?;
    Ok(path)
}

fn pattern_file_name(m: f64, delta: f64) -> String {
    format!("pattern_m{m}_delta{delta}.csv")
}

/// Writes `phase.csv`, one pattern file per gapped point when patterns were
/// computed, and the manifest. Returns every file written.
pub fn write_results(cells: &[PhaseCell], cfg: &SweepConfig) -> Result<Vec<PathBuf>, SweepError> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(io_failure(dir))?;
    let mut files = Vec::new();
    let phase = dir.join("phase.csv");
    let mut buf = Vec::new();
    write_phase_csv(cells, &mut buf).map_err(io_failure(&phase))?;
    std::fs::write(&phase, buf).map_err(io_failure(&phase))?;
    files.push(phase);
    if cells.iter().any(|c| c.pattern.is_some()) {
        let pdir = dir.join("patterns");
        std::fs::create_dir_all(&pdir).map_err(io_failure(&pdir))?;
        for c in cells {
            if let Some(p) = &c.pattern {
                let path = pdir.join(pattern_file_name(c.m, c.delta));
                let written = write_pattern(p, &path).map_err(|e| SweepError::IoFailure {
                    path: path.display().to_string(),
                    source: std::io::Error::other(e.to_string()),
                })?;
                files.extend(written);
            }
        }
    }
    let manifest = write_manifest(dir, &cfg.hash(), &files)?;
    files.push(manifest);
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyStep {
    pub index: usize,
    /// Path parameter in `[0, 1]`.
    pub xi: f64,
    pub params: ModelParams,
    pub phase: Option<PhaseClass>,
    pub verdict: Option<PatternVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyReport {
    pub steps: Vec<HomotopyStep>,
    /// First step whose phase classification differs from the start.
    pub phase_crossing: Option<usize>,
    pub pass: bool,
}

impl HomotopyReport {
    /// Columns `step, xi, m, delta, phase_kind, equal, distance_cells,
    /// unmatched, hausdorff, shift, error`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,xi,m,delta,phase_kind,equal,distance_cells,unmatched,hausdorff,shift,error")?;
        for s in &self.steps {
            let kind = s.phase.as_ref().map(|c| c.kind.to_string()).unwrap_or_else(|| "boundary".into());
            let v = s.verdict.as_ref();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.index,
                s.xi,
                s.params.m(),
                s.params.delta(),
                kind,
                v.map(|v| v.equal.to_string()).unwrap_or_default(),
                v.map(|v| v.distance_cells.to_string()).unwrap_or_default(),
                v.map(|v| v.unmatched.to_string()).unwrap_or_default(),
                opt(v.map(|v| v.hausdorff)),
                v.map(|v| v.applied_shift.to_string()).unwrap_or_default(),
                csv_field(s.error.as_deref().unwrap_or("")),
            )?;
        }
        Ok(())
    }
}

/// Patterns along the straight path from `start` to `end` at `steps` evenly
/// spaced points, each compared with the pattern at `start`.
///
/// Passes when every point shares the starting phase class and every pattern
/// is equivalent to the first within `budget` cells.
pub fn homotopy_path_check(
    start: &ModelParams,
    end: &ModelParams,
    steps: usize,
    grid: &BzGrid,
    cell: CellSize,
    budget: usize,
) -> Result<HomotopyReport, SweepError> {
    if steps < 2 {
        return Err(SweepError::InvalidConfig(format!("homotopy path needs at least 2 steps, got {steps}")));
    }
    if start.t() != end.t() {
        return Err(SweepError::InvalidConfig("path endpoints must share t".into()));
    }
    let points: Vec<(usize, f64, ModelParams)> = (0..steps)
        .map(|i| {
            let xi = i as f64 / (steps - 1) as f64;
            let p = start.lerp(*end, xi).map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
            Ok((i, xi, p))
        })
        .collect::<Result<_, SweepError>>()?;
    let start_phase = classify_phase(start).ok();
    let evaluated: Vec<(Option<PhaseClass>, Result<BzPattern, String>)> = points
        .par_iter()
        .map(|(_, _, p)| {
            let phase = classify_phase(p);
            let pat = match &phase {
                Ok(_) => pbs_direct(p, grid, cell)
                    .map_err(|e| e.to_string())
                    .and_then(|s| pattern_from_pbs(&s, grid).map_err(|e| e.to_string())),
                Err(e) => Err(e.to_string()),
            };
            (phase.ok(), pat)
        })
        .collect();
    let mut report = HomotopyReport { steps: Vec::with_capacity(steps), phase_crossing: None, pass: true };
    let reference = evaluated[0].1.as_ref().ok().cloned();
    for ((index, xi, params), (phase, pat)) in points.into_iter().zip(evaluated) {
        let mut error = None;
        if start_phase.is_none() || phase != start_phase {
            if report.phase_crossing.is_none() {
                report.phase_crossing = Some(index);
            }
            let what = phase.as_ref().map(|c| c.kind.to_string()).unwrap_or_else(|| "a phase line".into());
            error = Some(format!("PhaseCrossing: step {index} lies in {what}"));
        }
        let verdict = match (&reference, pat) {
            (Some(r), Ok(p)) => match pattern_equivalent(r, &p, budget, false) {
                Ok(v) => Some(v),
                Err(e) => {
                    error.get_or_insert(e.to_string());
                    None
                }
            },
            (_, Err(e)) => {
                error.get_or_insert(e);
                None
            }
            (None, Ok(_)) => None,
        };
        if error.is_some() || !verdict.as_ref().is_some_and(|v| v.equal) {
            report.pass = false;
        }
        report.steps.push(HomotopyStep { index, xi, params, phase, verdict, error });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> SweepConfig {
        SweepConfig {
            model: ModelSpan { t: 1.0, m_range: Span(-3.0, 3.0, 7), delta_range: Span(0.0, 2.0, 5) },
            grid: GridConfig { nx: 32, ny: 32, n_ky: 256 },
            raster: RasterConfig::default(),
            tasks: vec![Task::Phase, Task::Flip],
            output: OutputConfig { dir: dir.to_path_buf() },
            workers: Some(1),
        }
    }

    #[test]
    fn span_endpoints() {
        let v = Span(-4.0, 4.0, 161).values();
        assert_eq!(v.len(), 161);
        assert_eq!(v[0], -4.0);
        assert_eq!(v[160], 4.0);
        assert!((v[80]).abs() < 1e-15);
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "model": {"t": 1, "m_range": [-4, 4, 9], "delta_range": [-3, 3, 7]},
            "grid": {"nx": 64, "ny": 64},
            "raster": {"cell": "auto"},
            "tasks": ["phase", "chern"],
            "output": {"dir": "out"},
            "workers": 2
        }"#;
        let cfg = SweepConfig::from_json(text).unwrap();
        assert_eq!(cfg.grid.n_ky, DEFAULT_KY_SAMPLES);
        assert_eq!(cfg.raster.cell, CellSize::Auto);
        let again: SweepConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.hash().len(), 64);
        let bad = text.replace("[-4, 4, 9]", "[-4, 4, 1]");
        assert!(matches!(SweepConfig::from_json(&bad), Err(SweepError::InvalidConfig(_))));
        let bad = text.replace(r#"["phase", "chern"]"#, "[]");
        assert!(matches!(SweepConfig::from_json(&bad), Err(SweepError::InvalidConfig(_))));
    }

    #[test]
    fn boundary_cells_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let cells = phase_diagram(&config(dir.path())).unwrap();
        assert_eq!(cells.len(), 35);
        // m = 1, delta = 1 sits on the ky = 0 closing line.
        let c = cells.iter().find(|c| c.m == 1.0 && c.delta == 1.0).unwrap();
        assert!(c.phase.is_none());
        assert!(c.errors[0].starts_with("BoundaryPoint"));
    }

    #[test]
    fn results_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let cells = phase_diagram(&cfg).unwrap();
        let files = write_results(&cells, &cfg).unwrap();
        let first = std::fs::read(dir.path().join("phase.csv")).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert!(manifest.contains("phase.csv"));
        assert_eq!(files.len(), 2);
        write_results(&phase_diagram(&cfg).unwrap(), &cfg).unwrap();
        assert_eq!(std::fs::read(dir.path().join("phase.csv")).unwrap(), first);
        assert_eq!(std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap(), manifest);
    }

    #[test]
    fn zero_length_path_passes() {
        let p = ModelParams::unit(0.5, 0.25).unwrap();
        let g = BzGrid::square(64).unwrap();
        let r = homotopy_path_check(&p, &p, 3, &g, CellSize::Auto, 1).unwrap();
        assert!(r.pass);
        assert!(r.phase_crossing.is_none());
        assert!(homotopy_path_check(&p, &p, 1, &g, CellSize::Auto, 1).is_err());
    }
}
