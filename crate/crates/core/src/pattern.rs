//! Zone patterns of pseudo-boundary states and their comparison.

use crate::bz_grid::{periodic_gap, translate_pattern, BzGrid, GridError, GridIndex};
use crate::energy_plane::PbsSet;
use crate::model::ModelParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("GridMismatch: {a_nx}x{a_ny} vs {b_nx}x{b_ny}")]
    GridMismatch { a_nx: usize, a_ny: usize, b_nx: usize, b_ny: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("IoFailure: {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("ParseFailure: {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

/// Where a pattern came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: ModelParams,
    pub nx: usize,
    pub ny: usize,
    pub method: String,
    pub cell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BzPattern {
    pub grid: BzGrid,
    pub cells: BTreeSet<GridIndex>,
    pub provenance: Option<Provenance>,
}

impl BzPattern {
    pub fn new(grid: BzGrid, cells: BTreeSet<GridIndex>) -> Self {
        Self { grid, cells, provenance: None }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Pattern shifted by `(pi, pi)`.
    pub fn translated(&self) -> Result<BzPattern, PatternError> {
        Ok(BzPattern {
            grid: self.grid,
            cells: translate_pattern(&self.cells, &self.grid)?,
            provenance: self.provenance.clone(),
        })
    }

    /// Columns `kx_index, ky_index, kx, ky` in canonical order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kx_index,ky_index,kx,ky")?;
        for c in &self.cells {
            let k = self.grid.k_at(*c);
            writeln!(w, "{},{},{},{}", c.ix, c.iy, k.kx, k.ky)?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> String {
        let body = match &self.provenance {
            Some(p) => serde_json::to_value(p).expect("provenance serializes"),
            None => serde_json::json!({ "nx": self.grid.nx(), "ny": self.grid.ny() }),
        };
        serde_json::to_string_pretty(&body).expect("json value serializes")
    }
}

fn same_grid(a: &BzGrid, b: &BzGrid) -> Result<(), PatternError> {
    if a != b {
        return Err(PatternError::GridMismatch { a_nx: a.nx(), a_ny: a.ny(), b_nx: b.nx(), b_ny: b.ny() });
    }
    Ok(())
}

/// Union over both bands of the PBS lattice cells.
pub fn pattern_from_pbs(pbs: &PbsSet, grid: &BzGrid) -> Result<BzPattern, PatternError> {
    same_grid(&pbs.grid, grid)?;
    Ok(BzPattern {
        grid: *grid,
        cells: pbs.cells(),
        provenance: Some(Provenance {
            params: pbs.params,
            nx: grid.nx(),
            ny: grid.ny(),
            method: pbs.method.to_string(),
            cell: pbs.cell,
        }),
    })
}

/// Cells within Chebyshev distance `r` on the periodic lattice.
pub fn dilate(cells: &BTreeSet<GridIndex>, grid: &BzGrid, r: usize) -> BTreeSet<GridIndex> {
    let r = r as isize;
    let mut out = BTreeSet::new();
    for c in cells {
        for dy in -r..=r {
            for dx in -r..=r {
                out.insert(grid.wrap(c.ix as isize + dx, c.iy as isize + dy));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternDistance {
    pub sym_diff: usize,
    /// Radians on the flat torus.
    pub hausdorff: f64,
}

/// Largest distance from a cell of `a` to the nearest cell of `b`.
fn directed_hausdorff(a: &BTreeSet<GridIndex>, b: &BTreeSet<GridIndex>, grid: &BzGrid) -> f64 {
    let mut mask = vec![false; grid.len()];
    for c in b {
        mask[grid.linear(*c)] = true;
    }
    let (hx, hy) = (grid.dkx(), grid.dky());
    let h_min = hx.min(hy);
    let max_ring = (grid.nx().max(grid.ny()) / 2 + 1) as isize;
    let mut worst: f64 = 0.0;
    for c in a {
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            if ring as f64 * h_min > best {
                break;
            }
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs().max(dy.abs()) != ring {
                        continue;
                    }
                    let n = grid.wrap(c.ix as isize + dx, c.iy as isize + dy);
                    if mask[grid.linear(n)] {
                        let d = (periodic_gap(c.ix, n.ix, grid.nx()) as f64 * hx)
                            .hypot(periodic_gap(c.iy, n.iy, grid.ny()) as f64 * hy);
                        best = best.min(d);
                    }
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}

pub fn pattern_distance(a: &BzPattern, b: &BzPattern) -> Result<PatternDistance, PatternError> {
    same_grid(&a.grid, &b.grid)?;
    let sym_diff = a.cells.symmetric_difference(&b.cells).count();
    let hausdorff = match (a.cells.is_empty(), b.cells.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => a.grid.diameter(),
        _ => directed_hausdorff(&a.cells, &b.cells, &a.grid).max(directed_hausdorff(&b.cells, &a.cells, &a.grid)),
    };
    Ok(PatternDistance { sym_diff, hausdorff })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shift {
    Identity,
    HalfZone,
}

impl std::fmt::Display for Shift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shift::Identity => write!(f, "identity"),
            Shift::HalfZone => write!(f, "(pi,pi)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternVerdict {
    pub equal: bool,
    /// Exact symmetric difference after the reported shift.
    pub distance_cells: usize,
    /// Cells of either pattern outside the dilation of the other.
    pub unmatched: usize,
    pub hausdorff: f64,
    pub applied_shift: Shift,
}

fn compare(a: &BzPattern, b: &BTreeSet<GridIndex>, budget: usize) -> (usize, usize) {
    let da = dilate(&a.cells, &a.grid, budget);
    let db = dilate(b, &a.grid, budget);
    let miss = a.cells.iter().filter(|c| !db.contains(c)).count() + b.iter().filter(|c| !da.contains(c)).count();
    (miss, a.cells.symmetric_difference(b).count())
}

/// Equal when each pattern lies inside the `budget`-cell dilation of the other.
///
/// With `modulo_translation` the `(pi, pi)` shift of `b` is also tried; the
/// identity wins ties.
pub fn pattern_equivalent(
    a: &BzPattern,
    b: &BzPattern,
    budget: usize,
    modulo_translation: bool,
) -> Result<PatternVerdict, PatternError> {
    same_grid(&a.grid, &b.grid)?;
    let mut candidates = vec![(Shift::Identity, b.clone())];
    if modulo_translation {
        candidates.push((Shift::HalfZone, b.translated()?));
    }
    let mut best: Option<PatternVerdict> = None;
    for (shift, bb) in candidates {
        let (unmatched, distance_cells) = compare(a, &bb.cells, budget);
        let hausdorff = pattern_distance(a, &bb)?.hausdorff;
        let v = PatternVerdict { equal: unmatched == 0, distance_cells, unmatched, hausdorff, applied_shift: shift };
        let take = match &best {
            None => true,
            Some(cur) => (v.equal && !cur.equal) || (v.equal == cur.equal && v.unmatched < cur.unmatched),
        };
        if take {
            best = Some(v);
        }
    }
    Ok(best.expect("at least one candidate"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PatternError + '_ {
    move |source| PatternError::Io { path: path.display().to_string(), source }
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn write_pattern(pattern: &BzPattern, csv_path: &Path) -> Result<Vec<std::path::PathBuf>, PatternError> {
    let mut buf = Vec::new();
    pattern.write_csv(&mut buf).map_err(io_err(csv_path))?;
    std::fs::write(csv_path, buf).map_err(io_err(csv_path))?;
    let json_path = csv_path.with_extension("json");
    std::fs::write(&json_path, pattern.sidecar_json()).map_err(io_err(&json_path))?;
    Ok(vec![csv_path.to_path_buf(), json_path])
}

/// Reads lattice cells from a PBS CSV (`kx, ky, ...`) or a pattern CSV
/// (`kx_index, ky_index, ...`).
pub fn read_pattern_csv(path: &Path, grid: &BzGrid) -> Result<BzPattern, PatternError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = std::io::BufReader::new(file);
    let mut cells = BTreeSet::new();
    let mut by_index = false;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let parse_err = |msg: String| PatternError::Parse { path: path.display().to_string(), line: n + 1, msg };
        if n == 0 {
            by_index = line.starts_with("kx_index");
            if !(by_index || line.starts_with("kx,")) {
                return Err(parse_err(format!("unexpected header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 2 {
            return Err(parse_err("expected at least two columns".into()));
        }
        if by_index {
            let ix: usize = cols[0].trim().parse().map_err(|e| parse_err(format!("{e}")))?;
            let iy: usize = cols[1].trim().parse().map_err(|e| parse_err(format!("{e}")))?;
            if ix >= grid.nx() || iy >= grid.ny() {
                return Err(parse_err(format!("index ({ix}, {iy}) outside {}x{}", grid.nx(), grid.ny())));
            }
            cells.insert(GridIndex::new(ix, iy));
        } else {
            let kx: f64 = cols[0].trim().parse().map_err(|e| parse_err(format!("{e}")))?;
            let ky: f64 = cols[1].trim().parse().map_err(|e| parse_err(format!("{e}")))?;
            cells.insert(grid.index_of(crate::model::KPoint::new(kx, ky)));
        }
    }
    Ok(BzPattern::new(*grid, cells))
}

/// Reads the JSON sidecar next to a CSV, if present.
pub fn read_sidecar(csv_path: &Path) -> Option<Provenance> {
    let text = std::fs::read_to_string(csv_path.with_extension("json")).ok()?;
    serde_json::from_str(&text).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> BzGrid {
        BzGrid::square(16).unwrap()
    }

    fn pat(cells: &[(usize, usize)]) -> BzPattern {
        BzPattern::new(grid(), cells.iter().map(|&(i, j)| GridIndex::new(i, j)).collect())
    }

    #[test]
    fn distance_conventions() {
        let a = pat(&[(1, 1), (2, 1)]);
        assert_eq!(pattern_distance(&a, &a).unwrap(), PatternDistance { sym_diff: 0, hausdorff: 0.0 });
        let e = pat(&[]);
        let one = pat(&[(3, 3)]);
        let d = pattern_distance(&e, &one).unwrap();
        assert_eq!(d.sym_diff, 1);
        assert_eq!(d.hausdorff, grid().diameter());
        let b = pat(&[(15, 1)]);
        let ab = pattern_distance(&a, &b).unwrap();
        let ba = pattern_distance(&b, &a).unwrap();
        assert_eq!(ab, ba);
        // Nearest to (2,1) across the seam is (15,1), three columns away.
        assert!((ab.hausdorff - 3.0 * grid().dkx()).abs() < 1e-12);
    }

    #[test]
    fn dilation_equivalence() {
        let a = pat(&[(4, 4), (5, 4), (6, 4)]);
        let b = pat(&[(4, 5), (5, 5), (6, 5)]);
        assert!(pattern_equivalent(&a, &b, 1, false).unwrap().equal);
        assert!(!pattern_equivalent(&a, &b, 0, false).unwrap().equal);
        let c = pat(&[(4, 7), (5, 7), (6, 7)]);
        assert!(!pattern_equivalent(&a, &c, 1, false).unwrap().equal);
    }

    #[test]
    fn half_zone_shift() {
        let a = pat(&[(0, 0), (1, 0)]);
        let b = pat(&[(8, 8), (9, 8)]);
        let v = pattern_equivalent(&a, &b, 1, true).unwrap();
        assert!(v.equal);
        assert_eq!(v.applied_shift, Shift::HalfZone);
        assert!(!pattern_equivalent(&a, &b, 1, false).unwrap().equal);
        assert_eq!(a.translated().unwrap().translated().unwrap(), a);
    }

    #[test]
    fn grid_mismatch() {
        let a = pat(&[(0, 0)]);
        let b = BzPattern::new(BzGrid::square(32).unwrap(), BTreeSet::new());
        assert!(matches!(pattern_distance(&a, &b), Err(PatternError::GridMismatch { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let a = pat(&[(0, 0), (3, 7), (15, 15)]);
        write_pattern(&a, &path).unwrap();
        let b = read_pattern_csv(&path, &grid()).unwrap();
        assert_eq!(a.cells, b.cells);
        assert!(read_sidecar(&path).is_none());
    }
}
