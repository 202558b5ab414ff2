//! Band samples in the complex energy plane, region boundaries and
//! pseudo-boundary states (PBS).
//!
//! A PBS is a lattice momentum whose band energy lies on the boundary of that
//! band's region in the energy plane. Two detectors are provided:
//!
//! * [`pbs_direct`]: vertices of exposed edges of the image mesh (see [`mesh`])
//!   that fall in or next to a raster boundary cell.
//! * [`pbs_midpoint`]: compares the regions at two nearby parameter points and
//!   keeps the midpoint samples covered by exactly one of them.

pub mod mesh;
pub mod pivot;
pub mod raster;

use crate::bz_grid::{BzGrid, GridIndex};
use crate::model::{classify_phase, magnitudes, ModelParams, Sign, BANDS};
use mesh::{Containment, ImageMesh};
use num_complex::Complex64;
use rayon::prelude::*;
use raster::{BoundaryMethod, BoundarySet, CellSize, PlaneCell, PlaneRaster, RasterGeometry};
use std::collections::BTreeSet;
use std::io::Write;
use thiserror::Error;

pub use raster::{extract_boundary, rasterize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaneError {
    #[error("DegenerateBounds: samples span no area and no cell size was given")]
    DegenerateBounds,
    #[error("InvalidCell: raster cell {0} must be positive")]
    InvalidCell(f64),
    #[error("EmptyRaster: no occupied cells")]
    EmptyRaster,
    #[error("RadiusTooSmall: pivot radius {radius} cannot advance")]
    RadiusTooSmall { radius: f64 },
    #[error("RadiusTooLarge: pivot radius {radius} degenerates the hull")]
    RadiusTooLarge { radius: f64 },
    #[error("OnBoundary: point ({re}, {im}) lies on the region boundary")]
    OnBoundary { re: f64, im: f64 },
    #[error("PhaseCrossing: parameter step leaves the phase of the starting point ({0})")]
    PhaseCrossing(String),
    #[error("InvalidStep: {0}")]
    InvalidStep(String),
}

/// One band energy at a lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSample {
    pub k: GridIndex,
    pub band: Sign,
    pub e: Complex64,
}

/// Both bands over a lattice, with the parameters that produced them.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub params: ModelParams,
    pub grid: BzGrid,
    /// Upper-band energy per linear lattice index; the lower band is its negative.
    upper: Vec<Complex64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        2 * self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn energy(&self, g: GridIndex, band: Sign) -> Complex64 {
        self.upper[self.grid.linear(g)] * band.as_f64()
    }

    pub fn band_energies(&self, band: Sign) -> Vec<Complex64> {
        self.upper.iter().map(|e| e * band.as_f64()).collect()
    }

    /// Upper band first, each in row-major lattice order.
    pub fn samples(&self) -> Vec<BandSample> {
        let mut out = Vec::with_capacity(self.len());
        for band in BANDS {
            for (l, e) in self.upper.iter().enumerate() {
                out.push(BandSample { k: self.grid.from_linear(l), band, e: e * band.as_f64() });
            }
        }
        out
    }
}

pub fn sample_bands(p: &ModelParams, grid: &BzGrid) -> SampleSet {
    let nx = grid.nx();
    let tx: Vec<f64> = (0..nx).map(|i| grid.kx(i).cos()).collect();
    let rows: Vec<Vec<Complex64>> = (0..grid.ny())
        .into_par_iter()
        .map(|j| {
            let (sy, cy) = grid.ky(j).sin_cos();
            tx.iter()
                .map(|&cx| {
                    let (eps, omega) = p.eps_omega_trig(cx, cy, sy);
                    let (er, ei, sigma) = magnitudes(eps, omega);
                    Complex64::new(er, sigma.as_f64() * ei)
                })
                .collect()
        })
        .collect();
    SampleSet { params: *p, grid: *grid, upper: rows.concat() }
}

const DEFAULT_PIVOT_QUANTILE: f64 = 0.99;

/// Boundary by ball pivoting, reported as the cells its polygon crosses.
///
/// `radius = None` uses twice the 99th percentile of the nearest-neighbour
/// spacing of each band's point cloud. Samples crowd along folds, so the
/// median spacing is far below the gaps along the sparse outer rim. Cells use the same layout as [`rasterize`] with
/// the given `cell`, so the two boundary sets can be compared directly.
pub fn extract_boundary_ballpivot(
    samples: &[BandSample],
    radius: Option<f64>,
    cell: CellSize,
) -> Result<(BoundarySet, [Vec<Complex64>; 2]), PlaneError> {
    let pts: Vec<Complex64> = samples.iter().map(|s| s.e).collect();
    let geometry = RasterGeometry::fit(&pts, cell)?;
    let mut cells = [BTreeSet::new(), BTreeSet::new()];
    let mut polys = [Vec::new(), Vec::new()];
    for (slot, band) in BANDS.into_iter().enumerate() {
        let cloud: Vec<Complex64> = samples.iter().filter(|s| s.band == band).map(|s| s.e).collect();
        if cloud.is_empty() {
            continue;
        }
        let r = match radius {
            Some(r) => r,
            None => {
                2.0 * pivot::nn_spacing_quantile(&cloud, DEFAULT_PIVOT_QUANTILE)
                    .ok_or(PlaneError::RadiusTooLarge { radius: 0.0 })?
            }
        };
        let poly = pivot::ball_pivot(&cloud, r)?;
        cells[slot] = polygon_cells(&poly, &geometry);
        polys[slot] = poly;
    }
    let [plus, minus] = cells;
    Ok((BoundarySet { method: BoundaryMethod::BallPivot, geometry, plus, minus }, polys))
}

/// Cells touched by the closed polyline.
fn polygon_cells(poly: &[Complex64], geometry: &RasterGeometry) -> BTreeSet<PlaneCell> {
    let mut out = BTreeSet::new();
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let steps = (((b - a).norm() / (0.25 * geometry.cell)).ceil() as usize).max(1);
        for s in 0..=steps {
            let z = a + (b - a) * (s as f64 / steps as f64);
            if let Some(c) = geometry.cell_of(z) {
                out.insert(c);
            }
        }
    }
    out
}

/// A band region in one of its representations.
pub enum Region<'a> {
    /// Occupied cells of one band.
    Raster(&'a PlaneRaster, Sign),
    /// Closed boundary polygon.
    Polygon(&'a [Complex64]),
    /// Union of image triangles.
    Mesh(&'a ImageMesh),
}

/// Membership test; points on an edge are reported as [`PlaneError::OnBoundary`].
pub fn point_in_region(region: &Region<'_>, e: Complex64) -> Result<bool, PlaneError> {
    let on_boundary = || PlaneError::OnBoundary { re: e.re, im: e.im };
    match region {
        Region::Raster(r, band) => {
            let g = &r.geometry;
            match g.cell_of(e) {
                None => Ok(false),
                Some(c) => {
                    // Grid lines between an occupied and an empty cell are edges.
                    let fx = (e.re - g.bounds.re_min) / g.cell;
                    let fy = (e.im - g.bounds.im_min) / g.cell;
                    let on_line = (fx - fx.round()).abs() * g.cell <= mesh::EDGE_TOL
                        || (fy - fy.round()).abs() * g.cell <= mesh::EDGE_TOL;
                    let occ = r.occupied(*band, c);
                    if on_line {
                        let probe = [
                            e + Complex64::new(g.cell * 1e-6, 0.0),
                            e - Complex64::new(g.cell * 1e-6, 0.0),
                            e + Complex64::new(0.0, g.cell * 1e-6),
                            e - Complex64::new(0.0, g.cell * 1e-6),
                        ];
                        let any_empty = probe
                            .iter()
                            .any(|z| g.cell_of(*z).map(|c| !r.occupied(*band, c)).unwrap_or(true));
                        let any_full = probe
                            .iter()
                            .any(|z| g.cell_of(*z).map(|c| r.occupied(*band, c)).unwrap_or(false));
                        if any_empty && any_full {
                            return Err(on_boundary());
                        }
                    }
                    Ok(occ)
                }
            }
        }
        Region::Polygon(poly) => {
            let n = poly.len();
            let mut inside = false;
            for i in 0..n {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                if mesh::segment_distance(e, a, b) <= mesh::EDGE_TOL {
                    return Err(on_boundary());
                }
                if (a.im > e.im) != (b.im > e.im) {
                    let x = a.re + (e.im - a.im) * (b.re - a.re) / (b.im - a.im);
                    if e.re < x {
                        inside = !inside;
                    }
                }
            }
            Ok(inside)
        }
        Region::Mesh(m) => match m.contains(e) {
            Containment::Inside => Ok(true),
            Containment::Outside => Ok(false),
            Containment::OnBoundary => Err(on_boundary()),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PbsMethod {
    Direct,
    Midpoint,
}

impl std::fmt::Display for PbsMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PbsMethod::Direct => write!(f, "direct"),
            PbsMethod::Midpoint => write!(f, "midpoint"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbsEntry {
    pub k: GridIndex,
    pub band: Sign,
    pub e: Complex64,
}

#[derive(Debug, Clone)]
pub struct PbsSet {
    pub params: ModelParams,
    pub grid: BzGrid,
    pub method: PbsMethod,
    /// Raster cell edge used for the boundary extraction.
    pub cell: f64,
    /// Sorted by band (lower first), then `ky`, then `kx` index.
    pub entries: Vec<PbsEntry>,
}

impl PbsSet {
    fn new(params: ModelParams, grid: BzGrid, method: PbsMethod, cell: f64, mut entries: Vec<PbsEntry>) -> Self {
        entries.sort_by(|a, b| {
            a.band.as_i8().cmp(&b.band.as_i8()).then(a.k.iy.cmp(&b.k.iy)).then(a.k.ix.cmp(&b.k.ix))
        });
        Self { params, grid, method, cell, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lattice cells over both bands.
    pub fn cells(&self) -> BTreeSet<GridIndex> {
        self.entries.iter().map(|e| e.k).collect()
    }

    /// Entries near `cos ky = -m/t` but away from the lines `ky = ±pi/2`,
    /// `kx = 0` and `kx = ±pi`.
    pub fn mass_line_entries(&self) -> Vec<PbsEntry> {
        let g = &self.grid;
        let ratio = -self.params.m() / self.params.t();
        if ratio.abs() > 1.0 {
            return Vec::new();
        }
        let ky0 = ratio.acos();
        let near = |a: f64, b: f64, h: f64| crate::model::wrap_angle(a - b).abs() <= h * 1.0000001;
        self.entries
            .iter()
            .filter(|e| {
                let k = g.k_at(e.k);
                let (hx, hy) = (g.dkx(), g.dky());
                let primary = near(k.ky, std::f64::consts::FRAC_PI_2, hy)
                    || near(k.ky, -std::f64::consts::FRAC_PI_2, hy)
                    || near(k.kx, 0.0, hx)
                    || near(k.kx, std::f64::consts::PI, hx);
                let mass = near(k.ky, ky0, hy) || near(k.ky, -ky0, hy);
                mass && !primary
            })
            .copied()
            .collect()
    }

    /// Columns `kx, ky, band, e_re, e_im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kx,ky,band,e_re,e_im")?;
        for e in &self.entries {
            let k = self.grid.k_at(e.k);
            writeln!(w, "{},{},{},{},{}", k.kx, k.ky, e.band.as_i8(), e.e.re, e.e.im)?;
        }
        Ok(())
    }
}

fn mesh_bucket(geometry: &RasterGeometry) -> f64 {
    geometry.cell / 4.0
}

/// Samples on an exposed mesh edge whose raster cell is within one cell of a
/// raster boundary cell.
///
/// The raster alone marks every sample of a boundary cell, which near a fold
/// of the band map covers a strip of the zone whose width grows like the
/// square root of the cell size. The mesh test keeps only the lattice points
/// whose images are outermost.
pub fn pbs_direct(p: &ModelParams, grid: &BzGrid, cell: CellSize) -> Result<PbsSet, PlaneError> {
    let samples = sample_bands(p, grid);
    let all = samples.samples();
    let raster = rasterize(&all, cell)?;
    let boundary = extract_boundary(&raster)?;
    let mut entries = Vec::new();
    for band in BANDS {
        let mesh = ImageMesh::build(p, *grid, band, Some(mesh_bucket(&raster.geometry)));
        // Mesh-boundary vertices can sit one cell inside the 4-adjacency ring.
        let near = raster::dilate_cells(boundary.band(band), 1);
        let energies = samples.band_energies(band);
        let on_edge = mesh
            .boundary_vertices_among(|l| raster.geometry.cell_of(energies[l]).is_some_and(|c| near.contains(&c)));
        for c in near.iter().filter(|c| c.ire < raster.geometry.nre && c.iim < raster.geometry.nim) {
            if !raster.occupied(band, *c) {
                continue;
            }
            for &k in raster.backmap(band, *c) {
                if on_edge[grid.linear(k)] {
                    entries.push(PbsEntry { k, band, e: samples.energy(k, band) });
                }
            }
        }
    }
    Ok(PbsSet::new(*p, *grid, PbsMethod::Direct, raster.geometry.cell, entries))
}

/// Parameter increment for the midpoint detector; exactly one of `dm`,
/// `ddelta` may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamStep {
    pub dm: f64,
    pub ddelta: f64,
}

impl ParamStep {
    pub fn delta(d: f64) -> Self {
        Self { dm: 0.0, ddelta: d }
    }

    pub fn mass(d: f64) -> Self {
        Self { dm: d, ddelta: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.dm == 0.0 && self.ddelta == 0.0
    }

    pub fn apply(&self, p: &ModelParams, s: f64) -> Result<ModelParams, PlaneError> {
        ModelParams::new(p.t(), p.m() + s * self.dm, p.delta() + s * self.ddelta)
            .map_err(|e| PlaneError::InvalidStep(e.to_string()))
    }
}

/// Default detector step along `delta`.
pub const MIDPOINT_STEP: f64 = 1e-8;

/// Midpoint detector over two nearby parameter points.
///
/// Membership is tested against the image meshes at `p` and `p + dp`, with
/// points on a mesh edge counted as inside. Hits are kept when their raster
/// cell at `p + dp/2` is within one cell of a raster boundary cell, so that
/// notches narrower than a cell are ignored as in [`pbs_direct`].
///
/// Near a crossing of two fold lines the band map is flat to fourth order,
/// and the zone strip swept between the two boundaries widens like the
/// fourth root of the step. Steps above about `1e-8` thicken the pattern there.
pub fn pbs_midpoint(p: &ModelParams, dp: ParamStep, grid: &BzGrid, cell: CellSize) -> Result<PbsSet, PlaneError> {
    if dp.dm != 0.0 && dp.ddelta != 0.0 {
        return Err(PlaneError::InvalidStep("step changes both m and delta".into()));
    }
    let mid = dp.apply(p, 0.5)?;
    let end = dp.apply(p, 1.0)?;
    let phase = |q: &ModelParams| classify_phase(q).map_err(|e| PlaneError::PhaseCrossing(e.to_string()));
    let c0 = phase(p)?;
    if c0.kind != crate::model::PhaseKind::GappedC {
        return Err(PlaneError::PhaseCrossing(format!("start point is {}", c0.kind)));
    }
    if phase(&mid)? != c0 || phase(&end)? != c0 {
        return Err(PlaneError::PhaseCrossing("step changes the phase class".into()));
    }
    let samples = sample_bands(&mid, grid);
    let all = samples.samples();
    let raster = rasterize(&all, cell)?;
    if dp.is_zero() {
        return Ok(PbsSet::new(mid, *grid, PbsMethod::Midpoint, raster.geometry.cell, Vec::new()));
    }
    let boundary = extract_boundary(&raster)?;
    let mut entries = Vec::new();
    for band in BANDS {
        let a = ImageMesh::build(p, *grid, band, Some(mesh_bucket(&raster.geometry)));
        let b = ImageMesh::build(&end, *grid, band, Some(mesh_bucket(&raster.geometry)));
        let near = raster::dilate_cells(boundary.band(band), 1);
        let energies = samples.band_energies(band);
        let hits: Vec<usize> = energies
            .par_iter()
            .enumerate()
            .filter(|(l, e)| {
                if !raster.geometry.cell_of(**e).is_some_and(|c| near.contains(&c)) {
                    return false;
                }
                let ina = a.contains_near(**e, *l) != Containment::Outside;
                let inb = b.contains_near(**e, *l) != Containment::Outside;
                ina != inb
            })
            .map(|(l, _)| l)
            .collect();
        for l in hits {
            entries.push(PbsEntry { k: grid.from_linear(l), band, e: energies[l] });
        }
    }
    Ok(PbsSet::new(mid, *grid, PbsMethod::Midpoint, raster.geometry.cell, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_match_energy_pair() {
        let p = ModelParams::unit(0.5, 0.25).unwrap();
        let g = BzGrid::square(32).unwrap();
        let s = sample_bands(&p, &g);
        assert_eq!(s.len(), 2 * 32 * 32);
        let k0 = g.index_of(crate::model::KPoint::new(0.0, 0.0));
        let (ep, em) = crate::model::energy_pair(g.k_at(k0), &p);
        assert_eq!(s.energy(k0, Sign::Plus), ep.value());
        assert_eq!(s.energy(k0, Sign::Minus), em.value());
    }

    #[test]
    fn polygon_membership() {
        let sq = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ];
        let r = Region::Polygon(&sq);
        assert!(point_in_region(&r, Complex64::new(0.5, 0.5)).unwrap());
        assert!(!point_in_region(&r, Complex64::new(1.5, 0.5)).unwrap());
        assert!(matches!(point_in_region(&r, Complex64::new(1.0, 0.5)), Err(PlaneError::OnBoundary { .. })));
    }

    #[test]
    fn raster_membership() {
        let mut s = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let z = Complex64::new(i as f64 / 20.0, j as f64 / 20.0);
                if (z - Complex64::new(0.5, 0.5)).norm() < 0.4 {
                    s.push(BandSample { k: GridIndex::new(0, 0), band: Sign::Plus, e: z });
                }
            }
        }
        let r = rasterize(&s, CellSize::Fixed(0.05)).unwrap();
        let region = Region::Raster(&r, Sign::Plus);
        assert!(point_in_region(&region, Complex64::new(0.5 + 0.01, 0.5 + 0.01)).unwrap());
        assert!(!point_in_region(&region, Complex64::new(5.0, 5.0)).unwrap());
    }

    #[test]
    fn midpoint_rejects_bad_steps() {
        let p = ModelParams::unit(0.5, 0.25).unwrap();
        let g = BzGrid::square(32).unwrap();
        let both = ParamStep { dm: 0.01, ddelta: 0.01 };
        assert!(matches!(pbs_midpoint(&p, both, &g, CellSize::Auto), Err(PlaneError::InvalidStep(_))));
        assert!(matches!(
            pbs_midpoint(&p, ParamStep::delta(1.0), &g, CellSize::Auto),
            Err(PlaneError::PhaseCrossing(_))
        ));
        let zero = pbs_midpoint(&p, ParamStep::delta(0.0), &g, CellSize::Auto).unwrap();
        assert!(zero.is_empty());
    }
}
