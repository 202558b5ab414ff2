//! Occupancy raster of the complex energy plane and its 4-adjacency boundary.

use super::{BandSample, PlaneError};
use crate::bz_grid::GridIndex;
use crate::model::Sign;
use num_complex::Complex64;
use std::collections::BTreeSet;

/// Default cell is the bounding-box diagonal over this.
pub const AUTO_CELL_DIVISOR: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellSize {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for CellSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(CellSize::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("expected 'auto' or a number, got '{s}'"))?;
        if v > 0.0 && v.is_finite() {
            Ok(CellSize::Fixed(v))
        } else {
            Err(format!("cell must be positive, got {v}"))
        }
    }
}

impl std::fmt::Display for CellSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellSize::Auto => write!(f, "auto"),
            CellSize::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
enum CellRepr {
    Number(f64),
    Text(String),
}

impl serde::Serialize for CellSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CellSize::Auto => CellRepr::Text("auto".into()).serialize(s),
            CellSize::Fixed(v) => CellRepr::Number(*v).serialize(s),
        }
    }
}

impl<'de> serde::Deserialize<'de> for CellSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match CellRepr::deserialize(d)? {
            CellRepr::Number(v) => v.to_string().parse(),
            CellRepr::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Bounds {
    pub fn of(points: impl IntoIterator<Item = Complex64>) -> Option<Bounds> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Bounds { re_min: first.re, re_max: first.re, im_min: first.im, im_max: first.im };
        for z in it {
            b.re_min = b.re_min.min(z.re);
            b.re_max = b.re_max.max(z.re);
            b.im_min = b.im_min.min(z.im);
            b.im_max = b.im_max.max(z.im);
        }
        Some(b)
    }

    pub fn diagonal(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// Cell layout shared by rasters and boundary cell sets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RasterGeometry {
    pub bounds: Bounds,
    pub cell: f64,
    pub nre: usize,
    pub nim: usize,
}

impl RasterGeometry {
    /// Fits padded bounds around `points`.
    ///
    /// Each axis is padded by 2% of its extent, and by at least one cell, so
    /// that no occupied cell touches the raster edge.
    pub fn fit(points: &[Complex64], cell: CellSize) -> Result<Self, PlaneError> {
        let raw = Bounds::of(points.iter().copied()).ok_or(PlaneError::DegenerateBounds)?;
        let cell = match cell {
            CellSize::Fixed(c) if c > 0.0 && c.is_finite() => c,
            CellSize::Fixed(c) => return Err(PlaneError::InvalidCell(c)),
            CellSize::Auto => {
                let d = raw.diagonal();
                if !(d > 0.0) {
                    return Err(PlaneError::DegenerateBounds);
                }
                d / AUTO_CELL_DIVISOR
            }
        };
        let pad_re = (0.02 * (raw.re_max - raw.re_min)).max(cell);
        let pad_im = (0.02 * (raw.im_max - raw.im_min)).max(cell);
        let bounds = Bounds {
            re_min: raw.re_min - pad_re,
            re_max: raw.re_max + pad_re,
            im_min: raw.im_min - pad_im,
            im_max: raw.im_max + pad_im,
        };
        let nre = ((bounds.re_max - bounds.re_min) / cell).ceil().max(1.0) as usize;
        let nim = ((bounds.im_max - bounds.im_min) / cell).ceil().max(1.0) as usize;
        Ok(Self { bounds, cell, nre, nim })
    }

    pub fn cell_of(&self, z: Complex64) -> Option<PlaneCell> {
        if !self.bounds.contains(z) {
            return None;
        }
        let ire = (((z.re - self.bounds.re_min) / self.cell) as usize).min(self.nre - 1);
        let iim = (((z.im - self.bounds.im_min) / self.cell) as usize).min(self.nim - 1);
        Some(PlaneCell { ire, iim })
    }

    pub fn cell_center(&self, c: PlaneCell) -> Complex64 {
        Complex64::new(
            self.bounds.re_min + (c.ire as f64 + 0.5) * self.cell,
            self.bounds.im_min + (c.iim as f64 + 0.5) * self.cell,
        )
    }

    pub fn linear(&self, c: PlaneCell) -> usize {
        c.iim * self.nre + c.ire
    }

    pub fn n_cells(&self) -> usize {
        self.nre * self.nim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct PlaneCell {
    pub ire: usize,
    pub iim: usize,
}

/// Occupancy and back-map of one band, CSR layout.
#[derive(Debug, Clone)]
struct Layer {
    start: Vec<u32>,
    members: Vec<GridIndex>,
}

#[derive(Debug, Clone)]
pub struct PlaneRaster {
    pub geometry: RasterGeometry,
    layers: [Layer; 2],
}

fn layer_of(band: Sign) -> usize {
    match band {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

impl PlaneRaster {
    pub fn occupied(&self, band: Sign, c: PlaneCell) -> bool {
        let l = &self.layers[layer_of(band)];
        let i = self.geometry.linear(c);
        l.start[i + 1] > l.start[i]
    }

    /// BZ indices whose sample of `band` falls in cell `c`.
    pub fn backmap(&self, band: Sign, c: PlaneCell) -> &[GridIndex] {
        let l = &self.layers[layer_of(band)];
        let i = self.geometry.linear(c);
        &l.members[l.start[i] as usize..l.start[i + 1] as usize]
    }

    pub fn occupied_cells(&self, band: Sign) -> impl Iterator<Item = PlaneCell> + '_ {
        let g = self.geometry;
        (0..g.nim)
            .flat_map(move |iim| (0..g.nre).map(move |ire| PlaneCell { ire, iim }))
            .filter(move |&c| self.occupied(band, c))
    }

    pub fn occupied_count(&self, band: Sign) -> usize {
        self.occupied_cells(band).count()
    }

    /// Occupancy of a signed cell index; outside the raster counts as empty.
    fn occupied_signed(&self, band: Sign, ire: isize, iim: isize) -> bool {
        let g = &self.geometry;
        if ire < 0 || iim < 0 || ire >= g.nre as isize || iim >= g.nim as isize {
            return false;
        }
        self.occupied(band, PlaneCell { ire: ire as usize, iim: iim as usize })
    }
}

/// Bins samples into square cells; each band gets its own layer.
pub fn rasterize(samples: &[BandSample], cell: CellSize) -> Result<PlaneRaster, PlaneError> {
    let pts: Vec<Complex64> = samples.iter().map(|s| s.e).collect();
    let geometry = RasterGeometry::fit(&pts, cell)?;
    let n = geometry.n_cells();
    let mut layers = Vec::with_capacity(2);
    for band in [Sign::Plus, Sign::Minus] {
        let mut counts = vec![0u32; n + 1];
        let mut slots = Vec::new();
        for s in samples.iter().filter(|s| s.band == band) {
            // Bounds are fitted to these samples, so every sample has a cell.
            let c = geometry.cell_of(s.e).expect("sample inside fitted bounds");
            let i = geometry.linear(c);
            counts[i + 1] += 1;
            slots.push((i, s.k));
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut members = vec![GridIndex::new(0, 0); slots.len()];
        for (i, k) in slots {
            members[fill[i] as usize] = k;
            fill[i] += 1;
        }
        layers.push(Layer { start: counts, members });
    }
    let minus = layers.pop().unwrap();
    let plus = layers.pop().unwrap();
    Ok(PlaneRaster { geometry, layers: [plus, minus] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundaryMethod {
    RasterAdjacency,
    BallPivot,
}

impl std::fmt::Display for BoundaryMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryMethod::RasterAdjacency => write!(f, "raster-adjacency"),
            BoundaryMethod::BallPivot => write!(f, "ball-pivot"),
        }
    }
}

/// Boundary cells of each band region.
#[derive(Debug, Clone)]
pub struct BoundarySet {
    pub method: BoundaryMethod,
    pub geometry: RasterGeometry,
    pub plus: BTreeSet<PlaneCell>,
    pub minus: BTreeSet<PlaneCell>,
}

impl BoundarySet {
    pub fn band(&self, band: Sign) -> &BTreeSet<PlaneCell> {
        match band {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 8-connected components of the union over both bands.
    pub fn components(&self) -> Vec<BTreeSet<PlaneCell>> {
        let all: BTreeSet<PlaneCell> = self.plus.union(&self.minus).copied().collect();
        components_8(&all)
    }
}

pub fn components_8(cells: &BTreeSet<PlaneCell>) -> Vec<BTreeSet<PlaneCell>> {
    let mut seen: BTreeSet<PlaneCell> = BTreeSet::new();
    let mut out = Vec::new();
    for &c in cells {
        if seen.contains(&c) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![c];
        seen.insert(c);
        while let Some(x) = stack.pop() {
            comp.insert(x);
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let (a, b) = (x.ire as isize + di, x.iim as isize + dj);
                    if a < 0 || b < 0 {
                        continue;
                    }
                    let y = PlaneCell { ire: a as usize, iim: b as usize };
                    if cells.contains(&y) && seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Occupied cells with at least one empty 4-neighbour.
pub fn extract_boundary(raster: &PlaneRaster) -> Result<BoundarySet, PlaneError> {
    let mut sets = [BTreeSet::new(), BTreeSet::new()];
    for (slot, band) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
        for c in raster.occupied_cells(band) {
            let (i, j) = (c.ire as isize, c.iim as isize);
            let exposed = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                .iter()
                .any(|&(a, b)| !raster.occupied_signed(band, a, b));
            if exposed {
                sets[slot].insert(c);
            }
        }
    }
    if sets[0].is_empty() && sets[1].is_empty() {
        return Err(PlaneError::EmptyRaster);
    }
    let [plus, minus] = sets;
    Ok(BoundarySet { method: BoundaryMethod::RasterAdjacency, geometry: raster.geometry, plus, minus })
}

/// Cells within Chebyshev distance `r` of any cell in `cells`.
pub fn dilate_cells(cells: &BTreeSet<PlaneCell>, r: usize) -> BTreeSet<PlaneCell> {
    let r = r as isize;
    let mut out = BTreeSet::new();
    for c in cells {
        for di in -r..=r {
            for dj in -r..=r {
                let (a, b) = (c.ire as isize + di, c.iim as isize + dj);
                if a >= 0 && b >= 0 {
                    out.insert(PlaneCell { ire: a as usize, iim: b as usize });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(re: f64, im: f64) -> BandSample {
        BandSample { k: GridIndex::new(0, 0), band: Sign::Plus, e: Complex64::new(re, im) }
    }

    #[test]
    fn one_sample_one_cell() {
        let r = rasterize(&[sample(0.3, 0.4)], CellSize::Fixed(0.1)).unwrap();
        assert_eq!(r.occupied_count(Sign::Plus), 1);
        assert_eq!(r.occupied_count(Sign::Minus), 0);
        let b = extract_boundary(&r).unwrap();
        assert_eq!(b.plus.len(), 1);
        assert!(matches!(rasterize(&[sample(0.3, 0.4)], CellSize::Auto), Err(PlaneError::DegenerateBounds)));
        assert!(matches!(rasterize(&[], CellSize::Fixed(0.1)), Err(PlaneError::DegenerateBounds)));
    }

    #[test]
    fn filled_block_ring() {
        let mut s = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                s.push(sample(i as f64 + 0.5, j as f64 + 0.5));
            }
        }
        let r = rasterize(&s, CellSize::Fixed(1.0)).unwrap();
        assert_eq!(r.occupied_count(Sign::Plus), 100);
        let b = extract_boundary(&r).unwrap();
        assert_eq!(b.plus.len(), 36);
        let total: usize = r.occupied_cells(Sign::Plus).map(|c| r.backmap(Sign::Plus, c).len()).sum();
        assert_eq!(total, 100);
        assert_eq!(b.components().len(), 1);
    }

    #[test]
    fn parse_cell_size() {
        assert_eq!("auto".parse::<CellSize>().unwrap(), CellSize::Auto);
        assert_eq!("0.02".parse::<CellSize>().unwrap(), CellSize::Fixed(0.02));
        assert!("-1".parse::<CellSize>().is_err());
    }
}
