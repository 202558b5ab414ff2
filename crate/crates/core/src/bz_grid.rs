//! Uniform periodic lattice on the zone `[-pi, pi) x [-pi, pi)` and closed
//! momentum loops.

use crate::model::{wrap_angle, KPoint};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use thiserror::Error;

pub const MIN_RESOLUTION: usize = 16;
pub const MIN_LOOP_STEPS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("InvalidResolution: grid {nx}x{ny} is below the minimum of {MIN_RESOLUTION}")]
    InvalidResolution { nx: usize, ny: usize },
    #[error("OddResolution: grid {nx}x{ny} has no (pi, pi) lattice vector")]
    OddResolution { nx: usize, ny: usize },
    #[error("InvalidRadius: loop radius {0} outside (0, pi/4]")]
    InvalidRadius(f64),
    #[error("InvalidSteps: loop needs at least {MIN_LOOP_STEPS} points, got {0}")]
    InvalidSteps(usize),
}

/// Lattice cell index. Ordering is row-major: `ky` index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct GridIndex {
    pub ix: usize,
    pub iy: usize,
}

impl GridIndex {
    pub const fn new(ix: usize, iy: usize) -> Self {
        Self { ix, iy }
    }
}

impl Ord for GridIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.iy, self.ix).cmp(&(other.iy, other.ix))
    }
}

impl PartialOrd for GridIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BzGrid {
    nx: usize,
    ny: usize,
}

impl BzGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self, GridError> {
        if nx < MIN_RESOLUTION || ny < MIN_RESOLUTION {
            return Err(GridError::InvalidResolution { nx, ny });
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self, GridError> {
        Self::new(n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dkx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn dky(&self) -> f64 {
        2.0 * PI / self.ny as f64
    }

    pub fn kx(&self, ix: usize) -> f64 {
        -PI + ix as f64 * self.dkx()
    }

    pub fn ky(&self, iy: usize) -> f64 {
        -PI + iy as f64 * self.dky()
    }

    pub fn k(&self, ix: usize, iy: usize) -> KPoint {
        KPoint::new(self.kx(ix), self.ky(iy))
    }

    pub fn k_at(&self, g: GridIndex) -> KPoint {
        self.k(g.ix, g.iy)
    }

    /// Center of the cell whose lower-left corner is lattice point `(ix, iy)`.
    pub fn cell_center(&self, ix: usize, iy: usize) -> KPoint {
        KPoint::new(
            self.kx(ix) + 0.5 * self.dkx(),
            self.ky(iy) + 0.5 * self.dky(),
        )
    }

    /// Periodic wrap of signed indices.
    pub fn wrap(&self, ix: isize, iy: isize) -> GridIndex {
        GridIndex::new(
            ix.rem_euclid(self.nx as isize) as usize,
            iy.rem_euclid(self.ny as isize) as usize,
        )
    }

    /// Nearest lattice index to an arbitrary momentum.
    pub fn index_of(&self, k: KPoint) -> GridIndex {
        let fx = ((k.kx + PI) / self.dkx()).round() as isize;
        let fy = ((k.ky + PI) / self.dky()).round() as isize;
        self.wrap(fx, fy)
    }

    pub fn linear(&self, g: GridIndex) -> usize {
        g.iy * self.nx + g.ix
    }

    pub fn from_linear(&self, l: usize) -> GridIndex {
        GridIndex::new(l % self.nx, l / self.nx)
    }

    pub fn indices(&self) -> impl Iterator<Item = GridIndex> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| GridIndex::new(ix, iy)))
    }

    /// Flat-torus distance between two cells, in radians.
    pub fn torus_distance(&self, a: GridIndex, b: GridIndex) -> f64 {
        let dx = periodic_gap(a.ix, b.ix, self.nx) as f64 * self.dkx();
        let dy = periodic_gap(a.iy, b.iy, self.ny) as f64 * self.dky();
        dx.hypot(dy)
    }

    /// Largest possible flat-torus distance.
    pub fn diameter(&self) -> f64 {
        let dx = (self.nx / 2) as f64 * self.dkx();
        let dy = (self.ny / 2) as f64 * self.dky();
        dx.hypot(dy)
    }
}

pub(crate) fn periodic_gap(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Shifts every cell by `(nx/2, ny/2)`, the lattice image of `(pi, pi)`.
pub fn translate_pattern(
    cells: &BTreeSet<GridIndex>,
    grid: &BzGrid,
) -> Result<BTreeSet<GridIndex>, GridError> {
    if grid.nx % 2 != 0 || grid.ny % 2 != 0 {
        return Err(GridError::OddResolution { nx: grid.nx, ny: grid.ny });
    }
    let (sx, sy) = ((grid.nx / 2) as isize, (grid.ny / 2) as isize);
    Ok(cells
        .iter()
        .map(|g| grid.wrap(g.ix as isize + sx, g.iy as isize + sy))
        .collect())
}

/// Closed counterclockwise circle in momentum space.
#[derive(Debug, Clone, PartialEq)]
pub struct KLoop {
    pub center: KPoint,
    pub radius: f64,
    /// Points in traversal order; the last connects back to the first.
    pub points: Vec<KPoint>,
}

impl KLoop {
    pub fn n_steps(&self) -> usize {
        self.points.len()
    }

    /// Same loop traversed clockwise.
    pub fn reversed(&self) -> KLoop {
        let mut points = self.points.clone();
        points[1..].reverse();
        KLoop { center: self.center, radius: self.radius, points }
    }

    pub fn wrapped_points(&self) -> Vec<KPoint> {
        self.points.iter().map(|k| k.wrapped()).collect()
    }

    /// Shoelace area of the (unwrapped) polygon.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.points[i];
            let q = self.points[(i + 1) % n];
            a += p.kx * q.ky - q.kx * p.ky;
        }
        0.5 * a
    }
}

pub fn make_loop(center: KPoint, radius: f64, n_steps: usize) -> Result<KLoop, GridError> {
    if !(radius > 0.0 && radius <= PI / 4.0) {
        return Err(GridError::InvalidRadius(radius));
    }
    if n_steps < MIN_LOOP_STEPS {
        return Err(GridError::InvalidSteps(n_steps));
    }
    let points = (0..n_steps)
        .map(|s| {
            let a = 2.0 * PI * s as f64 / n_steps as f64;
            KPoint::new(center.kx + radius * a.cos(), center.ky + radius * a.sin())
        })
        .collect();
    Ok(KLoop { center, radius, points })
}

/// Flat-torus distance between two momenta.
pub fn torus_distance_k(a: KPoint, b: KPoint) -> f64 {
    wrap_angle(a.kx - b.kx).hypot(wrap_angle(a.ky - b.ky))
}
