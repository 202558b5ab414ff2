//! Piecewise-linear image of the zone lattice in the energy plane.
//!
//! Every lattice quad is split into two triangles and each triangle is mapped
//! through one band. The union of the image triangles approximates the band
//! region, and its outer edges are exact for the discretized map: a lattice
//! edge lies on the region boundary when both of its triangles sit on the same
//! side of the image edge (a fold) and nothing covers the other side.
//!
//! Triangles that straddle the jump of the branch sign (where `E²` crosses the
//! negative real axis) are not part of the surface and are dropped; the lattice
//! edges next to them become open edges.

use super::raster::Bounds;
use crate::bz_grid::{BzGrid, GridIndex};
use crate::model::{magnitudes, ModelParams, Sign};
use num_complex::Complex64;
use rayon::prelude::*;

/// Distance below which a point counts as lying on a triangle edge.
pub const EDGE_TOL: f64 = 1e-12;

/// Probe offset for the exposure test, relative to the image diameter.
const PROBE_REL: f64 = 1e-9;

/// Directions probed around a fold vertex.
const VERTEX_PROBES: usize = 32;

enum EdgeExposure {
    Covered,
    Exposed,
    /// Both triangles on one side but the midpoint probe is covered.
    Fold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    OnBoundary,
    Outside,
}

#[derive(Debug, Clone)]
pub struct ImageMesh {
    grid: BzGrid,
    band: Sign,
    verts: Vec<Complex64>,
    eps: Vec<f64>,
    upper_branch: Vec<bool>,
    torn: Vec<bool>,
    bounds: Bounds,
    bucket: f64,
    nbx: usize,
    nby: usize,
    bucket_start: Vec<u32>,
    bucket_tris: Vec<u32>,
}

#[inline]
fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

#[inline]
fn orient(u: Complex64, w: Complex64, v: Complex64) -> f64 {
    cross(w - u, v - u)
}

fn locate(z: Complex64, a: Complex64, b: Complex64, c: Complex64) -> Containment {
    let (b, c) = if orient(a, b, c) < 0.0 { (c, b) } else { (b, c) };
    let area2 = orient(a, b, c);
    let edges = [(a, b), (b, c), (c, a)];
    let longest = edges.iter().map(|(p, q)| (q - p).norm()).fold(0.0, f64::max);
    if longest == 0.0 {
        return if (z - a).norm() <= EDGE_TOL { Containment::OnBoundary } else { Containment::Outside };
    }
    if area2 <= EDGE_TOL * longest {
        // Needle or collinear triangle: only its segments can hold the point.
        let near = edges.iter().any(|&(p, q)| segment_distance(z, p, q) <= EDGE_TOL);
        return if near { Containment::OnBoundary } else { Containment::Outside };
    }
    let mut min_d = f64::INFINITY;
    for (p, q) in edges {
        let len = (q - p).norm();
        if len == 0.0 {
            continue;
        }
        let d = cross(q - p, z - p) / len;
        if d < -EDGE_TOL {
            return Containment::Outside;
        }
        min_d = min_d.min(d);
    }
    if min_d > EDGE_TOL {
        Containment::Inside
    } else {
        Containment::OnBoundary
    }
}

pub(crate) fn segment_distance(z: Complex64, p: Complex64, q: Complex64) -> f64 {
    let d = q - p;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (z - p).norm();
    }
    let s = (((z - p).re * d.re + (z - p).im * d.im) / l2).clamp(0.0, 1.0);
    (z - (p + d * s)).norm()
}

impl ImageMesh {
    /// Builds the image surface of `band`; `bucket` is the spatial-hash cell.
    pub fn build(p: &ModelParams, grid: BzGrid, band: Sign, bucket: Option<f64>) -> ImageMesh {
        let (nx, ny) = (grid.nx(), grid.ny());
        let tx: Vec<f64> = (0..nx).map(|i| grid.kx(i).cos()).collect();
        let rows: Vec<Vec<(Complex64, f64, bool)>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let (sy, cy) = grid.ky(j).sin_cos();
                tx.iter()
                    .map(|&cx| {
                        let (eps, omega) = p.eps_omega_trig(cx, cy, sy);
                        let (er, ei, sigma) = magnitudes(eps, omega);
                        let e = Complex64::new(er, sigma.as_f64() * ei) * band.as_f64();
                        (e, eps, sigma == Sign::Plus)
                    })
                    .collect()
            })
            .collect();
        let mut verts = Vec::with_capacity(nx * ny);
        let mut eps = Vec::with_capacity(nx * ny);
        let mut upper_branch = Vec::with_capacity(nx * ny);
        for row in rows {
            for (e, x, s) in row {
                verts.push(e);
                eps.push(x);
                upper_branch.push(s);
            }
        }
        Self::from_vertices(grid, band, verts, eps, upper_branch, bucket)
    }

    fn from_vertices(
        grid: BzGrid,
        band: Sign,
        verts: Vec<Complex64>,
        eps: Vec<f64>,
        upper_branch: Vec<bool>,
        bucket: Option<f64>,
    ) -> ImageMesh {
        let bounds = Bounds::of(verts.iter().copied()).expect("grid has vertices");
        let mut mesh = ImageMesh {
            grid,
            band,
            verts,
            eps,
            upper_branch,
            torn: Vec::new(),
            bounds,
            bucket: 1.0,
            nbx: 1,
            nby: 1,
            bucket_start: Vec::new(),
            bucket_tris: Vec::new(),
        };
        mesh.torn = (0..2 * grid.len()).map(|t| mesh.triangle_is_torn(t)).collect();
        let diag = bounds.diagonal().max(1e-300);
        let bucket = bucket.filter(|b| *b > 0.0).unwrap_or(diag / 500.0).max(diag / 4000.0);
        mesh.bucket = bucket;
        mesh.nbx = (((bounds.re_max - bounds.re_min) / bucket).floor() as usize + 1).max(1);
        mesh.nby = (((bounds.im_max - bounds.im_min) / bucket).floor() as usize + 1).max(1);
        mesh.build_index();
        mesh
    }

    pub fn grid(&self) -> &BzGrid {
        &self.grid
    }

    pub fn band(&self) -> Sign {
        self.band
    }

    pub fn vertex(&self, g: GridIndex) -> Complex64 {
        self.verts[self.grid.linear(g)]
    }

    fn triangle(&self, t: usize) -> [usize; 3] {
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let q = t / 2;
        let (i, j) = (q % nx, q / nx);
        let i1 = (i + 1) % nx;
        let j1 = (j + 1) % ny;
        let a = j * nx + i;
        let b = j * nx + i1;
        let c = j1 * nx + i1;
        let d = j1 * nx + i;
        if t % 2 == 0 {
            [a, b, c]
        } else {
            [a, c, d]
        }
    }

    fn edge_is_torn(&self, u: usize, w: usize) -> bool {
        self.upper_branch[u] != self.upper_branch[w] && self.eps[u] + self.eps[w] < 0.0
    }

    fn triangle_is_torn(&self, t: usize) -> bool {
        let [a, b, c] = self.triangle(t);
        self.edge_is_torn(a, b) || self.edge_is_torn(b, c) || self.edge_is_torn(c, a)
    }

    pub fn torn_triangle_count(&self) -> usize {
        self.torn.iter().filter(|&&x| x).count()
    }

    fn bucket_range(&self, lo: Complex64, hi: Complex64) -> (usize, usize, usize, usize) {
        let f = |v: f64, o: f64, n: usize| (((v - o) / self.bucket).floor().max(0.0) as usize).min(n - 1);
        (
            f(lo.re, self.bounds.re_min, self.nbx),
            f(hi.re, self.bounds.re_min, self.nbx),
            f(lo.im, self.bounds.im_min, self.nby),
            f(hi.im, self.bounds.im_min, self.nby),
        )
    }

    fn build_index(&mut self) {
        let nb = self.nbx * self.nby;
        let ntri = self.torn.len();
        let mut counts = vec![0u32; nb + 1];
        let mut spans = Vec::with_capacity(ntri);
        for t in 0..ntri {
            if self.torn[t] {
                spans.push(None);
                continue;
            }
            let [a, b, c] = self.triangle(t).map(|v| self.verts[v]);
            let lo = Complex64::new(a.re.min(b.re).min(c.re) - EDGE_TOL, a.im.min(b.im).min(c.im) - EDGE_TOL);
            let hi = Complex64::new(a.re.max(b.re).max(c.re) + EDGE_TOL, a.im.max(b.im).max(c.im) + EDGE_TOL);
            let r = self.bucket_range(lo, hi);
            for by in r.2..=r.3 {
                for bx in r.0..=r.1 {
                    counts[by * self.nbx + bx + 1] += 1;
                }
            }
            spans.push(Some(r));
        }
        for i in 0..nb {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut tris = vec![0u32; counts[nb] as usize];
        for (t, span) in spans.into_iter().enumerate() {
            if let Some(r) = span {
                for by in r.2..=r.3 {
                    for bx in r.0..=r.1 {
                        let slot = by * self.nbx + bx;
                        tris[fill[slot] as usize] = t as u32;
                        fill[slot] += 1;
                    }
                }
            }
        }
        self.bucket_start = counts;
        self.bucket_tris = tris;
    }

    /// Location of `z` relative to the union of image triangles.
    pub fn contains(&self, z: Complex64) -> Containment {
        let b = &self.bounds;
        let pad = EDGE_TOL;
        if z.re < b.re_min - pad || z.re > b.re_max + pad || z.im < b.im_min - pad || z.im > b.im_max + pad {
            return Containment::Outside;
        }
        let (bx, _, by, _) = self.bucket_range(z, z);
        let slot = by * self.nbx + bx;
        let mut result = Containment::Outside;
        for &t in &self.bucket_tris[self.bucket_start[slot] as usize..self.bucket_start[slot + 1] as usize] {
            let [a, bb, c] = self.triangle(t as usize).map(|v| self.verts[v]);
            match locate(z, a, bb, c) {
                Containment::Inside => return Containment::Inside,
                Containment::OnBoundary => result = Containment::OnBoundary,
                Containment::Outside => {}
            }
        }
        result
    }

    /// Same as [`contains`](Self::contains), trying first the triangles
    /// around lattice vertex `hint`, which hold `z` whenever it is the
    /// image of that vertex under a slightly different map.
    pub fn contains_near(&self, z: Complex64, hint: usize) -> Containment {
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let (i, j) = (hint % nx, hint / nx);
        let (im, jm) = ((i + nx - 1) % nx, (j + ny - 1) % ny);
        let q = |a: usize, b: usize| b * nx + a;
        let around = [
            2 * q(i, j),
            2 * q(i, j) + 1,
            2 * q(im, j),
            2 * q(i, jm) + 1,
            2 * q(im, jm),
            2 * q(im, jm) + 1,
        ];
        for t in around {
            if self.torn[t] {
                continue;
            }
            let [a, b, c] = self.triangle(t).map(|v| self.verts[v]);
            if locate(z, a, b, c) == Containment::Inside {
                return Containment::Inside;
            }
        }
        self.contains(z)
    }

    /// Lattice points whose image lies on the outer boundary of the union.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        self.boundary_vertices_among(|_| true)
    }

    /// Same as [`boundary_vertices`](Self::boundary_vertices), testing only
    /// edges with an endpoint accepted by `keep` and only accepted vertices.
    pub fn boundary_vertices_among<F: Fn(usize) -> bool + Sync>(&self, keep: F) -> Vec<bool> {
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let probe = PROBE_REL * self.bounds.diagonal().max(1e-300);
        let lin = |i: usize, j: usize| (j % ny) * nx + (i % nx);
        let hits: Vec<Vec<(usize, usize, bool)>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let mut out = Vec::new();
                let jm = (j + ny - 1) % ny;
                for i in 0..nx {
                    let im = (i + nx - 1) % nx;
                    let q = j * nx + i;
                    // Horizontal edge (i,j)-(i+1,j).
                    let h = (lin(i, j), lin(i + 1, j), (2 * q, lin(i + 1, j + 1)), (2 * (jm * nx + i) + 1, lin(i, jm)));
                    // Vertical edge (i,j)-(i,j+1).
                    let v = (lin(i, j), lin(i, j + 1), (2 * q + 1, lin(i + 1, j + 1)), (2 * (j * nx + im), lin(im, j)));
                    // Diagonal edge (i,j)-(i+1,j+1).
                    let d = (lin(i, j), lin(i + 1, j + 1), (2 * q, lin(i + 1, j)), (2 * q + 1, lin(i, j + 1)));
                    for (u, w, t1, t2) in [h, v, d] {
                        if !(keep(u) || keep(w)) {
                            continue;
                        }
                        match self.edge_exposure(u, w, t1, t2, probe) {
                            EdgeExposure::Covered => {}
                            EdgeExposure::Exposed => out.push((u, w, true)),
                            EdgeExposure::Fold => out.push((u, w, false)),
                        }
                    }
                }
                out
            })
            .collect();
        let mut flags = vec![false; self.verts.len()];
        let mut fold_ends = Vec::new();
        for row in hits {
            for (u, w, exposed) in row {
                if exposed {
                    flags[u] = true;
                    flags[w] = true;
                } else {
                    fold_ends.push(u);
                    fold_ends.push(w);
                }
            }
        }
        // A fold whose edges are covered by another sheet can still touch the
        // outside at a single vertex.
        fold_ends.sort_unstable();
        fold_ends.dedup();
        fold_ends.retain(|&u| !flags[u] && keep(u));
        let touching: Vec<usize> = fold_ends
            .into_par_iter()
            .filter(|&u| {
                (0..VERTEX_PROBES).any(|a| {
                    let dir = Complex64::from_polar(probe, 2.0 * std::f64::consts::PI * a as f64 / VERTEX_PROBES as f64);
                    self.contains(self.verts[u] + dir) == Containment::Outside
                })
            })
            .collect();
        for u in touching {
            flags[u] = true;
        }
        flags
    }

    fn edge_exposure(&self, u: usize, w: usize, t1: (usize, usize), t2: (usize, usize), probe: f64) -> EdgeExposure {
        let alive1 = !self.torn[t1.0];
        let alive2 = !self.torn[t2.0];
        if !alive1 && !alive2 {
            return EdgeExposure::Covered;
        }
        let (eu, ew) = (self.verts[u], self.verts[w]);
        let dir = ew - eu;
        let len = dir.norm();
        if len == 0.0 {
            return EdgeExposure::Covered;
        }
        let o1 = if alive1 { orient(eu, ew, self.verts[t1.1]) } else { 0.0 };
        let o2 = if alive2 { orient(eu, ew, self.verts[t2.1]) } else { 0.0 };
        if alive1 && alive2 && o1 * o2 < 0.0 {
            return EdgeExposure::Covered;
        }
        // Side holding the attached triangles; zero means unknown.
        let inner = if o1 != 0.0 { o1.signum() } else { o2.signum() };
        let normal = Complex64::new(-dir.im, dir.re) / len;
        let mid = (eu + ew) * 0.5;
        let sides: &[f64] = if inner == 0.0 { &[1.0, -1.0] } else { &[-inner] };
        if sides
            .iter()
            .any(|&s| self.contains(mid + normal * (s * probe)) == Containment::Outside)
        {
            EdgeExposure::Exposed
        } else {
            EdgeExposure::Fold
        }
    }
}
