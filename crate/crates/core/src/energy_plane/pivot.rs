//! Two-dimensional ball pivoting over a planar point cloud.
//!
//! A disk of fixed radius starts outside the leftmost point and is rolled
//! counterclockwise around the current pivot until it touches the next point.
//! The touched points form the outer boundary polygon.

use super::PlaneError;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

struct PointHash {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl PointHash {
    fn new(points: &[Complex64], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, z) in points.iter().enumerate() {
            buckets.entry(Self::key(*z, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(z: Complex64, cell: f64) -> (i64, i64) {
        ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64)
    }

    /// Indices within `r` of `z`; `r` must not exceed the hash cell.
    fn near(&self, points: &[Complex64], z: Complex64, r: f64, out: &mut Vec<usize>) {
        out.clear();
        let (kx, ky) = Self::key(z, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.buckets.get(&(kx + dx, ky + dy)) {
                    out.extend(v.iter().copied().filter(|&i| (points[i] - z).norm() <= r));
                }
            }
        }
    }
}

/// Distinct points, sorted for determinism.
pub fn dedup_points(points: &[Complex64]) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = points.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v.dedup();
    v
}

/// Median distance from each point to its nearest distinct neighbour.
pub fn median_nn_spacing(points: &[Complex64]) -> Option<f64> {
    nn_spacing_quantile(points, 0.5)
}

/// Quantile `q` in `[0, 1]` of the nearest-distinct-neighbour distances.
pub fn nn_spacing_quantile(points: &[Complex64], q: f64) -> Option<f64> {
    let pts = dedup_points(points);
    if pts.len() < 2 {
        return None;
    }
    let b = super::raster::Bounds::of(pts.iter().copied())?;
    let area = ((b.re_max - b.re_min) * (b.im_max - b.im_min)).max(1e-300);
    let mut cell = (area / pts.len() as f64).sqrt().max(b.diagonal() / 1e6);
    let mut nn = vec![f64::INFINITY; pts.len()];
    let mut buf = Vec::new();
    // Grow the search radius until every point has found a neighbour.
    for _ in 0..40 {
        let hash = PointHash::new(&pts, cell);
        let mut missing = false;
        for (i, z) in pts.iter().enumerate() {
            if nn[i].is_finite() {
                continue;
            }
            hash.near(&pts, *z, cell, &mut buf);
            let d = buf
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (pts[j] - z).norm())
                .fold(f64::INFINITY, f64::min);
            if d.is_finite() {
                nn[i] = d;
            } else {
                missing = true;
            }
        }
        if !missing {
            break;
        }
        cell *= 2.0;
    }
    nn.sort_by(f64::total_cmp);
    let i = ((q.clamp(0.0, 1.0) * nn.len() as f64) as usize).min(nn.len() - 1);
    Some(nn[i])
}

/// Traces the outer boundary polygon of `points` with a disk of `radius`.
pub fn ball_pivot(points: &[Complex64], radius: f64) -> Result<Vec<Complex64>, PlaneError> {
    let pts = dedup_points(points);
    if pts.len() < 3 {
        return Err(PlaneError::RadiusTooLarge { radius });
    }
    if !(radius > 0.0) {
        return Err(PlaneError::RadiusTooSmall { radius });
    }
    let hash = PointHash::new(&pts, 2.0 * radius);
    let start = 0usize; // leftmost after sorting
    let mut pivot = start;
    let mut center = pts[start] - Complex64::new(radius, 0.0);
    let mut polygon = vec![pts[start]];
    let mut buf = Vec::new();
    let max_steps = 4 * pts.len() + 16;
    for _ in 0..max_steps {
        let p = pts[pivot];
        hash.near(&pts, p, 2.0 * radius, &mut buf);
        let base = (center - p).arg();
        let mut best: Option<(f64, f64, usize, Complex64)> = None;
        for &q in buf.iter() {
            if q == pivot {
                continue;
            }
            let d = pts[q] - p;
            let len = d.norm();
            if len == 0.0 || len > 2.0 * radius {
                continue;
            }
            let h = (radius * radius - 0.25 * len * len).max(0.0).sqrt();
            let mid = p + d * 0.5;
            let perp = Complex64::new(-d.im, d.re) / len;
            for c in [mid + perp * h, mid - perp * h] {
                let mut a = ((c - p).arg() - base).rem_euclid(2.0 * PI);
                if a < 1e-12 {
                    a += 2.0 * PI;
                }
                let better = match best {
                    None => true,
                    Some((ba, bl, _, _)) => a < ba - 1e-12 || ((a - ba).abs() <= 1e-12 && len > bl),
                };
                if better {
                    best = Some((a, len, q, c));
                }
            }
        }
        let Some((_, _, q, c)) = best else {
            return Err(PlaneError::RadiusTooSmall { radius });
        };
        if q == start {
            return finish(polygon, radius);
        }
        polygon.push(pts[q]);
        pivot = q;
        center = c;
    }
    Err(PlaneError::RadiusTooSmall { radius })
}

fn finish(polygon: Vec<Complex64>, radius: f64) -> Result<Vec<Complex64>, PlaneError> {
    if polygon.len() < 3 || polygon_area(&polygon).abs() == 0.0 {
        return Err(PlaneError::RadiusTooLarge { radius });
    }
    Ok(polygon)
}

pub fn polygon_area(poly: &[Complex64]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        a += cross(poly[i], poly[(i + 1) % n]);
    }
    0.5 * a
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_corners() {
        let pts = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ];
        let poly = ball_pivot(&pts, 0.75).unwrap();
        assert_eq!(poly.len(), 4);
        assert!(polygon_area(&poly).abs() > 0.99);
    }

    #[test]
    fn radius_limits() {
        let pts = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert!(matches!(ball_pivot(&pts, 0.1), Err(PlaneError::RadiusTooSmall { .. })));
        let line = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        assert!(matches!(ball_pivot(&line, 5.0), Err(PlaneError::RadiusTooLarge { .. })));
    }

    #[test]
    fn disk_cloud_boundary_is_outer_ring() {
        let mut pts = Vec::new();
        for r in 1..=10 {
            let n = 8 * r;
            for s in 0..n {
                let a = 2.0 * PI * s as f64 / n as f64;
                pts.push(Complex64::from_polar(r as f64 * 0.1, a));
            }
        }
        let nn = median_nn_spacing(&pts).unwrap();
        let poly = ball_pivot(&pts, 3.0 * nn).unwrap();
        for z in &poly {
            assert!((z.norm() - 1.0).abs() < 1e-9);
        }
        assert!(poly.len() >= 60);
    }
}
