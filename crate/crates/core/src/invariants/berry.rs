//! Berry curvature of the normalized Bloch vector and its zone integral.
//!
//! With `h·h` the bilinear square, `Ω± = ∓ h·(∂x h × ∂y h) / (2 (h·h)^{3/2})`.
//! The half-integer power needs a square-root branch. Pointwise evaluation
//! uses the principal branch. The zone integral needs a branch that is
//! continuous over the whole zone, otherwise a sign jump of `sqrt(h·h)` leaks
//! into the sum; [`chern_number`] therefore places the cut inside the widest
//! angular gap of the sampled `h·h` values.

use super::InvariantError;
use crate::bz_grid::BzGrid;
use crate::model::{bloch_vector, KPoint, ModelParams, Sign};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Smallest `|h·h|` accepted for normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Branch of `sqrt(z)`: `arg z` is taken in `(cut - 2 pi, cut]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SqrtBranch {
    Principal,
    Cut(f64),
}

impl SqrtBranch {
    pub fn sqrt(self, z: Complex64) -> Complex64 {
        match self {
            SqrtBranch::Principal => z.sqrt(),
            SqrtBranch::Cut(cut) => {
                let mut a = z.arg();
                while a > cut {
                    a -= 2.0 * PI;
                }
                while a <= cut - 2.0 * PI {
                    a += 2.0 * PI;
                }
                Complex64::from_polar(z.norm().sqrt(), 0.5 * a)
            }
        }
    }
}

/// `h·h` and the triple product `h·(∂x h × ∂y h)`.
fn curvature_parts(k: KPoint, p: &ModelParams) -> (Complex64, Complex64) {
    let h = bloch_vector(k, p);
    let t = p.t();
    let (sx, cx) = k.kx.sin_cos();
    let (sy, cy) = k.ky.sin_cos();
    let cross = [t * t * sx * cy, t * t * cx * sy, t * t * cx * cy];
    let triple = h.hx * cross[0] + h.hy * cross[1] + h.hz * cross[2];
    (h.dot_self(), triple)
}

pub fn berry_curvature(k: KPoint, p: &ModelParams, band: Sign) -> Result<Complex64, InvariantError> {
    berry_curvature_on(k, p, band, SqrtBranch::Principal)
}

pub fn berry_curvature_on(
    k: KPoint,
    p: &ModelParams,
    band: Sign,
    branch: SqrtBranch,
) -> Result<Complex64, InvariantError> {
    let (hh, triple) = curvature_parts(k, p);
    if hh.norm() < NORMALIZATION_TOL {
        return Err(InvariantError::NormalizationSingular { kx: k.kx, ky: k.ky });
    }
    let s = branch.sqrt(hh);
    Ok(-band.as_f64() * 0.5 * triple / (hh * s))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChernResult {
    pub value: Complex64,
    pub band: Sign,
    pub nx: usize,
    pub ny: usize,
    /// `|Re C - round(Re C)|`
    pub residual: f64,
    pub im_abs: f64,
    pub branch: SqrtBranch,
    /// False when `h·h` winds around the origin, so no zone-wide continuous
    /// branch exists and the principal branch was used.
    pub continuous_branch: bool,
}

/// Cut direction lying in the widest gap of `args`, or `None` if the gap
/// already contains `pi` (the principal cut) or there is no usable gap.
fn gap_cut(args: &mut [f64]) -> (SqrtBranch, bool) {
    args.sort_by(f64::total_cmp);
    let n = args.len();
    let mut best = (args[0] + 2.0 * PI - args[n - 1], args[n - 1]);
    for w in args.windows(2) {
        let g = w[1] - w[0];
        if g > best.0 {
            best = (g, w[0]);
        }
    }
    let (width, from) = best;
    if width < 1e-6 {
        return (SqrtBranch::Principal, false);
    }
    let contains_pi = {
        let to = from + width;
        (from < PI && PI < to) || (from < -PI && -PI < to)
    };
    if contains_pi {
        (SqrtBranch::Principal, true)
    } else {
        (SqrtBranch::Cut(from + 0.5 * width), true)
    }
}

/// Midpoint quadrature of the Berry curvature over the lattice cell centers.
pub fn chern_number(p: &ModelParams, band: Sign, grid: &BzGrid) -> Result<ChernResult, InvariantError> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut parts = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.cell_center(i, j);
            let (hh, triple) = curvature_parts(k, p);
            if hh.norm() < NORMALIZATION_TOL {
                return Err(InvariantError::NormalizationSingular { kx: k.kx, ky: k.ky });
            }
            parts.push((hh, triple));
        }
    }
    let mut args: Vec<f64> = parts.iter().map(|(hh, _)| hh.arg()).collect();
    let (branch, continuous_branch) = gap_cut(&mut args);
    let mut sum = Complex64::new(0.0, 0.0);
    for (hh, triple) in &parts {
        let s = branch.sqrt(*hh);
        sum += -band.as_f64() * 0.5 * triple / (hh * s);
    }
    let value = sum * (grid.dkx() * grid.dky()) / (2.0 * PI);
    Ok(ChernResult {
        value,
        band,
        nx,
        ny,
        residual: (value.re - value.re.round()).abs(),
        im_abs: value.im.abs(),
        branch,
        continuous_branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_branch_matches_principal_away_from_cut() {
        let z = Complex64::new(-1.0, 0.5);
        assert!((SqrtBranch::Cut(PI).sqrt(z) - z.sqrt()).norm() < 1e-15);
        let w = SqrtBranch::Cut(0.0).sqrt(Complex64::new(-1.0, 1e-9));
        assert!(w.im < 0.0);
    }

    #[test]
    fn hermitian_curvature_is_real() {
        let p = ModelParams::unit(0.5, 0.0).unwrap();
        for &(kx, ky) in &[(0.3, 0.2), (1.0, -2.0), (-2.5, 0.7)] {
            let o = berry_curvature(KPoint::new(kx, ky), &p, Sign::Plus).unwrap();
            assert!(o.im.abs() < 1e-14);
        }
    }

    #[test]
    fn bands_are_opposite() {
        let p = ModelParams::unit(0.5, 0.25).unwrap();
        let k = KPoint::new(0.4, -1.1);
        let a = berry_curvature(k, &p, Sign::Plus).unwrap();
        let b = berry_curvature(k, &p, Sign::Minus).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn singular_normalization() {
        let p = ModelParams::unit(0.5, 1.0).unwrap();
        let ep = crate::model::exceptional_points(&p)[0];
        assert!(matches!(
            berry_curvature(ep, &p, Sign::Plus),
            Err(InvariantError::NormalizationSingular { .. })
        ));
    }
}
