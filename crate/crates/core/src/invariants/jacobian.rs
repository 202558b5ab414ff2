//! Jacobian of the map `k -> (E_R, E_I)`.
//!
//! From `E_R² - E_I² = eps` and `E_R E_I = |omega| / 2`:
//!
//! ```text
//! [ E_R  -E_I ] [ dE_R ]   [ d eps / 2      ]
//! [ E_I   E_R ] [ dE_I ] = [ d |omega| / 2  ]
//! ```
//!
//! so `J = M⁻¹ [∂eps/2, ∂|omega|/2]` with `det M = E_R² + E_I² = |E|²`. The
//! `|omega|` derivative carries `sgn(delta sin ky)`, which flips the
//! determinant sign on half of the zone relative to [`closed_form_det`].

use super::InvariantError;
use crate::bz_grid::{BzGrid, GridIndex};
use crate::model::{magnitudes, KPoint, ModelParams};
use std::collections::BTreeSet;

/// Smallest `|E|` at which the analytic Jacobian is evaluated.
pub const GAPLESS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianValue {
    /// `matrix[r][c] = ∂(E_R, E_I)[r] / ∂(kx, ky)[c]`
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
}

impl JacobianValue {
    fn from_matrix(matrix: [[f64; 2]; 2]) -> Self {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        Self { matrix, det }
    }
}

fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn jacobian_analytic(k: KPoint, p: &ModelParams) -> Result<JacobianValue, InvariantError> {
    let (t, m, d) = (p.t(), p.m(), p.delta());
    let (sx, cx) = k.kx.sin_cos();
    let (sy, cy) = k.ky.sin_cos();
    let (eps, omega) = p.eps_omega_trig(cx, cy, sy);
    let (er, ei, _) = magnitudes(eps, omega);
    let e2 = er * er + ei * ei;
    if e2.sqrt() <= GAPLESS_TOL {
        return Err(InvariantError::GaplessPoint { kx: k.kx, ky: k.ky });
    }
    // Half-derivatives of eps and |omega|.
    let ax = -t * sx * (t * cy + m);
    let ay = -t * sy * (t * cx + m);
    let by = t * d * cy * sgn(d * sy);
    let matrix = [
        [er * ax / e2, (er * ay + ei * by) / e2],
        [-ei * ax / e2, (-ei * ay + er * by) / e2],
    ];
    Ok(JacobianValue::from_matrix(matrix))
}

/// Central differences of `(E_R, E_I)` with step `h`.
pub fn jacobian_numeric(k: KPoint, p: &ModelParams, h: f64) -> Result<JacobianValue, InvariantError> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(InvariantError::InvalidStep(h));
    }
    let f = |kx: f64, ky: f64| {
        let (eps, omega) = p.eps_omega(KPoint::new(kx, ky));
        let (er, ei, _) = magnitudes(eps, omega);
        [er, ei]
    };
    let xp = f(k.kx + h, k.ky);
    let xm = f(k.kx - h, k.ky);
    let yp = f(k.kx, k.ky + h);
    let ym = f(k.kx, k.ky - h);
    let matrix = [
        [(xp[0] - xm[0]) / (2.0 * h), (yp[0] - ym[0]) / (2.0 * h)],
        [(xp[1] - xm[1]) / (2.0 * h), (yp[1] - ym[1]) / (2.0 * h)],
    ];
    Ok(JacobianValue::from_matrix(matrix))
}

/// `-delta t² (m + t cos ky) sin kx cos ky / |E|²`, without the
/// `sgn(delta sin ky)` factor.
pub fn closed_form_det(k: KPoint, p: &ModelParams) -> f64 {
    let (t, m, d) = (p.t(), p.m(), p.delta());
    let (eps, omega) = p.eps_omega(k);
    let e2 = eps.hypot(omega);
    -d * t * t * (m + t * k.ky.cos()) * k.kx.sin() * k.ky.cos() / e2
}

/// Default relative threshold of the zero locus.
pub const ZERO_LOCUS_REL: f64 = 1e-3;

/// Lattice points where the determinant vanishes.
///
/// A point belongs to the locus when `|det|` is below `rel` times its maximum
/// over the lattice, or when the closed form changes sign towards a
/// 4-neighbour and this point has the smaller magnitude of the two.
pub fn jacobian_zero_locus(p: &ModelParams, grid: &BzGrid, rel: f64) -> BTreeSet<GridIndex> {
    let vals: Vec<f64> = grid.indices().map(|g| closed_form_det(grid.k_at(g), p)).collect();
    let max = vals.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
    let thr = rel * max;
    let mut out = BTreeSet::new();
    for g in grid.indices() {
        let v = vals[grid.linear(g)];
        if !v.is_finite() || v.abs() < thr {
            out.insert(g);
            continue;
        }
        for (dx, dy) in [(1isize, 0isize), (0, 1)] {
            let n = grid.wrap(g.ix as isize + dx, g.iy as isize + dy);
            let w = vals[grid.linear(n)];
            if w.is_finite() && v * w < 0.0 {
                out.insert(if v.abs() <= w.abs() { g } else { n });
            }
        }
    }
    out
}
