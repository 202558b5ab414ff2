//! Two-band non-Hermitian Chern insulator.
//!
//! The Bloch vector is `h(k) = (t sin kx, t sin ky - i delta, m + t cos kx + t cos ky)`
//! and the bands are `E = ±sqrt(h·h)` with the bilinear (unconjugated) product.
//! Energies are built from the closed-form magnitudes `E_R`, `E_I` and a sign
//! `sigma` that follows the imaginary part of `E²`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Eigenvector normalization is refused below this scale (units of `t`).
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Absolute tolerance for a parameter point to count as lying on a phase line.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("DegeneratePoint: band degeneracy or singular normalization at k=({kx}, {ky})")]
    DegeneratePoint { kx: f64, ky: f64 },
    #[error("BoundaryPoint: |delta| sits on the {branch} phase line")]
    BoundaryPoint { branch: GaplessBranch },
}

/// Parameter point `(t, m, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    t: f64,
    m: f64,
    delta: f64,
}

impl ModelParams {
    pub fn new(t: f64, m: f64, delta: f64) -> Result<Self, ModelError> {
        if !(t.is_finite() && m.is_finite() && delta.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "non-finite value in (t={t}, m={m}, delta={delta})"
            )));
        }
        if t <= 0.0 {
            return Err(ModelError::InvalidParams(format!("t must be positive, got {t}")));
        }
        Ok(Self { t, m, delta })
    }

    /// Unit hopping `t = 1`.
    pub fn unit(m: f64, delta: f64) -> Result<Self, ModelError> {
        Self::new(1.0, m, delta)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_m(self, m: f64) -> Result<Self, ModelError> {
        Self::new(self.t, m, self.delta)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self, ModelError> {
        Self::new(self.t, self.m, delta)
    }

    /// `self + s * (other - self)`.
    pub fn lerp(self, other: ModelParams, s: f64) -> Result<Self, ModelError> {
        Self::new(
            self.t + s * (other.t - self.t),
            self.m + s * (other.m - self.m),
            self.delta + s * (other.delta - self.delta),
        )
    }

    /// `E²` at `k` split into real and imaginary parts.
    #[inline]
    pub fn eps_omega(&self, k: KPoint) -> (f64, f64) {
        let cx = k.kx.cos();
        let (sy, cy) = k.ky.sin_cos();
        self.eps_omega_trig(cx, cy, sy)
    }

    /// Same as [`eps_omega`](Self::eps_omega) from precomputed trig values.
    #[inline]
    pub fn eps_omega_trig(&self, cx: f64, cy: f64, sy: f64) -> (f64, f64) {
        let (t, m, d) = (self.t, self.m, self.delta);
        let eps = 2.0 * t * t + m * m - d * d + 2.0 * t * t * cx * cy + 2.0 * m * t * (cx + cy);
        let omega = -2.0 * t * d * sy;
        (eps, omega)
    }
}

/// A Brillouin-zone momentum in radians.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KPoint {
    pub kx: f64,
    pub ky: f64,
}

impl KPoint {
    pub const fn new(kx: f64, ky: f64) -> Self {
        Self { kx, ky }
    }

    /// Both components folded into `[-pi, pi)`.
    pub fn wrapped(self) -> Self {
        Self::new(wrap_angle(self.kx), wrap_angle(self.ky))
    }
}

/// Folds an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = (a + PI).rem_euclid(two_pi) - PI;
    if r >= PI {
        r - two_pi
    } else {
        r
    }
}

/// `±1`, used for band labels and the branch sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

pub const BANDS: [Sign; 2] = [Sign::Plus, Sign::Minus];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub hx: Complex64,
    pub hy: Complex64,
    pub hz: Complex64,
}

impl BlochVector {
    /// Bilinear `h·h`, no conjugation.
    pub fn dot_self(&self) -> Complex64 {
        self.hx * self.hx + self.hy * self.hy + self.hz * self.hz
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.hx, self.hy, self.hz]
    }
}

pub fn bloch_vector(k: KPoint, p: &ModelParams) -> BlochVector {
    let t = p.t;
    BlochVector {
        hx: Complex64::new(t * k.kx.sin(), 0.0),
        hy: Complex64::new(t * k.ky.sin(), -p.delta),
        hz: Complex64::new(p.m + t * k.kx.cos() + t * k.ky.cos(), 0.0),
    }
}

/// One band energy with its magnitude parts kept separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEnergy {
    /// `E_R >= 0`
    pub re: f64,
    /// `E_I >= 0`
    pub im: f64,
    pub sigma: Sign,
    pub band: Sign,
}

impl ComplexEnergy {
    pub fn value(&self) -> Complex64 {
        let b = self.band.as_f64();
        Complex64::new(b * self.re, b * self.sigma.as_f64() * self.im)
    }
}

/// Magnitudes `(E_R, E_I)` and branch sign from `(eps, omega)`.
#[inline]
pub fn magnitudes(eps: f64, omega: f64) -> (f64, f64, Sign) {
    let r = eps.hypot(omega);
    // Cancellation-free form: compute the larger part directly and recover the
    // smaller one from E_R * E_I = |omega| / 2.
    let (er, ei) = if eps >= 0.0 {
        let er = ((r + eps) / 2.0).sqrt();
        let ei = if er > 0.0 { omega.abs() / (2.0 * er) } else { 0.0 };
        (er, ei)
    } else {
        let ei = ((r - eps) / 2.0).sqrt();
        let er = if ei > 0.0 { omega.abs() / (2.0 * ei) } else { 0.0 };
        (er, ei)
    };
    (er, ei, Sign::of(omega))
}

/// `E_+` as a complex number. Cheap path used by samplers.
#[inline]
pub fn upper_energy(eps: f64, omega: f64) -> Complex64 {
    let (er, ei, sigma) = magnitudes(eps, omega);
    Complex64::new(er, sigma.as_f64() * ei)
}

pub fn band_energy(k: KPoint, p: &ModelParams, band: Sign) -> Complex64 {
    let (eps, omega) = p.eps_omega(k);
    upper_energy(eps, omega) * band.as_f64()
}

pub fn energy_pair(k: KPoint, p: &ModelParams) -> (ComplexEnergy, ComplexEnergy) {
    let (eps, omega) = p.eps_omega(k);
    let (re, im, sigma) = magnitudes(eps, omega);
    (
        ComplexEnergy { re, im, sigma, band: Sign::Plus },
        ComplexEnergy { re, im, sigma, band: Sign::Minus },
    )
}

/// Right eigenvector, left covector and energy of one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub right: [Complex64; 2],
    pub left: [Complex64; 2],
    pub energy: ComplexEnergy,
}

impl EigenPair {
    /// `<L|R'>`, with the covector used as a row (no conjugation).
    pub fn overlap(&self, other: &EigenPair) -> Complex64 {
        self.left[0] * other.right[0] + self.left[1] * other.right[1]
    }
}

pub fn hamiltonian(h: &BlochVector) -> [[Complex64; 2]; 2] {
    let i = Complex64::i();
    [[h.hz, h.hx - i * h.hy], [h.hx + i * h.hy, -h.hz]]
}

pub fn eigen_pair(k: KPoint, p: &ModelParams, band: Sign) -> Result<EigenPair, ModelError> {
    let h = bloch_vector(k, p);
    let energy = match band {
        Sign::Plus => energy_pair(k, p).0,
        Sign::Minus => energy_pair(k, p).1,
    };
    let e = energy.value();
    let tol = DEGENERACY_TOL * p.t;
    if e.norm() <= tol || (e - h.hz).norm() <= tol {
        return Err(ModelError::DegeneratePoint { kx: k.kx, ky: k.ky });
    }
    let i = Complex64::i();
    let norm = (2.0 * e * (e - h.hz)).sqrt();
    let right = [(h.hx - i * h.hy) / norm, (e - h.hz) / norm];
    let left = [(h.hx + i * h.hy) / norm, (e - h.hz) / norm];
    Ok(EigenPair { right, left, energy })
}

/// Which exceptional line closes the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GaplessBranch {
    KyZero,
    KyPi,
}

impl std::fmt::Display for GaplessBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GaplessBranch::KyZero => write!(f, "ky=0"),
            GaplessBranch::KyPi => write!(f, "ky=pi"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PhaseKind {
    GappedC,
    GaplessNu,
}

impl std::fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseKind::GappedC => write!(f, "GappedC"),
            PhaseKind::GaplessNu => write!(f, "GaplessNu"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PhaseClass {
    pub kind: PhaseKind,
    /// Chern number of the upper band, known analytically in gapped phases.
    pub chern_label: Option<i32>,
    /// Lines hosting exceptional points; empty when gapped.
    pub gapless_at: Vec<GaplessBranch>,
}

impl PhaseClass {
    pub fn gapless_label(&self) -> String {
        self.gapless_at
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Interval of `|delta|` over which `E²` vanishes somewhere on a line `ky = 0` or `ky = pi`.
///
/// On such a line `omega = 0` and `eps` is linear in `cos kx`, so the closing
/// interval runs between its values at `cos kx = ±1`.
fn closing_interval(p: &ModelParams, branch: GaplessBranch) -> (f64, f64) {
    let (m, t) = (p.m, p.t);
    let (a, b) = match branch {
        GaplessBranch::KyZero => (m.abs(), (m + 2.0 * t).abs()),
        GaplessBranch::KyPi => (m.abs(), (m - 2.0 * t).abs()),
    };
    (a.min(b), a.max(b))
}

/// Analytic gapped/gapless classification from the closing intervals.
pub fn classify_phase(p: &ModelParams) -> Result<PhaseClass, ModelError> {
    let d = p.delta.abs();
    let mut gapless_at = Vec::new();
    for branch in [GaplessBranch::KyZero, GaplessBranch::KyPi] {
        let (lo, hi) = closing_interval(p, branch);
        if (d - lo).abs() <= BOUNDARY_TOL || (d - hi).abs() <= BOUNDARY_TOL {
            return Err(ModelError::BoundaryPoint { branch });
        }
        if lo < d && d < hi {
            gapless_at.push(branch);
        }
    }
    if !gapless_at.is_empty() {
        return Ok(PhaseClass { kind: PhaseKind::GaplessNu, chern_label: None, gapless_at });
    }
    Ok(PhaseClass {
        kind: PhaseKind::GappedC,
        chern_label: Some(gapped_chern_label(p)),
        gapless_at,
    })
}

/// Chern number of the upper band in a gapped phase.
///
/// Gapped regions either connect to `delta = 0`, where the Hermitian value
/// holds, or lie above every closing interval, where the bands are trivial.
fn gapped_chern_label(p: &ModelParams) -> i32 {
    let d = p.delta.abs();
    let below_all = [GaplessBranch::KyZero, GaplessBranch::KyPi]
        .iter()
        .all(|&b| d < closing_interval(p, b).0);
    if !below_all {
        return 0;
    }
    let r = p.m / p.t;
    if r > 0.0 && r < 2.0 {
        1
    } else if r < 0.0 && r > -2.0 {
        -1
    } else {
        0
    }
}

/// Exceptional points, solved in closed form on `ky = 0` and `ky = pi`.
///
/// A degenerate parameter point where `eps` is constant along a whole line
/// (`m = ∓t` with `|delta| = t`) yields no isolated points and is skipped.
pub fn exceptional_points(p: &ModelParams) -> Vec<KPoint> {
    let (t, m, d) = (p.t, p.m, p.delta);
    let mut out = Vec::new();
    for (ky, shift) in [(0.0, m + t), (PI, m - t)] {
        // eps(kx) = shift² + t² - d² + 2 t shift cos kx on this line.
        let slope = 2.0 * t * shift;
        if slope.abs() < 1e-14 {
            continue;
        }
        let c = (d * d - t * t - shift * shift) / slope;
        if !(-1.0..=1.0).contains(&c) {
            continue;
        }
        let kx = c.acos();
        if kx == 0.0 || kx == PI {
            out.push(KPoint::new(if kx == PI { -PI } else { 0.0 }, ky));
        } else {
            out.push(KPoint::new(-kx, ky));
            out.push(KPoint::new(kx, ky));
        }
    }
    out
}

/// Smallest `|E_+|` over the `n × n` zone lattice.
pub fn min_gap(p: &ModelParams, n: usize) -> Result<f64, crate::bz_grid::GridError> {
    Ok(grid_min(p, n)?.0)
}

/// Grid minimum polished by Levenberg-Marquardt on `(eps, omega)`.
///
/// `|E|` closes like the square root of the distance to an exceptional point,
/// so a plain lattice minimum stays of order `sqrt(spacing)` in gapless phases.
/// Starting from the lowest lattice points, a local solve drives `|E|` to
/// round-off where a zero exists and to the true local minimum otherwise.
pub fn min_gap_refined(p: &ModelParams, n: usize) -> Result<f64, crate::bz_grid::GridError> {
    let (grid_val, seeds) = grid_min(p, n)?;
    let mut best = grid_val.powi(4);
    for k in seeds {
        best = best.min(polish_gap(p, k));
    }
    Ok(best.sqrt().sqrt())
}

/// Lattice minimum of `|E|` and the lowest few lattice local minima.
fn grid_min(p: &ModelParams, n: usize) -> Result<(f64, Vec<KPoint>), crate::bz_grid::GridError> {
    let grid = crate::bz_grid::BzGrid::new(n, n)?;
    let trig: Vec<(f64, f64)> = (0..n).map(|i| grid.kx(i).sin_cos()).collect();
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    let mut row_min = vec![f64::INFINITY; n];
    let mut row_arg = vec![0usize; n];
    for j in 0..n {
        let (sy, cy) = trig[j];
        for (i, &(_, cx)) in trig.iter().enumerate() {
            let (eps, omega) = p.eps_omega_trig(cx, cy, sy);
            let f = eps * eps + omega * omega;
            if f < row_min[j] {
                row_min[j] = f;
                row_arg[j] = i;
            }
        }
    }
    for j in 0..n {
        cands.push((row_min[j], row_arg[j], j));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = cands[0].0;
    let seeds = cands
        .iter()
        .take(6)
        .map(|&(_, i, j)| grid.k(i, j))
        .collect();
    Ok((best.sqrt().sqrt(), seeds))
}

/// Minimizes `eps² + omega²` from `k0`; returns the smallest value seen.
fn polish_gap(p: &ModelParams, k0: KPoint) -> f64 {
    let (t, m, d) = (p.t, p.m, p.delta);
    let mut k = k0;
    let (e0, w0) = p.eps_omega(k);
    let mut f = e0 * e0 + w0 * w0;
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let (sx, cx) = k.kx.sin_cos();
        let (sy, cy) = k.ky.sin_cos();
        let (eps, omega) = p.eps_omega_trig(cx, cy, sy);
        // Residual r = (eps, omega), Jacobian rows.
        let ex = -2.0 * t * sx * (t * cy + m);
        let ey = -2.0 * t * sy * (t * cx + m);
        let wy = -2.0 * t * d * cy;
        let a11 = ex * ex;
        let a12 = ex * ey;
        let a22 = ey * ey + wy * wy;
        let g1 = ex * eps;
        let g2 = ey * eps + wy * omega;
        let mut improved = false;
        for _ in 0..30 {
            let b11 = a11 + lambda * (a11 + 1e-12);
            let b22 = a22 + lambda * (a22 + 1e-12);
            let det = b11 * b22 - a12 * a12;
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let dx = -(b22 * g1 - a12 * g2) / det;
            let dy = -(b11 * g2 - a12 * g1) / det;
            let trial = KPoint::new(k.kx + dx, k.ky + dy);
            let (e1, w1) = p.eps_omega(trial);
            let f1 = e1 * e1 + w1 * w1;
            if f1 < f {
                k = trial;
                f = f1;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || f < 1e-40 {
            break;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(m: f64, d: f64) -> ModelParams {
        ModelParams::unit(m, d).unwrap()
    }

    #[test]
    fn bloch_vector_substitution() {
        let h = bloch_vector(KPoint::new(PI / 2.0, 0.0), &p(0.5, 0.25));
        assert!((h.hx - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((h.hy - Complex64::new(0.0, -0.25)).norm() < 1e-15);
        assert!((h.hz - Complex64::new(1.5, 0.0)).norm() < 1e-15);

        let h = bloch_vector(KPoint::new(PI, PI), &p(0.5, 0.25));
        assert!(h.hx.norm() < 1e-15);
        assert!((h.hz.re + 1.5).abs() < 1e-15);
        assert_eq!(h.hx.im, 0.0);
        assert_eq!(h.hz.im, 0.0);
        assert_eq!(h.hy.im, -0.25);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn energy_on_ky_zero() {
        let (ep, em) = energy_pair(KPoint::new(0.0, 0.0), &p(0.5, 0.25));
        let (eps, omega) = p(0.5, 0.25).eps_omega(KPoint::new(0.0, 0.0));
        assert!((eps - 6.1875).abs() < 1e-14);
        assert_eq!(omega.abs(), 0.0);
        assert!((ep.value().re - 2.487468).abs() < 1e-6);
        assert_eq!(ep.value(), -em.value());
    }

    #[test]
    fn energy_with_negative_omega() {
        let (ep, _) = energy_pair(KPoint::new(0.0, PI / 2.0), &p(0.0, 1.0));
        assert_eq!(ep.sigma, Sign::Minus);
        let v = ep.value();
        assert!((v.re - 1.272020).abs() < 1e-6);
        assert!((v.im + 0.786151).abs() < 1e-6);
        assert!((ep.re * ep.im - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_pair_biorthonormal() {
        let k = KPoint::new(1.0, 1.0);
        let q = p(0.5, 0.25);
        let a = eigen_pair(k, &q, Sign::Plus).unwrap();
        let b = eigen_pair(k, &q, Sign::Minus).unwrap();
        assert!((a.overlap(&a) - 1.0).norm() < 1e-10);
        assert!(a.overlap(&b).norm() < 1e-10);
        // Completeness.
        for r in 0..2 {
            for c in 0..2 {
                let s = a.right[r] * a.left[c] + b.right[r] * b.left[c];
                let id = if r == c { 1.0 } else { 0.0 };
                assert!((s - id).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigen_pair_refuses_exceptional_point() {
        let q = p(0.5, 1.0);
        let ep = exceptional_points(&q)[0];
        assert!(matches!(
            eigen_pair(ep, &q, Sign::Plus),
            Err(ModelError::DegeneratePoint { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        let c = classify_phase(&p(0.5, 1.0)).unwrap();
        assert_eq!(c.kind, PhaseKind::GaplessNu);
        assert!(c.gapless_at.contains(&GaplessBranch::KyZero));
        assert_eq!(classify_phase(&p(0.5, 0.25)).unwrap().kind, PhaseKind::GappedC);
        assert_eq!(classify_phase(&p(0.5, 2.75)).unwrap().kind, PhaseKind::GappedC);
        assert_eq!(classify_phase(&p(0.5, 0.25)).unwrap().chern_label, Some(1));
        assert_eq!(classify_phase(&p(-0.5, 0.25)).unwrap().chern_label, Some(-1));
        assert_eq!(classify_phase(&p(0.5, 2.75)).unwrap().chern_label, Some(0));
        assert_eq!(classify_phase(&p(2.5, 0.25)).unwrap().chern_label, Some(0));
        assert!(matches!(
            classify_phase(&p(0.5, 0.5)),
            Err(ModelError::BoundaryPoint { .. })
        ));
    }

    #[test]
    fn exceptional_points_closed_form() {
        let eps = exceptional_points(&p(0.5, 1.0));
        let on_zero: Vec<_> = eps.iter().filter(|k| k.ky == 0.0).collect();
        assert_eq!(on_zero.len(), 2);
        for k in &on_zero {
            assert!((k.kx.abs() - 2.418858).abs() < 1e-6);
            assert!((k.kx.cos() + 0.75).abs() < 1e-12);
        }
        for k in &eps {
            assert!(band_energy(*k, &p(0.5, 1.0), Sign::Plus).norm() < 1e-7);
        }
        assert!(exceptional_points(&p(0.5, 0.25)).is_empty());
    }

    #[test]
    fn min_gap_examples() {
        assert!(min_gap_refined(&p(0.5, 1.0), 1024).unwrap() < 5e-3);
        assert!(min_gap(&p(0.5, 0.25), 1024).unwrap() > 0.1);
        assert!(min_gap_refined(&p(0.5, 0.25), 1024).unwrap() > 0.1);
        let q = p(0.5, 1.0);
        let a = min_gap(&q, 64).unwrap();
        let b = min_gap(&q, 128).unwrap();
        let c = min_gap(&q, 256).unwrap();
        assert!(b <= a && c <= b);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }
}
