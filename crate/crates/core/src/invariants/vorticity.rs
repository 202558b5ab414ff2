//! Windings of complex energies along closed momentum paths.

use super::InvariantError;
use crate::bz_grid::KLoop;
use crate::model::{magnitudes, KPoint, ModelParams, Sign};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

/// Energy difference below which two bands count as degenerate on a loop.
pub const DEGENERACY_ON_LOOP: f64 = 1e-10;
/// Minimum distance between the generalized-vorticity curve and its offset.
pub const OFFSET_TOL: f64 = 1e-10;
pub const MIN_KY_SAMPLES: usize = 256;
pub const DEFAULT_KY_SAMPLES: usize = 1024;
pub const FLIP_SCAN_POINTS: usize = 64;
pub const FLIP_TOL: f64 = 1e-4;

#[inline]
fn wrapped_increment(a: Complex64, b: Complex64) -> f64 {
    let d = b.arg() - a.arg();
    let r = (d + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VorticityResult {
    pub value: f64,
    pub loop_path: KLoop,
    /// Ordered band pair of the energy difference.
    pub bands: (Sign, Sign),
}

/// Winding of `E_+ - E_-` around a loop, divided by `2 pi`.
///
/// The band labels of the closed-form energies swap across the branch jump of
/// `sqrt`, so the upper band is followed continuously: at each step the root
/// closest to the previous one is kept. A loop around an exceptional point
/// then returns to the other band and winds by half a turn.
pub fn vorticity(p: &ModelParams, loop_path: &KLoop) -> Result<VorticityResult, InvariantError> {
    let pts = &loop_path.points;
    let mut tracked: Vec<Complex64> = Vec::with_capacity(pts.len());
    for &k in pts {
        let (eps, omega) = p.eps_omega(k);
        let (er, ei, sigma) = magnitudes(eps, omega);
        let e = Complex64::new(er, sigma.as_f64() * ei);
        if 2.0 * e.norm() < DEGENERACY_ON_LOOP {
            return Err(InvariantError::DegenerateOnLoop { kx: k.kx, ky: k.ky });
        }
        let e = match tracked.last() {
            Some(&prev) if (e - prev).norm() > (-e - prev).norm() => -e,
            _ => e,
        };
        tracked.push(e);
    }
    let n = tracked.len();
    let mut winding = 0.0;
    for i in 0..n {
        let (a, b) = (tracked[i], tracked[(i + 1) % n]);
        let step = if i + 1 == n {
            // Closing step: the tracked root may come back as either sign.
            let bb = if (b - a).norm() <= (-b - a).norm() { b } else { -b };
            wrapped_increment(a, bb)
        } else {
            wrapped_increment(a, b)
        };
        // The tracked root turns half as fast as E², which must stay resolved.
        if 2.0 * step.abs() > FRAC_PI_2 {
            return Err(InvariantError::UnderSampled { increment: 2.0 * step });
        }
        winding += step;
    }
    Ok(VorticityResult { value: winding / (2.0 * PI), loop_path: loop_path.clone(), bands: (Sign::Plus, Sign::Minus) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Orientation {
    Counterclockwise,
    Clockwise,
    Degenerate,
}

impl Orientation {
    pub fn of_area(a: f64) -> Self {
        if a > 0.0 {
            Orientation::Counterclockwise
        } else if a < 0.0 {
            Orientation::Clockwise
        } else {
            Orientation::Degenerate
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Orientation::Counterclockwise => write!(f, "anticlockwise"),
            Orientation::Clockwise => write!(f, "clockwise"),
            Orientation::Degenerate => write!(f, "degenerate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenVorticity {
    pub kx: f64,
    /// Real part: winding of `arg z`; imaginary part: net change of `ln|z|`;
    /// both divided by `2 pi`.
    pub mu: Complex64,
    pub orientation: Orientation,
    pub signed_area: f64,
    pub offset: Complex64,
    /// `z(ky) = E_+(kx, ky) - offset` for `ky` from `-pi` to `pi`, endpoints included.
    pub samples: Vec<Complex64>,
    /// Number of increments across a jump of the branch sign.
    pub branch_jumps: usize,
}

fn upper_with_sign(k: KPoint, p: &ModelParams) -> (Complex64, Sign) {
    let (eps, omega) = p.eps_omega(k);
    let (er, ei, sigma) = magnitudes(eps, omega);
    (Complex64::new(er, sigma.as_f64() * ei), sigma)
}

fn ky_samples(n_ky: usize) -> impl Iterator<Item = f64> {
    (0..=n_ky).map(move |j| -PI + 2.0 * PI * j as f64 / n_ky as f64)
}

fn offset_point(p: &ModelParams, kx: f64) -> Complex64 {
    let a = upper_with_sign(KPoint::new(kx, 0.0), p).0;
    let b = upper_with_sign(KPoint::new(kx, PI), p).0;
    0.5 * (a + b)
}

fn shoelace(z: &[Complex64]) -> f64 {
    let n = z.len();
    let mut a = 0.0;
    for i in 0..n {
        let (u, v) = (z[i], z[(i + 1) % n]);
        a += u.re * v.im - v.re * u.im;
    }
    0.5 * a
}

/// Upper-band curve along `ky` at fixed `kx`, shifted by the midpoint of its
/// `ky = 0` and `ky = pi` energies.
pub fn gen_vorticity(p: &ModelParams, kx: f64, n_ky: usize) -> Result<GenVorticity, InvariantError> {
    if n_ky < MIN_KY_SAMPLES {
        return Err(InvariantError::InvalidSampling { n: n_ky, min: MIN_KY_SAMPLES });
    }
    let offset = offset_point(p, kx);
    let mut samples = Vec::with_capacity(n_ky + 1);
    let mut signs = Vec::with_capacity(n_ky + 1);
    for ky in ky_samples(n_ky) {
        let (e, s) = upper_with_sign(KPoint::new(kx, ky), p);
        samples.push(e - offset);
        signs.push(s);
    }
    let min_abs = samples.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_abs < OFFSET_TOL {
        return Err(InvariantError::OffsetOnCurve { kx });
    }
    let mut turn = 0.0;
    let mut branch_jumps = 0;
    for i in 0..n_ky {
        let step = wrapped_increment(samples[i], samples[i + 1]);
        if signs[i] != signs[i + 1] {
            branch_jumps += 1;
        } else if step.abs() > FRAC_PI_2 {
            return Err(InvariantError::UnderSampled { increment: step });
        }
        turn += step;
    }
    let log_change = samples[n_ky].norm().ln() - samples[0].norm().ln();
    let signed_area = shoelace(&samples);
    Ok(GenVorticity {
        kx,
        mu: Complex64::new(turn, log_change) / (2.0 * PI),
        orientation: Orientation::of_area(signed_area),
        signed_area,
        offset,
        samples,
        branch_jumps,
    })
}

/// Orientation of the shifted curve only; never fails on the offset.
pub fn loop_orientation(p: &ModelParams, kx: f64, n_ky: usize) -> Orientation {
    let offset = offset_point(p, kx);
    let z: Vec<Complex64> = ky_samples(n_ky)
        .map(|ky| upper_with_sign(KPoint::new(kx, ky), p).0 - offset)
        .collect();
    Orientation::of_area(shoelace(&z))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FlippingIndex {
    pub theta_r: f64,
    pub theta_i: f64,
    pub mu_zero: Complex64,
    pub mu_pi: Complex64,
}

/// Half the change of the generalized vorticity between `kx = 0` and `kx = pi`.
///
/// Reversing the orientation of a curve that winds once around its offset
/// changes the winding by two, so the half difference counts orientation flips.
pub fn flipping_index(p: &ModelParams, n_ky: usize) -> Result<FlippingIndex, InvariantError> {
    let a = gen_vorticity(p, 0.0, n_ky)?;
    let b = gen_vorticity(p, PI, n_ky)?;
    let d = a.mu - b.mu;
    Ok(FlippingIndex { theta_r: 0.5 * d.re.abs(), theta_i: 0.5 * d.im.abs(), mu_zero: a.mu, mu_pi: b.mu })
}

/// Location where the curve orientation changes sign inside `range`.
pub fn flip_point(p: &ModelParams, range: (f64, f64), tol: f64, n_ky: usize) -> Result<Option<f64>, InvariantError> {
    let (lo, hi) = range;
    if !(lo >= -PI - 1e-12 && hi <= 1e-12 && lo < hi) {
        return Err(InvariantError::InvalidRange { lo, hi });
    }
    let sign = |kx: f64| loop_orientation(p, kx, n_ky);
    let xs: Vec<f64> = (0..FLIP_SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (FLIP_SCAN_POINTS - 1) as f64)
        .collect();
    let os: Vec<Orientation> = xs.iter().map(|&x| sign(x)).collect();
    let mut brackets = Vec::new();
    let mut last: Option<(f64, Orientation)> = None;
    for (&x, &o) in xs.iter().zip(&os) {
        if o == Orientation::Degenerate {
            continue;
        }
        if let Some((px, po)) = last {
            if po != o {
                brackets.push((px, x, po));
            }
        }
        last = Some((x, o));
    }
    let bisect = |(mut a, mut b, oa): (f64, f64, Orientation)| {
        while b - a > tol {
            let c = 0.5 * (a + b);
            let oc = sign(c);
            if oc == oa || oc == Orientation::Degenerate {
                a = c;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    };
    match brackets.len() {
        0 => Ok(None),
        1 => Ok(Some(bisect(brackets[0]))),
        _ => Err(InvariantError::MultipleFlips(brackets.into_iter().map(bisect).collect())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bz_grid::make_loop;

    #[test]
    fn gapped_loop_has_no_winding() {
        let p = ModelParams::unit(0.5, 0.25).unwrap();
        let l = make_loop(KPoint::new(0.3, 0.4), 0.2, 256).unwrap();
        assert!(vorticity(&p, &l).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn reversal_negates() {
        let p = ModelParams::unit(0.5, 1.0).unwrap();
        let ep = crate::model::exceptional_points(&p)[0];
        let l = make_loop(ep, 0.1, 1024).unwrap();
        let a = vorticity(&p, &l).unwrap().value;
        let b = vorticity(&p, &l.reversed()).unwrap().value;
        assert!((a.abs() - 0.5).abs() < 0.01);
        assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn undersampled_loop_is_rejected() {
        let p = ModelParams::unit(0.5, 1.0).unwrap();
        let ep = crate::model::exceptional_points(&p)[0];
        let l = make_loop(ep, 0.1, 32).unwrap();
        let mut sparse = l.clone();
        sparse.points = l.points.iter().step_by(11).copied().collect();
        assert_eq!(sparse.points.len(), 3);
        assert!(matches!(vorticity(&p, &sparse), Err(InvariantError::UnderSampled { .. })));
    }

    #[test]
    fn gen_vorticity_requires_samples() {
        let p = ModelParams::unit(0.5, 0.25).unwrap();
        assert!(matches!(gen_vorticity(&p, 0.0, 64), Err(InvariantError::InvalidSampling { .. })));
        let g = gen_vorticity(&p, 0.0, 4096).unwrap();
        assert!((g.mu.re - g.mu.re.round()).abs() < 1e-6);
    }
}
