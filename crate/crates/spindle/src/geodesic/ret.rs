//! Return condition for the Birkhoff construction: shoot a fan of geodesics
//! off a separating closed geodesic and check that every ray re-encounters
//! the curve within a length horizon.

use rayon::prelude::*;

use crate::num::{angle_diff, wrap_angle};
use crate::surface::{ConeSurface, SurfPoint};

use super::solve::ClosedGeodesic;
use super::{shoot, GeodesicError, GeodesicPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FanSide {
    Left,
    Right,
}

pub enum ReturnVerdict {
    AllReturn,
    Escaper { t: f64, alpha: f64, path: GeodesicPath },
}

/// Signed side of a point relative to the curve. Winding-one curves are
/// handled as radial graphs over theta; otherwise the sign comes from the
/// nearest curve sample.
pub(crate) enum SideFn {
    Graph { thetas: Vec<f64>, radii: Vec<f64> },
    Nearest { pts: Vec<SurfPoint>, f_scale: f64 },
}

impl SideFn {
    pub(crate) fn build(surface: &ConeSurface, c: &ClosedGeodesic) -> Self {
        let n = 1024;
        let pts = c.samples(surface, n);
        if c.winding(surface).abs() == 1 {
            let mut pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.theta, p.r)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let max_gap = pairs
                .windows(2)
                .map(|w| w[1].0 - w[0].0)
                .fold(std::f64::consts::TAU + pairs[0].0 - pairs[pairs.len() - 1].0, f64::max);
            if max_gap < 8.0 * std::f64::consts::TAU / n as f64 {
                let (thetas, radii) = pairs.into_iter().unzip();
                return SideFn::Graph { thetas, radii };
            }
        }
        let f_scale = surface.warp(0.5 * surface.len()).0;
        SideFn::Nearest { pts, f_scale }
    }

    pub(crate) fn eval(&self, pt: SurfPoint) -> f64 {
        match self {
            SideFn::Graph { thetas, radii } => {
                let n = thetas.len();
                let i = thetas.partition_point(|&t| t <= pt.theta);
                let (t0, r0, t1, r1) = if i == 0 || i == n {
                    (
                        thetas[n - 1] - std::f64::consts::TAU,
                        radii[n - 1],
                        thetas[0],
                        radii[0],
                    )
                } else {
                    (thetas[i - 1], radii[i - 1], thetas[i], radii[i])
                };
                let th = if i == 0 { pt.theta - std::f64::consts::TAU } else { pt.theta };
                let w = if t1 > t0 { (th - t0) / (t1 - t0) } else { 0.5 };
                pt.r - (r0 + w.clamp(0.0, 1.0) * (r1 - r0))
            }
            SideFn::Nearest { pts, f_scale } => {
                let n = pts.len();
                let mut best = (f64::INFINITY, 0usize);
                for (k, p) in pts.iter().enumerate() {
                    let dr = pt.r - p.r;
                    let dt = f_scale * angle_diff(pt.theta, p.theta);
                    let d2 = dr * dr + dt * dt;
                    if d2 < best.0 {
                        best = (d2, k);
                    }
                }
                let k = best.1;
                let a = pts[k];
                let b = pts[(k + 1) % n];
                let ex = b.r - a.r;
                let ey = f_scale * angle_diff(b.theta, a.theta);
                let dx = pt.r - a.r;
                let dy = f_scale * angle_diff(pt.theta, a.theta);
                ex * dy - ey * dx
            }
        }
    }
}

/// Shoot fan_size x fan_size rays off `c` toward the given side and report
/// either AllReturn or one witnessing escaper.
pub fn check_return_condition(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    fan_size: usize,
    horizon: f64,
    side: FanSide,
) -> Result<ReturnVerdict, GeodesicError> {
    if fan_size == 0 {
        return Ok(ReturnVerdict::AllReturn);
    }
    let side_fn = SideFn::build(surface, c);
    let ds = 0.01 * surface.len();
    let n_scan = (horizon / ds).ceil() as usize;

    let ray = |i: usize, j: usize| -> Result<Option<(f64, f64)>, GeodesicError> {
        let t = c.length * i as f64 / fan_size as f64;
        let alpha = std::f64::consts::PI * (j + 1) as f64 / (fan_size + 1) as f64;
        let (pt, chi) = c.eval_dir(surface, t);
        let dir = match side {
            FanSide::Left => wrap_angle(chi + alpha),
            FanSide::Right => wrap_angle(chi - alpha),
        };
        let path = shoot(surface, pt, dir, horizon)?;
        let s_min = 4.0 * ds;
        let mut prev: Option<f64> = None;
        for k in 0..=n_scan {
            let s = (k as f64 * ds).min(horizon);
            if s < s_min {
                continue;
            }
            let v = side_fn.eval(path.eval(surface, s));
            if let Some(p) = prev {
                if (p > 0.0) != (v > 0.0) || v.abs() < 1e-9 {
                    return Ok(None); // re-encounter
                }
            }
            prev = Some(v);
        }
        Ok(Some((t, alpha)))
    };

    let grid: Vec<(usize, usize)> =
        (0..fan_size).flat_map(|i| (0..fan_size).map(move |j| (i, j))).collect();
    let results: Vec<Result<Option<(f64, f64)>, GeodesicError>> =
        grid.par_iter().map(|&(i, j)| ray(i, j)).collect();
    for res in results {
        if let Some((t, alpha)) = res? {
            let (pt, chi) = c.eval_dir(surface, t);
            let dir = match side {
                FanSide::Left => wrap_angle(chi + alpha),
                FanSide::Right => wrap_angle(chi - alpha),
            };
            let path = shoot(surface, pt, dir, horizon)?;
            return Ok(ReturnVerdict::Escaper { t, alpha, path });
        }
    }
    Ok(ReturnVerdict::AllReturn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::find_closed_geodesic;
    use std::f64::consts::{FRAC_PI_2, TAU};

    #[test]
    fn equator_all_return() {
        let s = ConeSurface::round();
        let c = find_closed_geodesic(&s, SurfPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2, TAU).unwrap();
        for side in [FanSide::Left, FanSide::Right] {
            match check_return_condition(&s, &c, 8, 2.0 * TAU, side).unwrap() {
                ReturnVerdict::AllReturn => {}
                ReturnVerdict::Escaper { t, alpha, .. } => {
                    panic!("unexpected escaper at t={t} alpha={alpha}")
                }
            }
        }
    }

    #[test]
    fn empty_fan_vacuous() {
        let s = ConeSurface::round();
        let c = find_closed_geodesic(&s, SurfPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2, TAU).unwrap();
        assert!(matches!(
            check_return_condition(&s, &c, 0, TAU, FanSide::Left).unwrap(),
            ReturnVerdict::AllReturn
        ));
    }
}
