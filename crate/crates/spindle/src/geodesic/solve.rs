//! Closed-geodesic polishing by Newton iteration on the closure map, and
//! point-to-point distance via relaxation plus shooting.

use nalgebra::{Matrix3, Vector3};

use crate::num::angle_diff;
use crate::surface::{ConeSurface, SurfPoint, SurfaceError};

use super::jacobi::{jacobi_index, JacobiData};
use super::{shoot, GeodesicError, GeodesicPath};

pub const TOL_CLOSE: f64 = 1e-10;
const MAX_NEWTON: usize = 50;

pub struct ClosedGeodesic {
    pub path: GeodesicPath,
    pub length: f64,
    pub defect: f64,
    pub in_regular_part: bool,
    pub jacobi: Option<JacobiData>,
}

impl ClosedGeodesic {
    /// Point at arclength s, period-wrapped.
    pub fn eval(&self, surface: &ConeSurface, s: f64) -> SurfPoint {
        self.path.eval(surface, s.rem_euclid(self.length))
    }

    pub fn eval_dir(&self, surface: &ConeSurface, s: f64) -> (SurfPoint, f64) {
        self.path.eval_dir(surface, s.rem_euclid(self.length))
    }

    pub fn samples(&self, surface: &ConeSurface, n: usize) -> Vec<SurfPoint> {
        (0..n).map(|i| self.eval(surface, self.length * i as f64 / n as f64)).collect()
    }

    /// Signed winding of theta along one period.
    pub fn winding(&self, surface: &ConeSurface) -> i64 {
        let n = 512;
        let mut acc = 0.0;
        let mut prev = self.eval(surface, 0.0).theta;
        for i in 1..=n {
            let t = self.eval(surface, self.length * i as f64 / n as f64).theta;
            acc += angle_diff(t, prev);
            prev = t;
        }
        (acc / std::f64::consts::TAU).round() as i64
    }

    /// Embeddedness check on samples: no pair of non-neighboring samples
    /// closer than the local sample spacing allows.
    pub fn is_embedded(&self, surface: &ConeSurface) -> bool {
        let n = 256;
        let pts = self.samples(surface, n);
        let spacing = self.length / n as f64;
        for i in 0..n {
            for j in (i + 2)..n {
                let gap = (j - i).min(n - (j - i));
                if gap < 2 {
                    continue;
                }
                if surface.dist_local(pts[i], pts[j]) < 0.25 * spacing {
                    return false;
                }
            }
        }
        true
    }

    /// Separating: embedded, and each complement component contains at most
    /// one cone point. A winding-one embedded loop splits the poles; a
    /// null-homotopic one leaves both poles on the same side.
    pub fn is_separating(&self, surface: &ConeSurface) -> bool {
        if !self.in_regular_part || !self.is_embedded(surface) {
            return false;
        }
        match self.winding(surface).abs() {
            1 => true,
            0 => surface.cone_points().len() <= 1,
            _ => false,
        }
    }
}

struct ClosureMap<'a> {
    surface: &'a ConeSurface,
    theta0: f64,
}

impl ClosureMap<'_> {
    /// Residual of the closure map at unknowns (r0, psi, len).
    fn residual(&self, u: &Vector3<f64>) -> Result<(Vector3<f64>, f64, GeodesicPath), GeodesicError> {
        let s = self.surface;
        let r0 = u[0].clamp(0.015 * s.len(), 0.985 * s.len());
        let start = SurfPoint::new(r0, self.theta0);
        let path = shoot(s, start, u[1], u[2])?;
        let (end, chi) = path.eval_dir(s, u[2]);
        let (f0, _, _) = s.warp(r0);
        let res = Vector3::new(
            end.r - r0,
            f0 * angle_diff(end.theta, self.theta0),
            angle_diff(chi, u[1]),
        );
        let defect = s.dist_local(end, start) + angle_diff(chi, u[1]).abs();
        Ok((res, defect, path))
    }
}

/// Polish a seed (start point, direction angle, approximate length) into a
/// closed geodesic with defect below TOL_CLOSE; Jacobi data attached.
pub fn find_closed_geodesic(
    surface: &ConeSurface,
    start: SurfPoint,
    psi: f64,
    approx_length: f64,
) -> Result<ClosedGeodesic, GeodesicError> {
    let l_min = 1e-3 * surface.len();
    let map = ClosureMap { surface, theta0: start.theta };
    let mut u = Vector3::new(start.r, psi, approx_length);
    let (mut res, mut defect, mut path) = map.residual(&u)?;
    for _ in 0..MAX_NEWTON {
        if defect < TOL_CLOSE {
            let length = u[2];
            let mut c = ClosedGeodesic {
                in_regular_part: path.events.is_empty(),
                path,
                length,
                defect,
                jacobi: None,
            };
            c.jacobi = Some(jacobi_index(surface, &c, 1)?);
            return Ok(c);
        }
        // central finite-difference Jacobian
        let h = 1e-6;
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let mut up = u;
            let mut um = u;
            up[k] += h;
            um[k] -= h;
            let (rp, _, _) = map.residual(&up)?;
            let (rm, _, _) = map.residual(&um)?;
            jac.set_column(k, &((rp - rm) / (2.0 * h)));
        }
        // pseudo-inverse step: tolerant of the symmetric-family degeneracies
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&res, 1e-9 * svd.singular_values[0])
            .map_err(|_| GeodesicError::NoConvergence { defect })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial = u - lambda * step;
            if trial[2] < l_min {
                return Err(GeodesicError::DegenerateToPoint { length: trial[2] });
            }
            if let Ok((r2, d2, p2)) = map.residual(&trial) {
                if d2 < defect || lambda < 0.02 {
                    u = trial;
                    res = r2;
                    defect = d2;
                    path = p2;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(GeodesicError::NoConvergence { defect });
        }
    }
    Err(GeodesicError::NoConvergence { defect })
}

/// Geodesic distance between two points, by chord relaxation followed by a
/// shooting Newton polish. Exact radial reduction when the points share a
/// meridian of a rotationally symmetric metric.
/// Direction angle and distance of the connecting geodesic from a to b,
/// polished by shooting Newton from the local chart log. Intended for
/// points within the convexity radius of each other; the gap tolerance is
/// 1e-12 of the surface scale.
pub fn log_map(
    surface: &ConeSurface,
    a: SurfPoint,
    b: SurfPoint,
) -> Result<(f64, f64), GeodesicError> {
    let chart0 = surface.chart_for([a, b].iter().copied());
    let ca = surface.to_chart(chart0, a, None);
    let l0 = surface.log2(chart0, ca, surface.to_chart(chart0, b, Some(ca)));
    let d0 = surface.norm(chart0, ca, l0);
    if d0 < 1e-14 * surface.len() {
        return Ok((0.0, 0.0));
    }
    let (dr, dt) = super::velocity_global(surface, chart0, ca, l0);
    let mut psi = super::direction_angle(surface, a.r, dr, dt);
    let mut s_len = d0;
    let gap = |psi: f64, s_len: f64| -> Result<[f64; 2], GeodesicError> {
        let path = shoot(surface, a, psi, s_len)?;
        let end = path.end_point(surface);
        let chart = surface.chart_for([b, end].iter().copied());
        let cb = surface.to_chart(chart, b, None);
        let ce = surface.to_chart(chart, end, Some(cb));
        Ok(surface.log2(chart, cb, ce))
    };
    for _ in 0..20 {
        let g = gap(psi, s_len)?;
        if g[0].hypot(g[1]) < 1e-12 * surface.len() {
            return Ok((psi, s_len));
        }
        let h = 1e-7;
        let gp = gap(psi + h, s_len)?;
        let gm = gap(psi - h, s_len)?;
        let gsp = gap(psi, s_len + h)?;
        let gsm = gap(psi, s_len - h)?;
        let jac = nalgebra::Matrix2::new(
            (gp[0] - gm[0]) / (2.0 * h),
            (gsp[0] - gsm[0]) / (2.0 * h),
            (gp[1] - gm[1]) / (2.0 * h),
            (gsp[1] - gsm[1]) / (2.0 * h),
        );
        let step = jac
            .lu()
            .solve(&nalgebra::Vector2::new(g[0], g[1]))
            .ok_or(SurfaceError::ConvergenceFailure("singular log map Jacobian".into()))
            .map_err(GeodesicError::Surface)?;
        psi -= step[0];
        s_len -= step[1];
        if s_len <= 0.0 {
            return Err(
                SurfaceError::ConvergenceFailure("log map length collapsed".into()).into()
            );
        }
    }
    Err(SurfaceError::ConvergenceFailure("log map shooting stalled".into()).into())
}

pub fn distance(
    surface: &ConeSurface,
    a: SurfPoint,
    b: SurfPoint,
) -> Result<f64, GeodesicError> {
    let dtheta = angle_diff(b.theta, a.theta);
    if (a.r - b.r).abs() < 1e-14 && dtheta.abs() < 1e-14 {
        return Ok(0.0);
    }
    if dtheta.abs() < 1e-14 && !surface.has_bump() {
        return Ok((a.r - b.r).abs());
    }

    // chord relaxation in unwrapped base coordinates
    let n = 32;
    let mut pts: Vec<SurfPoint> = (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            SurfPoint::new(a.r + t * (b.r - a.r), a.theta + t * dtheta)
        })
        .collect();
    for _ in 0..300 {
        let mut moved = 0.0f64;
        for i in 1..n {
            let trio = [pts[i - 1], pts[i], pts[i + 1]];
            let chart = surface.chart_for(trio.iter().copied());
            let c = surface.to_chart(chart, trio[1], None);
            let l = surface.to_chart(chart, trio[0], Some(c));
            let r = surface.to_chart(chart, trio[2], Some(c));
            let la = surface.log2(chart, c, l);
            let lb = surface.log2(chart, c, r);
            let mid = [0.5 * (la[0] + lb[0]), 0.5 * (la[1] + lb[1])];
            let nxt = surface.exp2(chart, c, mid);
            moved = moved.max(surface.norm(chart, c, mid));
            pts[i] = surface.from_chart(chart, nxt);
        }
        if moved < 1e-12 * surface.len() {
            break;
        }
    }
    let mut approx_len = 0.0;
    for w in pts.windows(2) {
        approx_len += surface.dist_local(w[0], w[1]);
    }

    // shooting polish: unknowns (psi, S), residual log_b(endpoint)
    let chart0 = surface.chart_for([pts[0], pts[1]].iter().copied());
    let c0 = surface.to_chart(chart0, pts[0], None);
    let l0 = surface.log2(chart0, c0, surface.to_chart(chart0, pts[1], Some(c0)));
    let fr = surface.to_frame(chart0, c0, l0);
    let mut psi = fr[1].atan2(fr[0]);
    if let crate::surface::Chart::Cover(_) = chart0 {
        // frame in the cover chart is not meridian-aligned; recompute via
        // global components
        let (dr, dt) = super::velocity_global(surface, chart0, c0, l0);
        psi = super::direction_angle(surface, pts[0].r, dr, dt);
    }
    let mut s_len = approx_len;
    let gap = |psi: f64, s_len: f64| -> Result<[f64; 2], GeodesicError> {
        let path = shoot(surface, a, psi, s_len)?;
        let end = path.end_point(surface);
        let chart = surface.chart_for([b, end].iter().copied());
        let cb = surface.to_chart(chart, b, None);
        let ce = surface.to_chart(chart, end, Some(cb));
        Ok(surface.log2(chart, cb, ce))
    };
    let mut ok = false;
    for _ in 0..30 {
        let g = gap(psi, s_len)?;
        let gn = surface.norm(
            surface.chart_for([b].iter().copied()),
            surface.to_chart(surface.chart_for([b].iter().copied()), b, None),
            g,
        );
        if gn < 1e-10 * surface.len() {
            ok = true;
            break;
        }
        let h = 1e-7;
        let gp = gap(psi + h, s_len)?;
        let gm = gap(psi - h, s_len)?;
        let gsp = gap(psi, s_len + h)?;
        let gsm = gap(psi, s_len - h)?;
        let jac = nalgebra::Matrix2::new(
            (gp[0] - gm[0]) / (2.0 * h),
            (gsp[0] - gsm[0]) / (2.0 * h),
            (gp[1] - gm[1]) / (2.0 * h),
            (gsp[1] - gsm[1]) / (2.0 * h),
        );
        let rhs = nalgebra::Vector2::new(g[0], g[1]);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(SurfaceError::ConvergenceFailure("singular shooting Jacobian".into()))
            .map_err(GeodesicError::Surface)?;
        psi -= step[0];
        s_len -= step[1];
        if s_len <= 0.0 {
            return Err(SurfaceError::ConvergenceFailure("length collapsed".into()).into());
        }
    }
    if !ok {
        return Err(SurfaceError::ConvergenceFailure(format!(
            "shooting polish stalled near length {s_len:.6}"
        ))
        .into());
    }
    Ok(s_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConeSurface;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn round_sphere_tilted_circle() {
        let s = ConeSurface::round();
        let c = find_closed_geodesic(&s, SurfPoint::new(FRAC_PI_2 + 0.05, 0.0), FRAC_PI_2 - 0.03, TAU + 0.1)
            .unwrap();
        assert!((c.length - TAU).abs() < 1e-8);
        assert!(c.defect < TOL_CLOSE);
        let j = c.jacobi.as_ref().unwrap();
        assert_eq!(j.index, 1);
        assert!((j.conjugate_parameters[0] - PI).abs() < 1e-6);
    }

    #[test]
    fn spindle_waist_parallel() {
        let s = ConeSurface::spindle(3, 1);
        let r_w = s.profile().waist_r().unwrap();
        let f_max = s.warp(r_w).0;
        let c =
            find_closed_geodesic(&s, SurfPoint::new(r_w + 0.02, 0.0), FRAC_PI_2, TAU * f_max * 1.01)
                .unwrap();
        assert!((c.length - TAU * f_max).abs() < 1e-8);
        assert!(c.is_separating(&s));
    }

    #[test]
    fn bad_seed_is_never_silently_wrong() {
        let s = ConeSurface::round();
        // aim far from any closure: either an error or a genuinely closed result
        match find_closed_geodesic(&s, SurfPoint::new(1.2, 0.0), 0.7, 4.0) {
            Ok(c) => assert!(c.defect < TOL_CLOSE),
            Err(GeodesicError::NoConvergence { .. })
            | Err(GeodesicError::DegenerateToPoint { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn distance_examples() {
        let s = ConeSurface::round();
        let a = SurfPoint::new(FRAC_PI_2, 0.0);
        let b = SurfPoint::new(FRAC_PI_2, FRAC_PI_2);
        assert!((distance(&s, a, b).unwrap() - FRAC_PI_2).abs() < 1e-6);
        assert_eq!(distance(&s, a, a).unwrap(), 0.0);
        let c = ConeSurface::flat_cone(2);
        let d = distance(&c, SurfPoint::new(1.0, 0.3), SurfPoint::new(2.0, 0.3)).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
    }
}
