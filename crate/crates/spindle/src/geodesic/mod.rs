//! Orbifold geodesic tracing.
//!
//! Geodesics are integrated in the base (r, theta) chart away from the poles
//! and in Cartesian branched-cover charts near them. The cover chart is a
//! genuinely smooth chart through the pole, so a trajectory aimed at a cone
//! point is integrated straight through; projecting back to the base yields
//! the reflection rule at even orders and pass-through at odd orders without
//! any special casing. A ConeEvent is recorded when the cover angular
//! momentum shows the ray passes within eps_hit of the center.

mod jacobi;
mod ret;
mod solve;

pub use jacobi::{has_conjugate_pair, jacobi_index, JacobiData};
pub use ret::{check_return_condition, FanSide, ReturnVerdict};
pub(crate) use ret::SideFn;
pub use solve::{distance, find_closed_geodesic, log_map, ClosedGeodesic};

use serde::Serialize;
use thiserror::Error;

use crate::num::ode::{integrate, DenseOutput, OdeError, OdeOpts};
use crate::num::{angle_diff, bisect, wrap_angle};
use crate::surface::{Chart, ConePoint, ConeSurface, Pole, SurfPoint, SurfaceError};

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("adaptive integrator fell below the minimum step at s = {s:.6}")]
    StepFailure { s: f64 },
    #[error("Newton closure did not converge (last defect {defect:.3e})")]
    NoConvergence { defect: f64 },
    #[error("closure iteration shrank the loop below the length floor ({length:.3e})")]
    DegenerateToPoint { length: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

impl From<OdeError> for GeodesicError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepFailure { s, .. } => GeodesicError::StepFailure { s },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeEventKind {
    Reflect,
    PassThrough,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeEvent {
    pub s: f64,
    pub cone: ConePoint,
    /// base angle of the incoming ray (the direction the ray arrives from)
    pub theta_in: f64,
    /// base angle of the outgoing ray
    pub theta_out: f64,
    pub kind: ConeEventKind,
    /// angle defect of the development in the cover (straightness check)
    pub cover_defect: f64,
}

/// One smooth arc of a traced geodesic, integrated in a single chart.
pub struct PathSeg {
    pub s0: f64,
    pub s1: f64,
    pub chart: Chart,
    pub dense: DenseOutput<4>,
}

pub struct GeodesicPath {
    pub segs: Vec<PathSeg>,
    pub events: Vec<ConeEvent>,
    pub total_length: f64,
    pub start: SurfPoint,
    pub start_angle: f64,
}

/// Global components (dr, dtheta) of a chart velocity.
pub(crate) fn velocity_global(
    surface: &ConeSurface,
    chart: Chart,
    xy: [f64; 2],
    v: [f64; 2],
) -> (f64, f64) {
    match chart {
        Chart::Base => (v[0], v[1]),
        Chart::Cover(pole) => {
            let rho2 = xy[0] * xy[0] + xy[1] * xy[1];
            let rho = rho2.sqrt();
            let order = surface.pole_order(pole) as f64;
            let drho = (xy[0] * v[0] + xy[1] * v[1]) / rho;
            let dphi = (xy[0] * v[1] - xy[1] * v[0]) / rho2;
            match pole {
                Pole::North => (drho, order * dphi),
                Pole::South => (-drho, -order * dphi),
            }
        }
    }
}

pub(crate) fn velocity_from_global(
    surface: &ConeSurface,
    chart: Chart,
    xy: [f64; 2],
    dr: f64,
    dtheta: f64,
) -> [f64; 2] {
    match chart {
        Chart::Base => [dr, dtheta],
        Chart::Cover(pole) => {
            let rho = (xy[0] * xy[0] + xy[1] * xy[1]).sqrt();
            let (c, s) = (xy[0] / rho, xy[1] / rho);
            let order = surface.pole_order(pole) as f64;
            let (drho, dphi) = match pole {
                Pole::North => (dr, dtheta / order),
                Pole::South => (-dr, -dtheta / order),
            };
            [c * drho - rho * s * dphi, s * drho + rho * c * dphi]
        }
    }
}

/// Direction angle to the meridian: chi = atan2(f * dtheta, dr), measured in
/// the conformally rescaled orthonormal frame (the e^u factors cancel).
pub(crate) fn direction_angle(surface: &ConeSurface, r: f64, dr: f64, dtheta: f64) -> f64 {
    let (f, _, _) = surface.warp(r);
    (f * dtheta).atan2(dr)
}

fn rhs(surface: &ConeSurface, chart: Chart) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + '_ {
    move |_s, y| {
        let xy = [y[0], y[1]];
        let v = [y[2], y[3]];
        let gam = surface.gamma(chart, xy);
        let mut acc = [0.0; 2];
        for k in 0..2 {
            let mut a = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    a += gam[k][i][j] * v[i] * v[j];
                }
            }
            acc[k] = -a;
        }
        [v[0], v[1], acc[0], acc[1]]
    }
}

impl GeodesicPath {
    fn seg_at(&self, s: f64) -> &PathSeg {
        let s = s.clamp(0.0, self.total_length);
        match self.segs.binary_search_by(|g| {
            if s < g.s0 {
                std::cmp::Ordering::Greater
            } else if s > g.s1 {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(i) => &self.segs[i],
            Err(i) => &self.segs[i.min(self.segs.len() - 1)],
        }
    }

    pub fn eval_state(&self, s: f64) -> (Chart, [f64; 4]) {
        let seg = self.seg_at(s);
        let y = seg.dense.eval(s.clamp(seg.s0, seg.s1));
        (seg.chart, y)
    }

    pub fn eval(&self, surface: &ConeSurface, s: f64) -> SurfPoint {
        let (chart, y) = self.eval_state(s);
        surface.from_chart(chart, [y[0], y[1]])
    }

    /// (point, direction angle to the meridian) at arclength s.
    pub fn eval_dir(&self, surface: &ConeSurface, s: f64) -> (SurfPoint, f64) {
        let (chart, y) = self.eval_state(s);
        let pt = surface.from_chart(chart, [y[0], y[1]]);
        let (dr, dt) = velocity_global(surface, chart, [y[0], y[1]], [y[2], y[3]]);
        (pt, direction_angle(surface, pt.r, dr, dt))
    }

    pub fn end_point(&self, surface: &ConeSurface) -> SurfPoint {
        self.eval(surface, self.total_length)
    }

    /// Max geodesic-equation residual over dense samples: finite-difference
    /// acceleration against the Christoffel term, in the scaled norm. Uses
    /// the 5-point fourth-order stencil so the dense-output noise floor is
    /// not amplified above the truncation error.
    pub fn max_residual(&self, surface: &ConeSurface, n_samples: usize) -> f64 {
        let h = 0.01;
        let mut worst = 0.0f64;
        for seg in &self.segs {
            let inner0 = seg.s0 + 2.5 * h;
            let inner1 = seg.s1 - 2.5 * h;
            if inner1 <= inner0 {
                continue;
            }
            for i in 0..n_samples {
                let s = inner0 + (inner1 - inner0) * i as f64 / (n_samples - 1).max(1) as f64;
                let ym2 = seg.dense.eval(s - 2.0 * h);
                let ym = seg.dense.eval(s - h);
                let y0 = seg.dense.eval(s);
                let yp = seg.dense.eval(s + h);
                let yp2 = seg.dense.eval(s + 2.0 * h);
                let f = rhs(surface, seg.chart)(s, &y0);
                for k in 0..2 {
                    let fd = (-yp2[k] + 16.0 * yp[k] - 30.0 * y0[k] + 16.0 * ym[k] - ym2[k])
                        / (12.0 * h * h);
                    worst = worst.max((fd - f[k + 2]).abs());
                }
            }
        }
        worst
    }

    /// Unit-speed defect max |g(v,v) - 1| over samples.
    pub fn max_speed_defect(&self, surface: &ConeSurface, n_samples: usize) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=n_samples {
            let s = self.total_length * i as f64 / n_samples as f64;
            let (chart, y) = self.eval_state(s);
            let n = surface.norm(chart, [y[0], y[1]], [y[2], y[3]]);
            worst = worst.max((n - 1.0).abs());
        }
        worst
    }
}

struct Tracer<'a> {
    surface: &'a ConeSurface,
    opts: OdeOpts,
    /// base -> cover switch radius
    r_in: f64,
    /// cover -> base switch radius
    r_out: f64,
    eps_hit: f64,
}

impl<'a> Tracer<'a> {
    fn new(surface: &'a ConeSurface) -> Self {
        let rho = surface.chart_radius();
        let guard = surface.r_guard();
        Tracer {
            surface,
            opts: OdeOpts {
                abs_tol: 1e-12,
                rel_tol: 1e-12,
                max_step: 0.1 * surface.len(),
                ..OdeOpts::default()
            },
            r_in: 0.8 * rho,
            r_out: (1.2 * rho).min(0.5 * (rho + guard)),
            eps_hit: 1e-9 * surface.len(),
        }
    }

    /// Signed chart-exit function: positive while the chart stays valid.
    fn exit_margin(&self, chart: Chart, y: &[f64; 4]) -> f64 {
        let len = self.surface.len();
        match chart {
            Chart::Base => (y[0] - self.r_in).min(len - self.r_in - y[0]),
            Chart::Cover(_) => self.r_out - (y[0] * y[0] + y[1] * y[1]).sqrt(),
        }
    }

    fn chunk_len(&self, chart: Chart, y: &[f64; 4]) -> f64 {
        let len = self.surface.len();
        match chart {
            Chart::Base => {
                let margin = y[0].min(len - y[0]) - 0.5 * self.r_in;
                margin.clamp(0.01 * len, 0.5 * len)
            }
            Chart::Cover(_) => {
                let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
                (self.surface.r_guard() - rho).max(0.01 * len)
            }
        }
    }

    /// Convert the state at a detected boundary crossing into the chart on
    /// the far side. The target chart is decided from which boundary was
    /// crossed, never from a fragile radius comparison at the crossing point.
    fn switch_chart(&self, chart: Chart, y: [f64; 4]) -> (Chart, [f64; 4]) {
        let s = self.surface;
        let pt = s.from_chart(chart, [y[0], y[1]]);
        let (dr, dt) = velocity_global(s, chart, [y[0], y[1]], [y[2], y[3]]);
        let new_chart = match chart {
            Chart::Base => {
                if pt.r < 0.5 * s.len() {
                    Chart::Cover(Pole::North)
                } else {
                    Chart::Cover(Pole::South)
                }
            }
            Chart::Cover(_) => Chart::Base,
        };
        let xy = s.to_chart(new_chart, pt, None);
        let v = velocity_from_global(s, new_chart, xy, dr, dt);
        (new_chart, [xy[0], xy[1], v[0], v[1]])
    }

    /// Locate a cone passage in a cover segment: zero of the radial momentum
    /// x.v with rho below eps_hit.
    fn cone_hit(&self, seg: &PathSeg) -> Option<f64> {
        let Chart::Cover(_) = seg.chart else { return None };
        let y0 = seg.dense.eval(seg.s0);
        // cover angular momentum, conserved along the segment
        let j = y0[0] * y0[3] - y0[1] * y0[2];
        if j.abs() >= self.eps_hit {
            return None;
        }
        let radial = |s: f64| {
            let y = seg.dense.eval(s);
            y[0] * y[2] + y[1] * y[3]
        };
        let n = 64;
        let mut prev = radial(seg.s0);
        for i in 1..=n {
            let s = seg.s0 + (seg.s1 - seg.s0) * i as f64 / n as f64;
            let cur = radial(s);
            if prev < 0.0 && cur >= 0.0 {
                let lo = seg.s0 + (seg.s1 - seg.s0) * (i - 1) as f64 / n as f64;
                let s_hit = bisect(lo, s, 1e-13, &radial);
                let yh = seg.dense.eval(s_hit);
                let rho = (yh[0] * yh[0] + yh[1] * yh[1]).sqrt();
                if rho < self.eps_hit {
                    return Some(s_hit);
                }
                return None;
            }
            prev = cur;
        }
        None
    }

    fn make_event(&self, seg: &PathSeg, s_hit: f64) -> ConeEvent {
        let Chart::Cover(pole) = seg.chart else { unreachable!() };
        let order = self.surface.pole_order(pole);
        let y = seg.dense.eval(s_hit);
        let beta = y[3].atan2(y[2]);
        // straightness of the development across the center
        let d = 1e-4 * self.surface.len();
        let defect = {
            let a = seg.dense.eval((s_hit - d).max(seg.s0));
            let b = seg.dense.eval((s_hit + d).min(seg.s1));
            angle_diff(b[3].atan2(b[2]), a[3].atan2(a[2])).abs()
        };
        let of = order as f64;
        let (theta_in, theta_out) = match pole {
            Pole::North => (
                wrap_angle(of * (beta + std::f64::consts::PI)),
                wrap_angle(of * beta),
            ),
            Pole::South => (
                wrap_angle(-of * (beta + std::f64::consts::PI)),
                wrap_angle(-of * beta),
            ),
        };
        ConeEvent {
            s: s_hit,
            cone: ConePoint { pole, order, position: self.surface.pole_position(pole) },
            theta_in,
            theta_out,
            kind: if order % 2 == 0 { ConeEventKind::Reflect } else { ConeEventKind::PassThrough },
            cover_defect: defect,
        }
    }

    fn trace(
        &self,
        start: SurfPoint,
        psi: f64,
        length: f64,
    ) -> Result<GeodesicPath, GeodesicError> {
        let s = self.surface;
        let chart = if start.r < self.r_in {
            Chart::Cover(Pole::North)
        } else if s.len() - start.r < self.r_in {
            Chart::Cover(Pole::South)
        } else {
            Chart::Base
        };
        let xy = s.to_chart(chart, start, None);
        // unit vector at angle psi from the meridian in the oriented frame
        let (f0, _, _) = s.warp(start.r);
        let v = velocity_from_global(s, chart, xy, psi.cos(), psi.sin() / f0);
        let mut y = [xy[0], xy[1], v[0], v[1]];
        // exact unit speed (with bump the frame above is off by e^{-u})
        let n = s.norm(chart, xy, [y[2], y[3]]);
        y[2] /= n;
        y[3] /= n;

        let mut chart = chart;
        let mut segs: Vec<PathSeg> = Vec::new();
        let mut events: Vec<ConeEvent> = Vec::new();
        let mut cur = 0.0f64;
        while cur < length - 1e-13 * s.len() {
            let chunk = self.chunk_len(chart, &y).min(length - cur);
            let dense = integrate(rhs(s, chart), cur, cur + chunk, y, &self.opts)?;
            // earliest chart-exit crossing inside the chunk
            let margin = |sv: f64| self.exit_margin(chart, &dense.eval(sv));
            let n = 32;
            let mut s_exit = None;
            let mut prev = margin(cur);
            for i in 1..=n {
                let sv = cur + chunk * i as f64 / n as f64;
                let m = margin(sv);
                if prev > 0.0 && m <= 0.0 {
                    let lo = cur + chunk * (i - 1) as f64 / n as f64;
                    s_exit = Some(bisect(lo, sv, 1e-13, &margin));
                    break;
                }
                prev = m;
            }
            let s_end = s_exit.unwrap_or(cur + chunk);
            let seg = PathSeg { s0: cur, s1: s_end, chart, dense };
            if let Some(s_hit) = self.cone_hit(&seg) {
                events.push(self.make_event(&seg, s_hit));
            }
            let y_end = seg.dense.eval(s_end);
            segs.push(seg);
            cur = s_end;
            if s_exit.is_some() {
                let (nc, ny) = self.switch_chart(chart, y_end);
                chart = nc;
                y = ny;
            } else {
                y = y_end;
            }
        }
        Ok(GeodesicPath { segs, events, total_length: length, start, start_angle: psi })
    }
}

/// Trace a geodesic from `start` at angle `psi` to the meridian, for the
/// given arclength.
pub fn shoot(
    surface: &ConeSurface,
    start: SurfPoint,
    psi: f64,
    length: f64,
) -> Result<GeodesicPath, GeodesicError> {
    Tracer::new(surface).trace(start, psi, length)
}

/// Max deviation of the Clairaut invariant f(r) sin(psi) along the path.
pub fn clairaut_invariant(
    surface: &ConeSurface,
    path: &GeodesicPath,
) -> Result<f64, GeodesicError> {
    if surface.has_bump() {
        return Err(SurfaceError::NotSymmetric.into());
    }
    let nu = |s: f64| {
        let (chart, y) = path.eval_state(s);
        match chart {
            Chart::Base => {
                let (f, _, _) = surface.warp(y[0]);
                f * f * y[3]
            }
            Chart::Cover(pole) => {
                let rho2 = y[0] * y[0] + y[1] * y[1];
                let j = y[0] * y[3] - y[1] * y[2];
                let order = surface.pole_order(pole) as f64;
                let rho = rho2.sqrt();
                let (f, _, _) = surface.warp(match pole {
                    Pole::North => rho,
                    Pole::South => surface.len() - rho,
                });
                let ratio = if rho2 > 0.0 { (order * f).powi(2) / rho2 } else { 1.0 };
                let sign = match pole {
                    Pole::North => 1.0,
                    Pole::South => -1.0,
                };
                sign * ratio * j / order
            }
        }
    };
    let nu0 = nu(0.0);
    let n = 2000;
    let mut worst = 0.0f64;
    for i in 0..=n {
        let s = path.total_length * i as f64 / n as f64;
        worst = worst.max((nu(s) - nu0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConeSurface;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn equator_closes() {
        let s = ConeSurface::round();
        let p = shoot(&s, SurfPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2, TAU).unwrap();
        assert!(p.events.is_empty());
        let end = p.end_point(&s);
        assert!(s.dist_local(end, SurfPoint::new(FRAC_PI_2, 0.0)) < 1e-8);
        let (_, chi) = p.eval_dir(&s, TAU);
        assert!(angle_diff(chi, FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn meridian_through_poles() {
        // a meridian on the round sphere passes both smooth poles and closes
        let s = ConeSurface::round();
        let p = shoot(&s, SurfPoint::new(FRAC_PI_2, 0.3), 0.0, TAU).unwrap();
        let end = p.end_point(&s);
        assert!(s.dist_local(end, SurfPoint::new(FRAC_PI_2, 0.3)) < 1e-7);
        // smooth poles (order 1) report PassThrough events
        assert_eq!(p.events.len(), 2);
        for e in &p.events {
            assert_eq!(e.kind, ConeEventKind::PassThrough);
            assert!(e.cover_defect < 1e-9);
        }
    }

    #[test]
    fn apex_ray_odd_order_passes_through() {
        let s = ConeSurface::flat_cone(3);
        let start = SurfPoint::new(1.5, 0.7);
        let p = shoot(&s, start, PI, 3.0).unwrap();
        assert_eq!(p.events.len(), 1);
        let e = &p.events[0];
        assert_eq!(e.kind, ConeEventKind::PassThrough);
        assert!(angle_diff(e.theta_out, e.theta_in + PI).abs() < 1e-9);
        assert!((e.theta_in - 0.7).abs() < 1e-7);
        assert!(e.cover_defect < 1e-9);
        // after the apex the ray recedes along theta_in + pi
        let end = p.end_point(&s);
        assert!((end.r - 1.5).abs() < 1e-7);
        assert!(angle_diff(end.theta, 0.7 + PI).abs() < 1e-7);
    }

    #[test]
    fn apex_ray_even_order_reflects() {
        let s = ConeSurface::flat_cone(2);
        let start = SurfPoint::new(1.5, 0.7);
        let p = shoot(&s, start, PI, 3.0).unwrap();
        assert_eq!(p.events.len(), 1);
        let e = &p.events[0];
        assert_eq!(e.kind, ConeEventKind::Reflect);
        assert!(angle_diff(e.theta_out, e.theta_in).abs() < 1e-9);
        // the outgoing ray retraces the incoming one
        let end = p.end_point(&s);
        assert!((end.r - 1.5).abs() < 1e-7);
        assert!(angle_diff(end.theta, 0.7).abs() < 1e-7);
    }

    #[test]
    fn cone_event_parity_random_rays() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p_ord in 2u32..=7 {
            let s = ConeSurface::football(p_ord);
            for _ in 0..20 {
                let r0: f64 = rng.gen_range(0.5..1.2);
                let t0: f64 = rng.gen_range(0.0..TAU);
                let path = shoot(&s, SurfPoint::new(r0, t0), PI, 2.0 * r0.min(1.0)).unwrap();
                assert_eq!(path.events.len(), 1, "p={p_ord} r0={r0} t0={t0}");
                let e = &path.events[0];
                let want = if p_ord % 2 == 0 {
                    ConeEventKind::Reflect
                } else {
                    ConeEventKind::PassThrough
                };
                assert_eq!(e.kind, want);
                assert!(e.cover_defect < 1e-9);
            }
        }
    }

    #[test]
    fn clairaut_examples() {
        let s = ConeSurface::round();
        let p = shoot(&s, SurfPoint::new(1.1, 0.4), 0.83, 10.0).unwrap();
        assert!(clairaut_invariant(&s, &p).unwrap() < 1e-7);
        // meridian: invariant identically zero
        let m = shoot(&s, SurfPoint::new(1.1, 0.4), 0.0, 5.0).unwrap();
        assert!(clairaut_invariant(&s, &m).unwrap() < 1e-12);
        // spindle waist parallel
        let sp = ConeSurface::spindle(3, 1);
        let r_w = sp.profile().waist_r().unwrap();
        let w = shoot(&sp, SurfPoint::new(r_w, 0.0), FRAC_PI_2, 5.0).unwrap();
        assert!(clairaut_invariant(&sp, &w).unwrap() < 1e-10);
        // NotSymmetric with a bump
        let b = ConeSurface::bumped_spindle();
        let pb = shoot(&b, SurfPoint::new(1.5, 0.0), 1.0, 2.0).unwrap();
        assert!(matches!(
            clairaut_invariant(&b, &pb),
            Err(GeodesicError::Surface(SurfaceError::NotSymmetric))
        ));
    }

    #[test]
    fn ode_residual_and_speed() {
        let s = ConeSurface::spindle(3, 2);
        let p = shoot(&s, SurfPoint::new(1.3, 0.2), 1.1, 8.0).unwrap();
        assert!(p.max_residual(&s, 40) < 1e-6);
        assert!(p.max_speed_defect(&s, 200) < 1e-9);
    }

    #[test]
    fn shooting_symmetry() {
        let s = ConeSurface::spindle(2, 1);
        let start = SurfPoint::new(1.0, 0.3);
        let len = 4.0;
        let fwd = shoot(&s, start, 0.9, len).unwrap();
        let (end, chi) = fwd.eval_dir(&s, len);
        let bwd = shoot(&s, end, wrap_angle(chi + PI), len).unwrap();
        for i in 0..=40 {
            let sv = len * i as f64 / 40.0;
            let a = fwd.eval(&s, sv);
            let b = bwd.eval(&s, len - sv);
            assert!(s.dist_local(a, b) < 1e-8, "s={sv}");
        }
    }
}
