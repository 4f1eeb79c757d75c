//! Cone-surface metrics: warped products dr^2 + f(r)^2 dtheta^2 on [0, L]
//! with at most two cone points at the poles, optionally multiplied by a
//! conformal factor e^{2u} supported away from the poles.
//!
//! Pole neighborhoods are handled exclusively through branched covers: the
//! order-p cover has the smooth warped metric dr^2 + (p f)^2 dphi^2 and is
//! integrated in Cartesian coordinates, so no ambient embedding and no cone
//! regularization is ever needed.

pub mod bump;
pub mod profile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bump::{Bump, BumpTerm};
pub use profile::Profile;

use crate::num::angle_diff;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("metric chart degenerates at a pole (r = {r:.6}); use a cover chart")]
    PoleEvaluation { r: f64 },
    #[error("point at radial distance {r:.6} is outside the cover chart (radius {radius:.6})")]
    OutOfChart { r: f64, radius: f64 },
    #[error("sheet {sheet} out of range for a cover of order {order}")]
    BadSheet { sheet: u32, order: u32 },
    #[error("operation requires a rotationally symmetric metric (no conformal bump)")]
    NotSymmetric,
    #[error("invalid surface definition: {0}")]
    InvalidDefinition(String),
    #[error("minimizing search failed to converge: {0}")]
    ConvergenceFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pole {
    North,
    South,
}

/// An isolated cone point at a pole. Order 1 means the pole is smooth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConePoint {
    pub pole: Pole,
    pub order: u32,
    /// radial coordinate of the pole (0 or L)
    pub position: f64,
}

/// A point in global surface coordinates (r, theta), theta in [0, 2 pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfPoint {
    pub r: f64,
    pub theta: f64,
}

impl SurfPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        SurfPoint { r, theta: crate::num::wrap_angle(theta) }
    }
}

/// Computation chart: the global (r, theta) chart, or Cartesian coordinates
/// on the branched cover around one of the poles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Base,
    Cover(Pole),
}

pub type MetricTensor = [[f64; 2]; 2];
pub type Gamma = [[[f64; 2]; 2]; 2]; // Gamma[k][i][j]

#[derive(Debug, Clone, Serialize)]
pub struct ConeSurface {
    profile: Profile,
    bump: Option<Bump>,
    p: u32,
    q: u32,
    len: f64,
    r_guard: f64,
    chart_radius: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SurfaceOpts {
    pub r_guard_frac: f64,
    pub chart_radius_frac: f64,
    /// reject surfaces with gcd(p, q) > 1 (simply connected mode)
    pub require_simply_connected: bool,
}

impl Default for SurfaceOpts {
    fn default() -> Self {
        SurfaceOpts { r_guard_frac: 0.15, chart_radius_frac: 0.1, require_simply_connected: false }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ConeSurface {
    pub fn new(
        mut profile: Profile,
        bump: Option<Bump>,
        opts: SurfaceOpts,
    ) -> Result<Self, SurfaceError> {
        profile.prepare().map_err(SurfaceError::InvalidDefinition)?;
        let (p, q) = profile.orders();
        let len = profile.total_len();
        if opts.require_simply_connected && gcd(p, q) != 1 {
            return Err(SurfaceError::InvalidDefinition(format!(
                "simply connected mode requires coprime cone orders, got ({p}, {q})"
            )));
        }
        let r_guard = opts.r_guard_frac * len;
        let chart_radius = opts.chart_radius_frac * len;
        if chart_radius >= r_guard {
            return Err(SurfaceError::InvalidDefinition(
                "chart radius must be smaller than the pole guard radius".into(),
            ));
        }
        // cone-angle consistency at machine tolerance
        let h = 1e-7 * len;
        let dn = (profile.eval(h).0 / h) * p as f64;
        let ds = (profile.eval(len - h).0 / h) * q as f64;
        if (dn - 1.0).abs() > 1e-5 || (ds - 1.0).abs() > 1e-5 {
            return Err(SurfaceError::InvalidDefinition(format!(
                "profile slopes inconsistent with cone orders: p*f'(0) ~ {dn:.8}, -q*f'(L) ~ {ds:.8}"
            )));
        }
        if let Some(b) = &bump {
            b.validate(r_guard, len).map_err(SurfaceError::InvalidDefinition)?;
        }
        Ok(ConeSurface { profile, bump, p, q, len, r_guard, chart_radius })
    }

    pub fn round() -> Self {
        Self::new(Profile::Round, None, SurfaceOpts::default()).unwrap()
    }

    pub fn football(p: u32) -> Self {
        Self::new(Profile::Football { p }, None, SurfaceOpts::default()).unwrap()
    }

    pub fn spindle(p: u32, q: u32) -> Self {
        Self::new(Profile::Spindle { p, q }, None, SurfaceOpts::default()).unwrap()
    }

    pub fn flat_cone(p: u32) -> Self {
        Self::new(
            Profile::FlatCone { p, flat_extent: 2.0, total_len: 3.2 },
            None,
            SurfaceOpts::default(),
        )
        .unwrap()
    }

    /// Spindle with a positively curved bulge and an exactly flat neck;
    /// the default geometry used by the cascade experiments.
    pub fn flat_neck() -> Self {
        Self::new(
            Profile::FlatNeck {
                p: 3,
                q: 2,
                bulge_height: 1.0,
                bulge_pos: 1.0,
                bulge_f2: -0.9,
                neck_height: 0.6,
                neck_start: 1.8,
                neck_len: 3.0,
                total_len: 6.0,
                spline: None,
            },
            None,
            SurfaceOpts::default(),
        )
        .unwrap()
    }

    /// The shipped asymmetric example: the (3, 1) spindle with a fixed
    /// mid-latitude bump of angular mode 2.
    pub fn bumped_spindle() -> Self {
        let profile = Profile::Spindle { p: 3, q: 1 };
        let len = profile.total_len();
        Self::new(
            profile,
            Some(Bump {
                terms: vec![BumpTerm {
                    amplitude: 0.05,
                    r_center: 0.52 * len,
                    r_sigma: 0.3 * len,
                    mode: 2,
                    phase: 0.0,
                }],
            }),
            SurfaceOpts::default(),
        )
        .unwrap()
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn bump(&self) -> Option<&Bump> {
        self.bump.as_ref()
    }

    pub fn has_bump(&self) -> bool {
        self.bump.as_ref().is_some_and(|b| !b.terms.is_empty())
    }

    pub fn orders(&self) -> (u32, u32) {
        (self.p, self.q)
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r_guard(&self) -> f64 {
        self.r_guard
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }

    pub fn is_simply_connected(&self) -> bool {
        gcd(self.p, self.q) == 1
    }

    pub fn cone_points(&self) -> Vec<ConePoint> {
        let mut v = Vec::new();
        if self.p >= 2 {
            v.push(ConePoint { pole: Pole::North, order: self.p, position: 0.0 });
        }
        if self.q >= 2 {
            v.push(ConePoint { pole: Pole::South, order: self.q, position: self.len });
        }
        v
    }

    pub fn pole_order(&self, pole: Pole) -> u32 {
        match pole {
            Pole::North => self.p,
            Pole::South => self.q,
        }
    }

    pub fn pole_position(&self, pole: Pole) -> f64 {
        match pole {
            Pole::North => 0.0,
            Pole::South => self.len,
        }
    }

    /// Radial distance of a point from the given pole.
    pub fn dist_to_pole(&self, pt: SurfPoint, pole: Pole) -> f64 {
        match pole {
            Pole::North => pt.r,
            Pole::South => self.len - pt.r,
        }
    }

    pub fn nearest_pole(&self, pt: SurfPoint) -> Pole {
        if pt.r < 0.5 * self.len {
            Pole::North
        } else {
            Pole::South
        }
    }

    pub fn warp(&self, r: f64) -> (f64, f64, f64) {
        self.profile.eval(r)
    }

    fn bump_jet(&self, r: f64, theta: f64) -> bump::BumpJet {
        match &self.bump {
            Some(b) => b.jet(r, theta),
            None => bump::BumpJet::default(),
        }
    }

    // ---- spec operations -------------------------------------------------

    /// Metric tensor in the (r, theta) chart at a regular point.
    pub fn metric_at(&self, pt: SurfPoint) -> Result<MetricTensor, SurfaceError> {
        let eps = 1e-12 * self.len;
        if pt.r < eps || pt.r > self.len - eps {
            return Err(SurfaceError::PoleEvaluation { r: pt.r });
        }
        Ok(self.metric(Chart::Base, [pt.r, pt.theta]))
    }

    /// Gauss curvature at a regular point: e^{-2u} (K0 - Lap0 u) with
    /// K0 = -f''/f. Outside the bump supports this is exactly the
    /// unperturbed -f''/f code path.
    pub fn gauss_curvature(&self, pt: SurfPoint) -> Result<f64, SurfaceError> {
        let eps = 1e-12 * self.len;
        if pt.r < eps || pt.r > self.len - eps {
            return Err(SurfaceError::PoleEvaluation { r: pt.r });
        }
        Ok(self.curvature_raw(pt.r, pt.theta))
    }

    pub(crate) fn curvature_raw(&self, r: f64, theta: f64) -> f64 {
        let r = r.clamp(1e-9 * self.len, self.len - 1e-9 * self.len);
        let (f, f1, f2) = self.warp(r);
        let k0 = -f2 / f;
        match &self.bump {
            Some(b) if b.is_supported_at(r) => {
                let j = b.jet(r, theta);
                let lap = j.urr + (f1 / f) * j.ur + j.utt / (f * f);
                (-2.0 * j.u).exp() * (k0 - lap)
            }
            _ => k0,
        }
    }

    /// Curvature as a function of radial distance from a pole (the metric is
    /// exactly rotationally symmetric there). Well defined in the limit x -> 0.
    pub fn curvature_at_radial(&self, pole: Pole, x: f64) -> f64 {
        let x = x.max(1e-8 * self.len);
        let r = match pole {
            Pole::North => x,
            Pole::South => self.len - x,
        };
        let (f, _, f2) = self.warp(r);
        -f2 / f
    }

    // ---- charts ----------------------------------------------------------

    /// Chart in which a local computation around `pt` should run.
    pub fn chart_at(&self, pt: SurfPoint) -> Chart {
        if pt.r < self.chart_radius {
            Chart::Cover(Pole::North)
        } else if pt.r > self.len - self.chart_radius {
            Chart::Cover(Pole::South)
        } else {
            Chart::Base
        }
    }

    /// Common chart for a cluster of nearby points: a cover chart only if all
    /// of them fit into it.
    pub fn chart_for(&self, pts: impl Iterator<Item = SurfPoint> + Clone) -> Chart {
        let mut all_north = true;
        let mut all_south = true;
        for pt in pts {
            all_north &= pt.r < self.chart_radius;
            all_south &= pt.r > self.len - self.chart_radius;
        }
        if all_north {
            Chart::Cover(Pole::North)
        } else if all_south {
            Chart::Cover(Pole::South)
        } else {
            Chart::Base
        }
    }

    /// Chart coordinates of `pt`. For cover charts the angle lift is chosen
    /// nearest to `ref_xy` (required there for points away from the lift cut;
    /// for the base chart `ref_xy` unwraps theta).
    pub fn to_chart(&self, chart: Chart, pt: SurfPoint, ref_xy: Option<[f64; 2]>) -> [f64; 2] {
        match chart {
            Chart::Base => {
                let theta = match ref_xy {
                    Some(r) => r[1] + angle_diff(pt.theta, r[1]),
                    None => pt.theta,
                };
                [pt.r, theta]
            }
            Chart::Cover(pole) => {
                let order = self.pole_order(pole) as f64;
                let rho = self.dist_to_pole(pt, pole);
                let phi = match (pole, ref_xy) {
                    (Pole::North, None) => pt.theta / order,
                    (Pole::South, None) => -pt.theta / order,
                    (Pole::North, Some(xy)) => {
                        let pr = xy[1].atan2(xy[0]);
                        pr + angle_diff(pt.theta, order * pr) / order
                    }
                    (Pole::South, Some(xy)) => {
                        let pr = xy[1].atan2(xy[0]);
                        pr - angle_diff(pt.theta, -order * pr) / order
                    }
                };
                [rho * phi.cos(), rho * phi.sin()]
            }
        }
    }

    pub fn from_chart(&self, chart: Chart, xy: [f64; 2]) -> SurfPoint {
        match chart {
            Chart::Base => SurfPoint::new(xy[0], xy[1]),
            Chart::Cover(pole) => {
                let order = self.pole_order(pole) as f64;
                let rho = (xy[0] * xy[0] + xy[1] * xy[1]).sqrt();
                let phi = xy[1].atan2(xy[0]);
                match pole {
                    Pole::North => SurfPoint::new(rho, order * phi),
                    Pole::South => SurfPoint::new(self.len - rho, -order * phi),
                }
            }
        }
    }

    /// Cover excess A(rho) = (F^2 - rho^2)/rho^4 and its derivative, where
    /// F = order * f is the cover warp around `pole`.
    fn cover_a(&self, pole: Pole, rho: f64) -> (f64, f64) {
        if rho < 1e-12 * self.len {
            return (0.0, 0.0);
        }
        let (d, d1) = self.profile.cover_excess(pole, rho);
        let r2 = rho * rho;
        let r4 = r2 * r2;
        let a = d * (d + 2.0 * rho) / r4;
        let a1 = (d1 * (d + 2.0 * rho) + d * (d1 + 2.0)) / r4 - 4.0 * a / rho;
        (a, a1)
    }

    pub fn metric(&self, chart: Chart, xy: [f64; 2]) -> MetricTensor {
        match chart {
            Chart::Base => {
                let (f, _, _) = self.warp(xy[0]);
                let j = self.bump_jet(xy[0], xy[1]);
                let e2u = (2.0 * j.u).exp();
                [[e2u, 0.0], [0.0, e2u * f * f]]
            }
            Chart::Cover(pole) => {
                let rho = (xy[0] * xy[0] + xy[1] * xy[1]).sqrt();
                let (a, _) = self.cover_a(pole, rho);
                let m = [-xy[1], xy[0]];
                [
                    [1.0 + a * m[0] * m[0], a * m[0] * m[1]],
                    [a * m[0] * m[1], 1.0 + a * m[1] * m[1]],
                ]
            }
        }
    }

    /// Christoffel symbols Gamma[k][i][j] in the given chart.
    pub fn gamma(&self, chart: Chart, xy: [f64; 2]) -> Gamma {
        match chart {
            Chart::Base => {
                let (f, f1, _) = self.warp(xy[0]);
                let j = self.bump_jet(xy[0], xy[1]);
                let g_rtt = -(j.ur * f * f + f * f1);
                [
                    // Gamma^r
                    [[j.ur, j.ut], [j.ut, g_rtt]],
                    // Gamma^theta
                    [
                        [-j.ut / (f * f), j.ur + f1 / f],
                        [j.ur + f1 / f, j.ut],
                    ],
                ]
            }
            Chart::Cover(pole) => {
                let rho = (xy[0] * xy[0] + xy[1] * xy[1]).sqrt();
                let (a, a1) = self.cover_a(pole, rho);
                let m = [-xy[1], xy[0]];
                // dg[l][i][j] = d_l g_ij
                let mut dg = [[[0.0f64; 2]; 2]; 2];
                // eps[i][j]: d_i m_j
                let eps = [[0.0, 1.0], [-1.0, 0.0]];
                for l in 0..2 {
                    let al = if rho > 0.0 { a1 * xy[l] / rho } else { 0.0 };
                    for i in 0..2 {
                        for j2 in 0..2 {
                            dg[l][i][j2] = al * m[i] * m[j2]
                                + a * (eps[l][i] * m[j2] + eps[l][j2] * m[i]);
                        }
                    }
                }
                // inverse metric via Sherman-Morrison
                let denom = 1.0 + a * rho * rho;
                let b = a / denom;
                let mut ginv = [[0.0f64; 2]; 2];
                for i in 0..2 {
                    for j2 in 0..2 {
                        ginv[i][j2] = (if i == j2 { 1.0 } else { 0.0 }) - b * m[i] * m[j2];
                    }
                }
                let mut gam = [[[0.0f64; 2]; 2]; 2];
                for k in 0..2 {
                    for i in 0..2 {
                        for j2 in 0..2 {
                            let mut s = 0.0;
                            for l in 0..2 {
                                s += ginv[k][l] * (dg[i][j2][l] + dg[j2][i][l] - dg[l][i][j2]);
                            }
                            gam[k][i][j2] = 0.5 * s;
                        }
                    }
                }
                gam
            }
        }
    }

    /// Second-order log map: chart coordinates of w in normal coordinates at v.
    pub fn log2(&self, chart: Chart, v: [f64; 2], w: [f64; 2]) -> [f64; 2] {
        let d = [w[0] - v[0], w[1] - v[1]];
        let gam = self.gamma(chart, v);
        let mut out = [0.0; 2];
        for k in 0..2 {
            let mut corr = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    corr += gam[k][i][j] * d[i] * d[j];
                }
            }
            out[k] = d[k] + 0.5 * corr;
        }
        out
    }

    /// Second-order exp map: chart point reached from v by normal coordinates xi.
    pub fn exp2(&self, chart: Chart, v: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
        let gam = self.gamma(chart, v);
        let mut out = [0.0; 2];
        for k in 0..2 {
            let mut corr = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    corr += gam[k][i][j] * xi[i] * xi[j];
                }
            }
            out[k] = v[k] + xi[k] - 0.5 * corr;
        }
        out
    }

    /// Oriented orthonormal frame at a chart point: columns are the chart
    /// components of e1, e2.
    pub fn frame(&self, chart: Chart, xy: [f64; 2]) -> [[f64; 2]; 2] {
        let g = self.metric(chart, xy);
        let e1n = g[0][0].sqrt();
        let e1 = [1.0 / e1n, 0.0];
        // Gram-Schmidt of d/dx2 against e1
        let proj = g[0][1] / g[0][0];
        let v = [-proj, 1.0];
        let n = (g[0][0] * v[0] * v[0] + 2.0 * g[0][1] * v[0] * v[1] + g[1][1] * v[1] * v[1]).sqrt();
        [e1, [v[0] / n, v[1] / n]]
    }

    /// Components of a chart vector in the orthonormal frame at xy.
    pub fn to_frame(&self, chart: Chart, xy: [f64; 2], vec: [f64; 2]) -> [f64; 2] {
        let g = self.metric(chart, xy);
        let fr = self.frame(chart, xy);
        let ip = |a: [f64; 2], b: [f64; 2]| {
            g[0][0] * a[0] * b[0] + g[0][1] * (a[0] * b[1] + a[1] * b[0]) + g[1][1] * a[1] * b[1]
        };
        [ip(vec, fr[0]), ip(vec, fr[1])]
    }

    pub fn from_frame(&self, chart: Chart, xy: [f64; 2], comp: [f64; 2]) -> [f64; 2] {
        let fr = self.frame(chart, xy);
        [comp[0] * fr[0][0] + comp[1] * fr[1][0], comp[0] * fr[0][1] + comp[1] * fr[1][1]]
    }

    pub fn norm(&self, chart: Chart, xy: [f64; 2], vec: [f64; 2]) -> f64 {
        let g = self.metric(chart, xy);
        (g[0][0] * vec[0] * vec[0] + 2.0 * g[0][1] * vec[0] * vec[1] + g[1][1] * vec[1] * vec[1])
            .sqrt()
    }

    /// Approximate geodesic distance between nearby points (second-order
    /// development; accurate for separations small against the curvature
    /// scale, which is all its callers need).
    pub fn dist_local(&self, a: SurfPoint, b: SurfPoint) -> f64 {
        let chart = self.chart_for([a, b].iter().copied());
        let va = self.to_chart(chart, a, None);
        let vb = self.to_chart(chart, b, Some(va));
        let l = self.log2(chart, va, vb);
        self.norm(chart, va, l)
    }
}

/// Local branched cover around a cone point, exposed with the sheet-indexed
/// lift of the spec contract.
#[derive(Debug, Clone)]
pub struct CoverChart {
    pub center: ConePoint,
    pub radius: f64,
    pub sheet_count: u32,
}

impl CoverChart {
    pub fn new(surface: &ConeSurface, pole: Pole) -> Self {
        CoverChart {
            center: ConePoint {
                pole,
                order: surface.pole_order(pole),
                position: surface.pole_position(pole),
            },
            radius: surface.chart_radius(),
            sheet_count: surface.pole_order(pole),
        }
    }

    /// Lift a base point (given by its radial distance from the center and
    /// theta) to the given sheet: phi = (theta + 2 pi sheet)/p.
    pub fn lift_to_cover(&self, rho: f64, theta: f64, sheet: u32) -> Result<(f64, f64), SurfaceError> {
        if rho >= self.radius {
            return Err(SurfaceError::OutOfChart { r: rho, radius: self.radius });
        }
        if sheet >= self.sheet_count {
            return Err(SurfaceError::BadSheet { sheet, order: self.sheet_count });
        }
        let p = self.sheet_count as f64;
        Ok((rho, (theta + std::f64::consts::TAU * sheet as f64) / p))
    }

    /// Projection theta = p * phi mod 2 pi.
    pub fn project(&self, phi: f64) -> f64 {
        crate::num::wrap_angle(self.sheet_count as f64 * phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn metric_round_sphere() {
        let s = ConeSurface::round();
        let g = s.metric_at(SurfPoint::new(FRAC_PI_2, 0.0)).unwrap();
        assert!((g[0][0] - 1.0).abs() < 1e-14);
        assert!((g[1][1] - 1.0).abs() < 1e-14);
        let g = s.metric_at(SurfPoint::new(FRAC_PI_4, 0.0)).unwrap();
        assert!((g[1][1] - 0.5).abs() < 1e-14);
        assert!(matches!(
            s.metric_at(SurfPoint::new(0.0, 0.0)),
            Err(SurfaceError::PoleEvaluation { .. })
        ));
    }

    #[test]
    fn metric_flat_cone_patch() {
        let s = ConeSurface::flat_cone(2);
        let g = s.metric_at(SurfPoint::new(2.0, 1.0)).unwrap();
        assert!((g[0][0] - 1.0).abs() < 1e-14);
        assert!((g[1][1] - 1.0).abs() < 1e-14, "f(2)^2 = (2/2)^2 = 1");
    }

    #[test]
    fn curvature_round_and_flat() {
        let s = ConeSurface::round();
        for &r in &[0.3, 1.0, 2.0, 3.0] {
            assert!((s.gauss_curvature(SurfPoint::new(r, 0.5)).unwrap() - 1.0).abs() < 1e-10);
        }
        let c = ConeSurface::flat_cone(3);
        for &r in &[0.2, 1.0, 1.9] {
            assert!(c.gauss_curvature(SurfPoint::new(r, 0.0)).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn curvature_matches_finite_differences_with_bump() {
        // Brioschi formula for g = diag(E, G) via finite differences
        let s = ConeSurface::new(
            Profile::Spindle { p: 3, q: 1 },
            Some(Bump {
                terms: vec![BumpTerm {
                    amplitude: 0.07,
                    r_center: 1.5,
                    r_sigma: 0.6,
                    mode: 2,
                    phase: 0.4,
                }],
            }),
            SurfaceOpts::default(),
        )
        .unwrap();
        let e = |r: f64, t: f64| s.metric(Chart::Base, [r, t])[0][0];
        let g = |r: f64, t: f64| s.metric(Chart::Base, [r, t])[1][1];
        let (r, t) = (1.4, 0.9);
        let h = 1e-4;
        let er = (e(r + h, t) - e(r - h, t)) / (2.0 * h);
        let et = (e(r, t + h) - e(r, t - h)) / (2.0 * h);
        let gr = (g(r + h, t) - g(r - h, t)) / (2.0 * h);
        let gt = (g(r, t + h) - g(r, t - h)) / (2.0 * h);
        let ev = e(r, t);
        let gv = g(r, t);
        // K = -1/(2 sqrt(EG)) [ d_r (G_r / sqrt(EG)) + d_t (E_t / sqrt(EG)) ]
        let term_r = {
            let f = |rr: f64| {
                let gr2 = (g(rr + h, t) - g(rr - h, t)) / (2.0 * h);
                gr2 / (e(rr, t) * g(rr, t)).sqrt()
            };
            (f(r + h) - f(r - h)) / (2.0 * h)
        };
        let term_t = {
            let f = |tt: f64| {
                let et2 = (e(r, tt + h) - e(r, tt - h)) / (2.0 * h);
                et2 / (e(r, tt) * g(r, tt)).sqrt()
            };
            (f(t + h) - f(t - h)) / (2.0 * h)
        };
        let _ = (er, et, gr, gt);
        let k_fd = -0.5 / (ev * gv).sqrt() * (term_r + term_t);
        let k = s.gauss_curvature(SurfPoint::new(r, t)).unwrap();
        assert!((k - k_fd).abs() < 1e-5, "analytic {k} vs fd {k_fd}");
    }

    #[test]
    fn conformal_guard_is_bit_exact() {
        let bumped = ConeSurface::bumped_spindle();
        let plain = ConeSurface::spindle(3, 1);
        let inside = SurfPoint::new(0.1 * bumped.len(), 1.1);
        assert_eq!(
            bumped.gauss_curvature(inside).unwrap().to_bits(),
            plain.gauss_curvature(inside).unwrap().to_bits()
        );
    }

    #[test]
    fn cover_chart_lift_examples() {
        let s = ConeSurface::football(2);
        let c = CoverChart::new(&s, Pole::North);
        let (_, phi) = c.lift_to_cover(0.1, PI, 0).unwrap();
        assert!((phi - FRAC_PI_2).abs() < 1e-14);
        let s3 = ConeSurface::football(3);
        let c3 = CoverChart::new(&s3, Pole::North);
        let (_, phi) = c3.lift_to_cover(0.1, 0.0, 2).unwrap();
        assert!((phi - 4.0 * PI / 3.0).abs() < 1e-14);
        let s1 = ConeSurface::round();
        let c1 = CoverChart::new(&s1, Pole::North);
        let (_, phi) = c1.lift_to_cover(0.1, 1.234, 0).unwrap();
        assert!((phi - 1.234).abs() < 1e-14);
        assert!(matches!(
            c.lift_to_cover(0.5, 0.0, 0),
            Err(SurfaceError::OutOfChart { .. })
        ));
        assert!(matches!(c.lift_to_cover(0.1, 0.0, 2), Err(SurfaceError::BadSheet { .. })));
        // projection inverts the lift
        assert!((c3.project(phi_of(&c3, 1.0, 1)) - 1.0).abs() < 1e-12);
    }

    fn phi_of(c: &CoverChart, theta: f64, sheet: u32) -> f64 {
        c.lift_to_cover(0.05, theta, sheet).unwrap().1
    }

    #[test]
    fn cover_metric_pullback_is_isometric() {
        // pullback of the base metric under theta = p phi equals the cover
        // metric (p f)^2 dphi^2 + dr^2, checked through chart round-trips
        let s = ConeSurface::football(3);
        let chart = Chart::Cover(Pole::North);
        for &(x, y) in &[(0.08, 0.03), (-0.05, 0.06), (0.0, 0.1)] {
            let xy = [x, y];
            let pt = s.from_chart(chart, xy);
            let back = s.to_chart(chart, pt, Some(xy));
            assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
            // tangential metric length: circle of cover radius rho has
            // circumference 2 pi F(rho)
            let rho = (x * x + y * y).sqrt();
            let m = [-y, x];
            let g = s.metric(chart, xy);
            let mm = g[0][0] * m[0] * m[0] + 2.0 * g[0][1] * m[0] * m[1] + g[1][1] * m[1] * m[1];
            let f_cover = 3.0 * s.warp(rho).0;
            assert!((mm.sqrt() / rho - f_cover / rho).abs() < 1e-10);
        }
    }

    #[test]
    fn log_exp_roundtrip_and_distance() {
        let s = ConeSurface::round();
        let a = SurfPoint::new(FRAC_PI_2, 0.0);
        let b = SurfPoint::new(FRAC_PI_2, 0.01);
        // equatorial separation of 0.01 radians has distance 0.01
        assert!((s.dist_local(a, b) - 0.01).abs() < 1e-8);
        let chart = Chart::Base;
        let va = s.to_chart(chart, a, None);
        let vb = s.to_chart(chart, b, Some(va));
        let l = s.log2(chart, va, vb);
        let back = s.exp2(chart, va, l);
        assert!((back[0] - vb[0]).abs() < 1e-9 && (back[1] - vb[1]).abs() < 1e-9);
    }

    #[test]
    fn cone_angle_from_measured_circumference() {
        // circumference of the distance sphere of radius eps about a pole,
        // measured by chaining local distances, extrapolates to 2 pi / p
        for p in [2u32, 3, 5] {
            let s = ConeSurface::football(p);
            let measure = |eps: f64| {
                let n = 512;
                let mut total = 0.0;
                for i in 0..n {
                    let t0 = std::f64::consts::TAU * i as f64 / n as f64;
                    let t1 = std::f64::consts::TAU * (i + 1) as f64 / n as f64;
                    total += s.dist_local(SurfPoint::new(eps, t0), SurfPoint::new(eps, t1));
                }
                total / eps
            };
            let c1 = measure(0.1);
            let c2 = measure(0.05);
            let c3 = measure(0.01);
            // Richardson on the eps^2 error term of the pair (c2, c3)
            let extrap = c3 + (c3 - c2) * (0.01f64.powi(2)) / (0.05f64.powi(2) - 0.01f64.powi(2));
            let expected = std::f64::consts::TAU / p as f64;
            assert!(
                (extrap - expected).abs() / expected < 1e-3,
                "p={p}: {c1} {c2} {c3} -> {extrap} vs {expected}"
            );
        }
    }
}
