//! Discrete curve-shortening flow on the regular part of a cone surface.
//!
//! Semi-discrete explicit scheme: geodesic curvature from a circumscribed
//! circle fit in the local development, CFL-limited time steps, uniform
//! arclength resampling. Vertices near a pole are developed in the cover
//! chart exactly like the geodesic tracer, so the flow never sees the cone
//! singularity.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::geodesic::{find_closed_geodesic, ClosedGeodesic, GeodesicError};
use crate::num::angle_diff;
use crate::surface::{Chart, ConePoint, ConeSurface, Pole, SurfPoint};

pub const EPS_PT_FRAC: f64 = 1e-3;
pub const EPS_STAT: f64 = 1e-5;
pub const STAT_WINDOW: usize = 50;
pub const C_CFL: f64 = 0.4;
pub const ROUND_TOL: f64 = 0.1;

#[derive(Debug, Error)]
pub enum CsfError {
    #[error("flow step increased length by {increase:.3e}")]
    StepRejected { increase: f64 },
    #[error("loop lost embeddedness at t = {t:.6}")]
    EmbeddingLost { t: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopState {
    pub vertices: Vec<SurfPoint>,
    pub t: f64,
    pub length: f64,
    /// target resample spacing inherited from the initial discretization
    pub h0: f64,
}

impl LoopState {
    pub fn from_points(surface: &ConeSurface, vertices: Vec<SurfPoint>, t: f64) -> Self {
        let length = poly_length(surface, &vertices);
        let h0 = length / vertices.len() as f64;
        LoopState { vertices, t, length, h0 }
    }

    /// Parallel circle at radial coordinate r0.
    pub fn parallel(surface: &ConeSurface, r0: f64, n_v: usize) -> Self {
        let pts = (0..n_v)
            .map(|i| SurfPoint::new(r0, std::f64::consts::TAU * i as f64 / n_v as f64))
            .collect();
        Self::from_points(surface, pts, 0.0)
    }

    /// Vertices on a traced closed geodesic.
    pub fn on_geodesic(surface: &ConeSurface, c: &ClosedGeodesic, n_v: usize) -> Self {
        Self::from_points(surface, c.samples(surface, n_v), 0.0)
    }

    /// Normal offset of a closed geodesic (positive offset toward the left
    /// of the orientation).
    pub fn offset_of_geodesic(
        surface: &ConeSurface,
        c: &ClosedGeodesic,
        offset: f64,
        n_v: usize,
    ) -> Self {
        let pts = (0..n_v)
            .map(|i| {
                let s = c.length * i as f64 / n_v as f64;
                let (pt, chi) = c.eval_dir(surface, s);
                let chart = surface.chart_for(std::iter::once(pt));
                let xy = surface.to_chart(chart, pt, None);
                // left normal of the direction angle chi in the global frame
                let (dr, dt) = ((chi + std::f64::consts::FRAC_PI_2).cos(), {
                    let (f, _, _) = surface.warp(pt.r);
                    (chi + std::f64::consts::FRAC_PI_2).sin() / f
                });
                let v = crate::geodesic::velocity_from_global(surface, chart, xy, dr, dt);
                let n = surface.norm(chart, xy, v);
                let xi = [offset * v[0] / n, offset * v[1] / n];
                surface.from_chart(chart, surface.exp2(chart, xy, xi))
            })
            .collect();
        Self::from_points(surface, pts, 0.0)
    }

    pub fn n_v(&self) -> usize {
        self.vertices.len()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.length / self.n_v() as f64
    }

    /// Signed theta-winding of the loop.
    pub fn winding(&self) -> i64 {
        let mut acc = 0.0;
        let n = self.n_v();
        for i in 0..n {
            acc += angle_diff(self.vertices[(i + 1) % n].theta, self.vertices[i].theta);
        }
        (acc / std::f64::consts::TAU).round() as i64
    }

    /// Cone points enclosed by the loop, from the theta-winding about each
    /// pole: the loop encloses the pole on its small side iff |winding| = 1.
    pub fn enclosed_cones(&self, surface: &ConeSurface) -> Vec<ConePoint> {
        if self.winding().abs() != 1 {
            return Vec::new();
        }
        // winding one: the loop separates the poles; without more data the
        // "enclosed" pole is meaningful for small loops, where it is the
        // nearest one
        let pole = self.nearest_pole(surface);
        surface
            .cone_points()
            .into_iter()
            .filter(|c| c.pole == pole)
            .collect()
    }

    pub fn nearest_pole(&self, surface: &ConeSurface) -> Pole {
        let r_mean = self.vertices.iter().map(|v| v.r).sum::<f64>() / self.n_v() as f64;
        if r_mean < 0.5 * surface.len() {
            Pole::North
        } else {
            Pole::South
        }
    }

    /// Diameter estimate: exact on strided pairs, cheap antipodal probe first.
    pub fn diameter(&self, surface: &ConeSurface) -> f64 {
        let n = self.n_v();
        let quick = (0..n / 2)
            .map(|i| surface.dist_local(self.vertices[i], self.vertices[i + n / 2]))
            .fold(0.0f64, f64::max);
        if quick > 4.0 * EPS_PT_FRAC * surface.len() {
            return quick;
        }
        let stride = (n / 64).max(1);
        let mut worst = quick;
        let idx: Vec<usize> = (0..n).step_by(stride).collect();
        for (a, &i) in idx.iter().enumerate() {
            for &j in idx.iter().skip(a + 1) {
                worst = worst.max(surface.dist_local(self.vertices[i], self.vertices[j]));
            }
        }
        worst
    }

    /// Non-neighbor vertices approaching each other signal loss of
    /// embeddedness at the current resolution.
    pub fn embedded(&self, surface: &ConeSurface) -> bool {
        let n = self.n_v();
        let h = self.mean_spacing();
        for i in 0..n {
            for j in (i + 2)..n {
                if n - (j - i) < 2 {
                    continue;
                }
                if surface.dist_local(self.vertices[i], self.vertices[j]) < 0.3 * h {
                    return false;
                }
            }
        }
        true
    }

    /// Development of the loop in the orthonormal frame at vertex 0;
    /// accurate for loops small against the curvature scale.
    pub fn develop(&self, surface: &ConeSurface) -> Vec<[f64; 2]> {
        let chart = surface.chart_for(self.vertices.iter().copied());
        let c0 = surface.to_chart(chart, self.vertices[0], None);
        let mut prev = c0;
        self.vertices
            .iter()
            .map(|&v| {
                let xy = surface.to_chart(chart, v, Some(prev));
                prev = xy;
                surface.to_frame(chart, c0, surface.log2(chart, c0, xy))
            })
            .collect()
    }

    /// Isoperimetric ratio length^2 / (4 pi area), from the development.
    pub fn isoperimetric_ratio(&self, surface: &ConeSurface) -> f64 {
        let dev = self.develop(surface);
        let n = dev.len();
        let mut area2 = 0.0;
        for i in 0..n {
            let a = dev[i];
            let b = dev[(i + 1) % n];
            area2 += a[0] * b[1] - a[1] * b[0];
        }
        let area = 0.5 * area2.abs();
        if area <= 0.0 {
            return f64::INFINITY;
        }
        self.length * self.length / (4.0 * std::f64::consts::PI * area)
    }

    pub fn centroid(&self) -> SurfPoint {
        let n = self.n_v() as f64;
        let r = self.vertices.iter().map(|v| v.r).sum::<f64>() / n;
        let (mut cs, mut sn) = (0.0, 0.0);
        for v in &self.vertices {
            cs += v.theta.cos();
            sn += v.theta.sin();
        }
        SurfPoint::new(r, sn.atan2(cs))
    }
}

fn poly_length(surface: &ConeSurface, pts: &[SurfPoint]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| surface.dist_local(pts[i], pts[(i + 1) % n])).sum()
}

#[derive(Debug, Clone)]
pub struct CurvatureVec {
    pub chart: Chart,
    pub at: [f64; 2],
    /// chart components of k*N at the vertex
    pub knv: [f64; 2],
    /// |k|
    pub mag: f64,
}

/// Geodesic curvature vector at each vertex from the circumscribed circle of
/// the developed vertex trio; collinear trios get k = 0.
pub fn curvature_normal(surface: &ConeSurface, state: &LoopState) -> Vec<CurvatureVec> {
    let n = state.n_v();
    (0..n)
        .map(|i| {
            let trio = [
                state.vertices[(i + n - 1) % n],
                state.vertices[i],
                state.vertices[(i + 1) % n],
            ];
            let chart = surface.chart_for(trio.iter().copied());
            let c = surface.to_chart(chart, trio[1], None);
            let pa = surface.to_chart(chart, trio[0], Some(c));
            let pb = surface.to_chart(chart, trio[2], Some(c));
            let a = surface.to_frame(chart, c, surface.log2(chart, c, pa));
            let b = surface.to_frame(chart, c, surface.log2(chart, c, pb));
            // circumcenter: 2 C.a = |a|^2, 2 C.b = |b|^2
            let det = 2.0 * (a[0] * b[1] - a[1] * b[0]);
            let scale2 = (a[0] * a[0] + a[1] * a[1]).max(b[0] * b[0] + b[1] * b[1]);
            if det.abs() < 1e-9 * scale2 {
                return CurvatureVec { chart, at: c, knv: [0.0, 0.0], mag: 0.0 };
            }
            let ra = a[0] * a[0] + a[1] * a[1];
            let rb = b[0] * b[0] + b[1] * b[1];
            let cx = (ra * b[1] - rb * a[1]) / det;
            let cy = (rb * a[0] - ra * b[0]) / det;
            let r2 = cx * cx + cy * cy;
            let kn_frame = [cx / r2, cy / r2];
            let knv = surface.from_frame(chart, c, kn_frame);
            CurvatureVec { chart, at: c, knv, mag: 1.0 / r2.sqrt() }
        })
        .collect()
}

/// Uniform-arclength resample of a closed polyline, adapting the vertex
/// count downward as the loop shrinks (spacing held near h0, count floored
/// at 32 and capped at the current count).
fn resample(surface: &ConeSurface, pts: &[SurfPoint], h0: f64, n_cap: usize) -> Vec<SurfPoint> {
    let n = pts.len();
    let seg: Vec<f64> =
        (0..n).map(|i| surface.dist_local(pts[i], pts[(i + 1) % n])).collect();
    let total: f64 = seg.iter().sum();
    let n_new = ((total / h0).ceil() as usize).clamp(32.min(n_cap), n_cap);
    let mut out = Vec::with_capacity(n_new);
    let mut acc = 0.0;
    let mut k = 0usize;
    for j in 0..n_new {
        let target = total * j as f64 / n_new as f64;
        while k < n - 1 && acc + seg[k] < target {
            acc += seg[k];
            k += 1;
        }
        let u = if seg[k] > 0.0 { (target - acc) / seg[k] } else { 0.0 };
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let chart = surface.chart_for([a, b].iter().copied());
        let ca = surface.to_chart(chart, a, None);
        let cb = surface.to_chart(chart, b, Some(ca));
        let l = surface.log2(chart, ca, cb);
        out.push(surface.from_chart(chart, surface.exp2(chart, ca, [u * l[0], u * l[1]])));
    }
    out
}

pub fn dt_max(state: &LoopState) -> f64 {
    C_CFL * state.mean_spacing().powi(2)
}

/// One explicit flow step followed by resampling. Rejects steps that
/// increase the length beyond resampling tolerance.
pub fn flow_step(surface: &ConeSurface, state: &LoopState, dt: f64) -> Result<LoopState, CsfError> {
    let curv = curvature_normal(surface, state);
    flow_step_from(surface, state, &curv, dt)
}

fn flow_step_from(
    surface: &ConeSurface,
    state: &LoopState,
    curv: &[CurvatureVec],
    dt: f64,
) -> Result<LoopState, CsfError> {
    let moved: Vec<SurfPoint> = curv
        .iter()
        .map(|c| {
            surface.from_chart(
                c.chart,
                surface.exp2(c.chart, c.at, [dt * c.knv[0], dt * c.knv[1]]),
            )
        })
        .collect();
    let n = moved.len();
    let seg: Vec<f64> =
        (0..n).map(|i| surface.dist_local(moved[i], moved[(i + 1) % n])).collect();
    let total: f64 = seg.iter().sum();
    let mean = total / n as f64;
    let drift = seg.iter().fold(0.0f64, |m, &s| m.max((s - mean).abs()));
    let shrunk = n > 32 && (total / state.h0).ceil() as usize + 1 < n;
    let (verts, length) = if drift > 0.1 * state.h0 || shrunk {
        let v = resample(surface, &moved, state.h0, state.n_v());
        let l = poly_length(surface, &v);
        (v, l)
    } else {
        (moved, total)
    };
    if length > state.length + 1e-9 {
        return Err(CsfError::StepRejected { increase: length - state.length });
    }
    Ok(LoopState { vertices: verts, t: state.t + dt, length, h0: state.h0 })
}

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub max_time: f64,
    pub max_steps: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_time: 50.0, max_steps: 200_000 }
    }
}

#[derive(Serialize)]
pub enum Verdict {
    RoundPoint {
        limit: SurfPoint,
        collapse_time: f64,
    },
    ConeCollapse {
        cone: ConePoint,
        collapse_time: f64,
    },
    LimitGeodesic {
        #[serde(skip)]
        geodesic: ClosedGeodesic,
        length: f64,
        final_time: f64,
    },
    BudgetExhausted {
        #[serde(skip)]
        final_loop: LoopState,
        final_time: f64,
    },
}

pub struct FlowOutcome {
    pub verdict: Verdict,
    /// sparse snapshots over the whole run plus a dense tail near the end
    pub history: Vec<LoopState>,
    /// (t, length, max |k|) per step
    pub trace: Vec<(f64, f64, f64)>,
}

pub fn evolve(
    surface: &ConeSurface,
    start: LoopState,
    budget: Budget,
) -> Result<FlowOutcome, CsfError> {
    let eps_pt = EPS_PT_FRAC * surface.len();
    let mut state = start;
    if !state.embedded(surface) {
        return Err(CsfError::Precondition("initial loop is not embedded".into()));
    }
    let mut sampled: Vec<LoopState> = vec![state.clone()];
    let sample_stride = (budget.max_steps / 200).max(1);
    let mut tail: VecDeque<LoopState> = VecDeque::with_capacity(64);
    let mut trace: Vec<(f64, f64, f64)> = Vec::new();
    let mut stat_count = 0usize;
    let mut refined = false;
    let mut diam = f64::INFINITY;

    for step in 0..budget.max_steps {
        if state.t >= budget.max_time {
            break;
        }
        // far from collapse the diameter moves slowly; refresh it sparsely
        if diam < 8.0 * eps_pt || step % 8 == 0 {
            diam = state.diameter(surface);
        }
        if diam < eps_pt {
            let enclosed = state.enclosed_cones(surface);
            let mut history = sampled;
            history.extend(tail.drain(..));
            let verdict = if let Some(cone) = enclosed.first() {
                Verdict::ConeCollapse { cone: *cone, collapse_time: state.t }
            } else {
                Verdict::RoundPoint { limit: state.centroid(), collapse_time: state.t }
            };
            return Ok(FlowOutcome { verdict, history, trace });
        }

        let curv = curvature_normal(surface, &state);
        let curv_max = curv.iter().map(|c| c.mag).fold(0.0f64, f64::max);
        trace.push((state.t, state.length, curv_max));
        if curv_max < EPS_STAT {
            stat_count += 1;
            if stat_count >= STAT_WINDOW {
                let mut history = sampled;
                history.extend(tail.drain(..));
                let polished = polish_loop(surface, &state);
                let verdict = match polished {
                    Some(geodesic) => Verdict::LimitGeodesic {
                        length: geodesic.length,
                        final_time: state.t,
                        geodesic,
                    },
                    None => Verdict::BudgetExhausted { final_time: state.t, final_loop: state },
                };
                return Ok(FlowOutcome { verdict, history, trace });
            }
        } else {
            stat_count = 0;
        }

        let mut dt = dt_max(&state).min(budget.max_time - state.t);
        let mut next = None;
        for _ in 0..10 {
            match flow_step_from(surface, &state, &curv, dt) {
                Ok(s) => {
                    next = Some(s);
                    break;
                }
                Err(CsfError::StepRejected { .. }) => dt *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some(next_state) = next else {
            let mut history = sampled;
            history.extend(tail.drain(..));
            return Ok(FlowOutcome {
                verdict: Verdict::BudgetExhausted { final_time: state.t, final_loop: state },
                history,
                trace,
            });
        };
        state = next_state;

        if step % 50 == 49 && !state.embedded(surface) {
            if refined {
                return Err(CsfError::EmbeddingLost { t: state.t });
            }
            refined = true;
            let doubled = resample(surface, &state.vertices, 0.5 * state.h0, 2 * state.n_v());
            state = LoopState {
                length: poly_length(surface, &doubled),
                vertices: doubled,
                t: state.t,
                h0: 0.5 * state.h0,
            };
            if !state.embedded(surface) {
                return Err(CsfError::EmbeddingLost { t: state.t });
            }
        }

        if step % sample_stride == 0 {
            sampled.push(state.clone());
        }
        if tail.len() == 64 {
            tail.pop_front();
        }
        tail.push_back(state.clone());
    }
    let mut history = sampled;
    history.extend(tail.drain(..));
    Ok(FlowOutcome {
        verdict: Verdict::BudgetExhausted { final_time: state.t, final_loop: state },
        history,
        trace,
    })
}

/// Seed a closure Newton solve from the loop's first edge.
pub fn polish_loop(surface: &ConeSurface, state: &LoopState) -> Option<ClosedGeodesic> {
    let a = state.vertices[0];
    let b = state.vertices[1];
    let chart = surface.chart_for([a, b].iter().copied());
    let ca = surface.to_chart(chart, a, None);
    let cb = surface.to_chart(chart, b, Some(ca));
    let l = surface.log2(chart, ca, cb);
    let (dr, dt) = crate::geodesic::velocity_global(surface, chart, ca, l);
    let psi = crate::geodesic::direction_angle(surface, a.r, dr, dt);
    find_closed_geodesic(surface, a, psi, state.length).ok()
}

pub struct AvoidanceReport {
    pub min_distance: f64,
    pub violated: bool,
}

/// Evolve two disjoint loops in lockstep and watch the inter-loop distance.
pub fn avoidance_check(
    surface: &ConeSurface,
    loop_a: LoopState,
    loop_b: LoopState,
    budget: Budget,
) -> Result<AvoidanceReport, CsfError> {
    let gap0 = inter_loop_distance(surface, &loop_a, &loop_b);
    let guard = 2.0 * loop_a.mean_spacing().max(loop_b.mean_spacing());
    if gap0 <= guard {
        return Err(CsfError::Precondition(format!(
            "loops too close to start: distance {gap0:.4e} <= {guard:.4e}"
        )));
    }
    let eps_pt = EPS_PT_FRAC * surface.len();
    let eps_touch = 1e-4 * surface.len();
    let mut a = loop_a;
    let mut b = loop_b;
    let mut min_distance = gap0;
    for step in 0..budget.max_steps {
        if a.t >= budget.max_time
            || a.diameter(surface) < eps_pt
            || b.diameter(surface) < eps_pt
        {
            break;
        }
        let dt = dt_max(&a).min(dt_max(&b));
        let step_once = |s: &LoopState| -> Result<LoopState, CsfError> {
            let mut dt_local = dt;
            for _ in 0..10 {
                match flow_step(surface, s, dt_local) {
                    Ok(n) => return Ok(n),
                    Err(CsfError::StepRejected { .. }) => dt_local *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            Ok(s.clone())
        };
        a = step_once(&a)?;
        b = step_once(&b)?;
        if step % 5 == 0 {
            min_distance = min_distance.min(inter_loop_distance(surface, &a, &b));
        }
    }
    min_distance = min_distance.min(inter_loop_distance(surface, &a, &b));
    Ok(AvoidanceReport { min_distance, violated: min_distance < eps_touch })
}

fn inter_loop_distance(surface: &ConeSurface, a: &LoopState, b: &LoopState) -> f64 {
    let stride_a = (a.n_v() / 64).max(1);
    let stride_b = (b.n_v() / 64).max(1);
    let mut best = f64::INFINITY;
    for va in a.vertices.iter().step_by(stride_a) {
        for vb in b.vertices.iter().step_by(stride_b) {
            best = best.min(surface.dist_local(*va, *vb));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlowupClass {
    SelfShrinkingCircle,
    StaticLine,
    Inconclusive,
}

/// Classify the collapse from the final history frames by the (parabolic
/// rescaling invariant) isoperimetric ratio.
pub fn blowup_diagnostic(surface: &ConeSurface, history: &[LoopState]) -> BlowupClass {
    let eps_pt = EPS_PT_FRAC * surface.len();
    let frames: Vec<&LoopState> = history
        .iter()
        .filter(|f| f.diameter(surface) < 10.0 * eps_pt)
        .collect();
    if frames.len() < 10 {
        return BlowupClass::Inconclusive;
    }
    let tail = &frames[frames.len() - 5..];
    let ratios: Vec<f64> = tail.iter().map(|f| f.isoperimetric_ratio(surface)).collect();
    if ratios.iter().all(|r| (r - 1.0).abs() < 0.05) {
        BlowupClass::SelfShrinkingCircle
    } else if ratios.iter().any(|r| !r.is_finite() || *r > 5.0) {
        BlowupClass::StaticLine
    } else {
        BlowupClass::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn curvature_of_flat_circle() {
        let s = ConeSurface::flat_cone(2);
        for &radius in &[0.5, 1.0] {
            let state = LoopState::parallel(&s, radius, 256);
            let curv = curvature_normal(&s, &state);
            let h = state.mean_spacing();
            for c in &curv {
                assert!(
                    (c.mag - 1.0 / radius).abs() < 2.0 * h * h,
                    "R={radius} k={} want {}",
                    c.mag,
                    1.0 / radius
                );
            }
        }
    }

    #[test]
    fn curvature_of_sphere_latitude() {
        let s = ConeSurface::round();
        let r0 = 1.0;
        let state = LoopState::parallel(&s, r0, 256);
        let want = 1.0 / r0.tan();
        let h = state.mean_spacing();
        for c in curvature_normal(&s, &state) {
            assert!((c.mag - want).abs() < 2.0 * h * h);
        }
    }

    #[test]
    fn curvature_vanishes_on_geodesic() {
        let s = ConeSurface::round();
        let c = find_closed_geodesic(
            &s,
            SurfPoint::new(FRAC_PI_2, 0.0),
            FRAC_PI_2,
            std::f64::consts::TAU,
        )
        .unwrap();
        let state = LoopState::on_geodesic(&s, &c, 256);
        let worst = curvature_normal(&s, &state).iter().map(|v| v.mag).fold(0.0f64, f64::max);
        assert!(worst < 1e-4, "worst {worst}");
    }

    #[test]
    fn shrinking_circle_law() {
        let s = ConeSurface::flat_cone(2);
        let radius = 0.5f64;
        let mut state = LoopState::parallel(&s, radius, 384);
        let t_target = 0.08;
        while state.t < t_target {
            let dt = dt_max(&state).min(t_target - state.t);
            state = flow_step(&s, &state, dt).unwrap();
        }
        let want = (radius * radius - 2.0 * t_target).sqrt();
        let got = state.vertices.iter().map(|v| v.r).sum::<f64>() / state.n_v() as f64;
        assert!((got - want).abs() < 1e-3, "got {got} want {want}");
    }

    #[test]
    fn collapse_time_law_on_flat_cones() {
        for &p in &[2u32, 3, 5] {
            let s = ConeSurface::flat_cone(p);
            for &radius in &[0.25f64, 0.5, 1.0] {
                let state = LoopState::parallel(&s, radius, 128);
                let out = evolve(&s, state, Budget::default()).unwrap();
                let t = match out.verdict {
                    Verdict::ConeCollapse { cone, collapse_time } => {
                        assert_eq!(cone.order, p);
                        collapse_time
                    }
                    _ => panic!("expected ConeCollapse at p={p} R={radius}"),
                };
                let want = radius * radius / 2.0;
                assert!(
                    (t - want).abs() < 0.02 * radius * radius,
                    "p={p} R={radius}: T={t} want {want}"
                );
            }
        }
    }

    #[test]
    fn latitude_matches_radial_ode() {
        let s = ConeSurface::round();
        let mut state = LoopState::parallel(&s, 1.2, 256);
        let t_target = 0.2;
        while state.t < t_target {
            let dt = dt_max(&state).min(t_target - state.t);
            state = flow_step(&s, &state, dt).unwrap();
        }
        // oracle: dr/dt = -cot r, RK4 with small steps
        let mut r = 1.2f64;
        let n = 20000;
        let h = t_target / n as f64;
        for _ in 0..n {
            let f = |r: f64| -1.0 / r.tan();
            let k1 = f(r);
            let k2 = f(r + 0.5 * h * k1);
            let k3 = f(r + 0.5 * h * k2);
            let k4 = f(r + h * k3);
            r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let got = state.vertices.iter().map(|v| v.r).sum::<f64>() / state.n_v() as f64;
        assert!((got - r).abs() < 1e-3, "got {got} oracle {r}");
    }

    #[test]
    fn geodesic_loop_is_stationary() {
        let s = ConeSurface::round();
        let c = find_closed_geodesic(
            &s,
            SurfPoint::new(FRAC_PI_2, 0.0),
            FRAC_PI_2,
            std::f64::consts::TAU,
        )
        .unwrap();
        let state = LoopState::on_geodesic(&s, &c, 256);
        let mut cur = state.clone();
        let t_target = 0.5;
        while cur.t < t_target {
            let dt = dt_max(&cur).min(t_target - cur.t);
            cur = flow_step(&s, &cur, dt).unwrap();
        }
        let drift = cur
            .vertices
            .iter()
            .map(|v| (v.r - FRAC_PI_2).abs())
            .fold(0.0f64, f64::max);
        assert!(drift / t_target < 1e-6, "drift rate {}", drift / t_target);
    }

    #[test]
    fn evolve_latitude_to_round_point() {
        let s = ConeSurface::round();
        let state = LoopState::parallel(&s, 1.2, 128);
        let out = evolve(&s, state, Budget::default()).unwrap();
        match out.verdict {
            Verdict::RoundPoint { limit, collapse_time } => {
                assert!(limit.r < 0.1, "collapsed at r={}", limit.r);
                assert!(collapse_time > 0.0);
            }
            _ => panic!("expected RoundPoint"),
        }
        assert_eq!(blowup_diagnostic(&s, &out.history), BlowupClass::SelfShrinkingCircle);
    }

    #[test]
    fn evolve_cone_collapse_with_area_law() {
        let s = ConeSurface::spindle(3, 1);
        let r0 = 0.6;
        let state = LoopState::parallel(&s, r0, 128);
        let out = evolve(&s, state, Budget::default()).unwrap();
        let t_num = match out.verdict {
            Verdict::ConeCollapse { cone, collapse_time } => {
                assert_eq!(cone.pole, Pole::North);
                collapse_time
            }
            _ => panic!("expected ConeCollapse"),
        };
        // oracle: dr/dt = -f'(r)/f(r)
        let mut r = r0;
        let mut t = 0.0;
        let h = 1e-6;
        while r > 1e-4 {
            let (f, f1, _) = s.warp(r);
            r -= h * f1 / f;
            t += h;
        }
        assert!((t_num - t).abs() < 0.02 * t, "numeric {t_num} oracle {t}");
    }

    #[test]
    fn evolve_waist_to_limit_geodesic() {
        let s = ConeSurface::football(3);
        // use the equator parallel of the symmetric football (a geodesic)
        let state = LoopState::parallel(&s, FRAC_PI_2, 128);
        let out = evolve(&s, state, Budget { max_time: 2.0, max_steps: 50_000 }).unwrap();
        match out.verdict {
            Verdict::LimitGeodesic { ref geodesic, .. } => {
                let worst = geodesic
                    .samples(&s, 64)
                    .iter()
                    .map(|p| (p.r - FRAC_PI_2).abs())
                    .fold(0.0f64, f64::max);
                assert!(worst < 1e-5, "Hausdorff {worst}");
            }
            _ => panic!("expected LimitGeodesic"),
        }
    }

    #[test]
    fn avoidance_of_concentric_latitudes() {
        let s = ConeSurface::round();
        let a = LoopState::parallel(&s, 0.7, 96);
        let b = LoopState::parallel(&s, 1.1, 96);
        let rep = avoidance_check(&s, a, b, Budget::default()).unwrap();
        assert!(!rep.violated, "min distance {}", rep.min_distance);
    }

    #[test]
    fn avoidance_rejects_identical_loops() {
        let s = ConeSurface::round();
        let a = LoopState::parallel(&s, 1.0, 96);
        let b = LoopState::parallel(&s, 1.0, 96);
        assert!(matches!(
            avoidance_check(&s, a, b, Budget::default()),
            Err(CsfError::Precondition(_))
        ));
    }

    #[test]
    fn blowup_needs_enough_frames() {
        let s = ConeSurface::round();
        let frames: Vec<LoopState> =
            (0..3).map(|_| LoopState::parallel(&s, 0.0005, 32)).collect();
        assert_eq!(blowup_diagnostic(&s, &frames), BlowupClass::Inconclusive);
    }
}
