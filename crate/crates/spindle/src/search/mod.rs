//! Existence machinery: sweep-out bisection for a separating geodesic,
//! broken-geodesic relaxation with discrete index data, side-shortening,
//! and the iterated shortening cascade.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::csf::{curvature_normal, evolve, polish_loop, Budget, CsfError, LoopState, Verdict};
use crate::geodesic::{
    check_return_condition, has_conjugate_pair, log_map, shoot, ClosedGeodesic, FanSide,
    GeodesicError, ReturnVerdict,
};
use crate::surface::{ConeSurface, Pole, SurfPoint};

pub const S_TOL: f64 = 1e-4;
pub const DIST_TOL: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("all coarse sweep runs collapse to the same pole")]
    BracketNotFound { trace: Vec<SweepRecord> },
    #[error("a broken-loop segment of length {seg:.4} exceeds the convexity radius {radius:.4}")]
    SubdivisionTooCoarse { seg: f64, radius: f64 },
    #[error("no shorter side loop found after {retries} offset halvings")]
    NoShorterLoop { retries: usize },
    #[error("cascade stage {stage} failed: {reason}")]
    StageFailure { stage: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Csf(#[from] CsfError),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub s: f64,
    pub verdict: String,
    pub collapse_pole: Option<Pole>,
    pub t_final: f64,
}

/// Latitude-like sweep family: s in (0,1) maps to the parallel at
/// r = r_guard + s (L - 2 r_guard), so endpoints hug the two poles.
pub struct SweepFamily<'a> {
    surface: &'a ConeSurface,
    n_v: usize,
}

impl<'a> SweepFamily<'a> {
    pub fn new(surface: &'a ConeSurface, n_v: usize) -> Self {
        SweepFamily { surface, n_v }
    }

    pub fn member(&self, s: f64) -> LoopState {
        let l = self.surface.len();
        let g = self.surface.r_guard();
        let r = g + s.clamp(0.0, 1.0) * (l - 2.0 * g);
        LoopState::parallel(self.surface, r, self.n_v)
    }
}

pub struct SweepOpts {
    pub n_coarse: usize,
    pub n_v: usize,
    pub flow_budget: Budget,
}

impl Default for SweepOpts {
    fn default() -> Self {
        SweepOpts { n_coarse: 9, n_v: 96, flow_budget: Budget::default() }
    }
}

enum Fate {
    Pole(Pole),
    Limit(Box<ClosedGeodesic>),
    Other,
}

fn run_member(
    surface: &ConeSurface,
    family: &SweepFamily,
    s: f64,
    budget: Budget,
) -> Result<(Fate, SweepRecord, Vec<LoopState>), SearchError> {
    let out = evolve(surface, family.member(s), budget)?;
    let (fate, verdict, pole, t) = match out.verdict {
        Verdict::RoundPoint { limit, collapse_time } => {
            let pole = if limit.r < 0.5 * surface.len() { Pole::North } else { Pole::South };
            (Fate::Pole(pole), "RoundPoint", Some(pole), collapse_time)
        }
        Verdict::ConeCollapse { cone, collapse_time } => {
            (Fate::Pole(cone.pole), "ConeCollapse", Some(cone.pole), collapse_time)
        }
        Verdict::LimitGeodesic { geodesic, final_time, .. } => {
            (Fate::Limit(Box::new(geodesic)), "LimitGeodesic", None, final_time)
        }
        Verdict::BudgetExhausted { final_time, .. } => {
            (Fate::Other, "BudgetExhausted", None, final_time)
        }
    };
    let record =
        SweepRecord { s, verdict: verdict.to_string(), collapse_pole: pole, t_final: t };
    Ok((fate, record, out.history))
}

fn best_polish(surface: &ConeSurface, history: &[LoopState]) -> Option<ClosedGeodesic> {
    let mut frames: Vec<&LoopState> = history.iter().collect();
    frames.sort_by(|a, b| {
        let ka = curvature_normal(surface, a).iter().map(|c| c.mag).fold(0.0f64, f64::max);
        let kb = curvature_normal(surface, b).iter().map(|c| c.mag).fold(0.0f64, f64::max);
        ka.total_cmp(&kb)
    });
    frames.into_iter().take(3).find_map(|f| polish_loop(surface, f))
}

fn verify_separating(surface: &ConeSurface, c: &ClosedGeodesic) -> bool {
    let eps_hit = 1e-9 * surface.len();
    let clear = c
        .samples(surface, 512)
        .iter()
        .all(|p| p.r > eps_hit && surface.len() - p.r > eps_hit);
    clear && c.in_regular_part && c.is_separating(surface)
}

/// Bisect the sweep family on the collapse-pole attribution of the flow
/// verdicts until a limit geodesic appears or the bracket closes.
pub fn sweep_separating_geodesic(
    surface: &ConeSurface,
    opts: &SweepOpts,
) -> Result<(ClosedGeodesic, Vec<SweepRecord>), SearchError> {
    let (p, q) = surface.orders();
    if gcd(p, q) != 1 {
        return Err(SearchError::Precondition("sweep requires gcd(p, q) = 1".into()));
    }
    let family = SweepFamily::new(surface, opts.n_v);
    let coarse: Vec<f64> =
        (0..opts.n_coarse).map(|i| (i + 1) as f64 / (opts.n_coarse + 1) as f64).collect();
    let runs: Vec<Result<(Fate, SweepRecord, Vec<LoopState>), SearchError>> = coarse
        .par_iter()
        .map(|&s| run_member(surface, &family, s, opts.flow_budget))
        .collect();
    let mut trace = Vec::new();
    let mut bracket: Option<((f64, Vec<LoopState>), f64)> = None;
    let mut prev: Option<(f64, Pole, Vec<LoopState>)> = None;
    for run in runs {
        let (fate, record, history) = run?;
        trace.push(record.clone());
        match fate {
            Fate::Limit(c) => {
                if verify_separating(surface, &c) {
                    return Ok((*c, trace));
                }
            }
            Fate::Pole(pole) => {
                if let Some((ps, ppole, phist)) = prev.take() {
                    if ppole == Pole::North && pole == Pole::South && bracket.is_none() {
                        bracket = Some(((ps, phist.clone()), record.s));
                    }
                }
                prev = Some((record.s, pole, history));
            }
            Fate::Other => {}
        }
    }
    let Some(((mut lo, mut lo_hist), mut hi)) = bracket else {
        return Err(SearchError::BracketNotFound { trace });
    };

    while hi - lo > S_TOL {
        let mid = 0.5 * (lo + hi);
        let (fate, record, history) = run_member(surface, &family, mid, opts.flow_budget)?;
        trace.push(record);
        match fate {
            Fate::Limit(c) => {
                if verify_separating(surface, &c) {
                    return Ok((*c, trace));
                }
                break;
            }
            Fate::Pole(Pole::North) => {
                lo = mid;
                lo_hist = history;
            }
            Fate::Pole(Pole::South) => hi = mid,
            Fate::Other => {
                // longest-surviving run so far; try to polish it directly
                if let Some(c) = best_polish(surface, &history) {
                    if verify_separating(surface, &c) {
                        return Ok((c, trace));
                    }
                }
                break;
            }
        }
    }
    // bracket closed: polish the longest-surviving side
    if let Some(c) = best_polish(surface, &lo_hist) {
        if verify_separating(surface, &c) {
            return Ok((c, trace));
        }
    }
    // fall back to re-flowing the midpoint and polishing its best frame
    let mid = 0.5 * (lo + hi);
    let (_, record, history) = run_member(surface, &family, mid, opts.flow_budget)?;
    trace.push(record);
    match best_polish(surface, &history) {
        Some(c) if verify_separating(surface, &c) => Ok((c, trace)),
        _ => Err(SearchError::BracketNotFound { trace }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxMode {
    MidpointShortening,
    GradientDescent,
}

#[derive(Debug, Clone, Serialize)]
pub struct BrokenLoop {
    pub control: Vec<SurfPoint>,
}

impl BrokenLoop {
    pub fn new(control: Vec<SurfPoint>) -> Self {
        BrokenLoop { control }
    }

    /// k equally spaced control points on a closed geodesic.
    pub fn from_geodesic(surface: &ConeSurface, c: &ClosedGeodesic, k: usize) -> Self {
        BrokenLoop { control: c.samples(surface, k) }
    }

    pub fn from_loop(state: &LoopState, k: usize) -> Self {
        let n = state.vertices.len();
        BrokenLoop { control: (0..k).map(|i| state.vertices[i * n / k]).collect() }
    }

    pub fn k(&self) -> usize {
        self.control.len()
    }

    pub fn segment_lengths(&self, surface: &ConeSurface) -> Result<Vec<f64>, GeodesicError> {
        let k = self.k();
        (0..k)
            .map(|i| log_map(surface, self.control[i], self.control[(i + 1) % k]).map(|x| x.1))
            .collect()
    }

    pub fn length(&self, surface: &ConeSurface) -> Result<f64, GeodesicError> {
        Ok(self.segment_lengths(surface)?.iter().sum())
    }

    /// Discrete energy k * sum of squared segment lengths.
    pub fn energy(&self, surface: &ConeSurface) -> Result<f64, GeodesicError> {
        let k = self.k() as f64;
        Ok(k * self.segment_lengths(surface)?.iter().map(|d| d * d).sum::<f64>())
    }

    pub fn dense(&self, surface: &ConeSurface, per_seg: usize) -> Result<Vec<SurfPoint>, GeodesicError> {
        let k = self.k();
        let mut out = Vec::with_capacity(k * per_seg);
        for i in 0..k {
            let a = self.control[i];
            let b = self.control[(i + 1) % k];
            let (psi, d) = log_map(surface, a, b)?;
            if d == 0.0 {
                out.extend(std::iter::repeat(a).take(per_seg));
                continue;
            }
            let path = shoot(surface, a, psi, d)?;
            for j in 0..per_seg {
                out.push(path.eval(surface, d * j as f64 / per_seg as f64));
            }
        }
        Ok(out)
    }
}

/// Estimated convexity radius from the curvature maximum.
pub fn convexity_radius(surface: &ConeSurface) -> f64 {
    let l = surface.len();
    let mut k_max = 0.0f64;
    for i in 1..64 {
        for j in 0..8 {
            let r = l * i as f64 / 64.0;
            let t = std::f64::consts::TAU * j as f64 / 8.0;
            k_max = k_max.max(surface.curvature_raw(r, t));
        }
    }
    let conj = if k_max > 0.0 { std::f64::consts::FRAC_PI_2 / k_max.sqrt() } else { f64::INFINITY };
    conj.min(0.25 * l)
}

pub fn default_k(surface: &ConeSurface, length: f64) -> usize {
    ((4.0 * length / convexity_radius(surface)).ceil() as usize).max(8)
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxOutcome {
    pub broken: BrokenLoop,
    pub index: usize,
    pub nullity: usize,
    pub energy: f64,
    pub length: f64,
    pub degenerate_to_point: bool,
}

/// Frame components at each control point of the discrete energy gradient:
/// grad_i = -2k (log_i(prev) + log_i(next)).
fn energy_gradient(
    surface: &ConeSurface,
    pts: &[SurfPoint],
) -> Result<Vec<[f64; 2]>, GeodesicError> {
    let k = pts.len();
    let mut grads = Vec::with_capacity(k);
    for i in 0..k {
        let mut g = [0.0f64; 2];
        for &nb in &[pts[(i + k - 1) % k], pts[(i + 1) % k]] {
            let (psi, d) = log_map(surface, pts[i], nb)?;
            if d == 0.0 {
                continue;
            }
            let chart = surface.chart_for(std::iter::once(pts[i]));
            let xy = surface.to_chart(chart, pts[i], None);
            let (f, _, _) = surface.warp(pts[i].r);
            let v = crate::geodesic::velocity_from_global(
                surface,
                chart,
                xy,
                psi.cos(),
                psi.sin() / f,
            );
            let n = surface.norm(chart, xy, v);
            let fr = surface.to_frame(chart, xy, [v[0] / n, v[1] / n]);
            g[0] -= 2.0 * k as f64 * d * fr[0];
            g[1] -= 2.0 * k as f64 * d * fr[1];
        }
        grads.push(g);
    }
    Ok(grads)
}

fn displace(
    surface: &ConeSurface,
    pt: SurfPoint,
    frame_step: [f64; 2],
) -> SurfPoint {
    let chart = surface.chart_for(std::iter::once(pt));
    let xy = surface.to_chart(chart, pt, None);
    let v = surface.from_frame(chart, xy, frame_step);
    surface.from_chart(chart, surface.exp2(chart, xy, v))
}

fn grad_norm(grads: &[[f64; 2]]) -> f64 {
    grads.iter().map(|g| g[0].hypot(g[1])).fold(0.0f64, f64::max)
}

/// Relax a broken loop to a critical point of the discrete energy and read
/// off the discrete index and nullity from the finite-difference Hessian.
/// Degeneration to a point curve is a reported outcome, not an error.
pub fn relax_broken(
    surface: &ConeSurface,
    start: BrokenLoop,
    mode: RelaxMode,
) -> Result<RelaxOutcome, SearchError> {
    relax_broken_guarded(surface, start, mode, None, None)
}

/// Same as relax_broken with an optional barrier keeping every control
/// point at distance >= barrier.1 from the curve barrier.0.
fn relax_broken_guarded(
    surface: &ConeSurface,
    start: BrokenLoop,
    mode: RelaxMode,
    barrier: Option<(&[SurfPoint], f64)>,
    stop_below: Option<f64>,
) -> Result<RelaxOutcome, SearchError> {
    let conv = convexity_radius(surface);
    let check_segs = |pts: &BrokenLoop| -> Result<(), SearchError> {
        for d in pts.segment_lengths(surface)? {
            if d > conv {
                return Err(SearchError::SubdivisionTooCoarse { seg: d, radius: conv });
            }
        }
        Ok(())
    };
    check_segs(&start)?;
    let k = start.k();
    let mut pts = start.control;
    let l_point = 1e-3 * surface.len();
    let push_out = |p: SurfPoint| -> SurfPoint {
        let Some((wall, delta)) = barrier else { return p };
        let (j, d) = wall
            .iter()
            .enumerate()
            .map(|(j, w)| (j, surface.dist_local(p, *w)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if d >= delta {
            return p;
        }
        let chart = surface.chart_for([p, wall[j]].iter().copied());
        let cp = surface.to_chart(chart, p, None);
        let cw = surface.to_chart(chart, wall[j], Some(cp));
        let l = surface.log2(chart, cp, cw);
        let n = surface.norm(chart, cp, l).max(1e-15);
        let s = (d - delta) / n;
        surface.from_chart(chart, surface.exp2(chart, cp, [s * l[0], s * l[1]]))
    };

    let mut energy = BrokenLoop::new(pts.clone()).energy(surface)?;
    for _iter in 0..5000 {
        let loop_now = BrokenLoop::new(pts.clone());
        let length = loop_now.length(surface)?;
        if stop_below.is_some_and(|target| length < target) {
            return Ok(RelaxOutcome {
                broken: loop_now,
                index: 0,
                nullity: 0,
                energy,
                length,
                degenerate_to_point: false,
            });
        }
        if length < l_point {
            return Ok(RelaxOutcome {
                broken: loop_now,
                index: 0,
                nullity: 0,
                energy,
                length,
                degenerate_to_point: true,
            });
        }
        let grads = energy_gradient(surface, &pts)?;
        if grad_norm(&grads) < 1e-9 {
            break;
        }
        match mode {
            RelaxMode::MidpointShortening => {
                for parity in 0..2 {
                    let snapshot = pts.clone();
                    for i in (parity..k).step_by(2) {
                        let a = snapshot[(i + k - 1) % k];
                        let b = snapshot[(i + 1) % k];
                        let (psi, d) = log_map(surface, a, b)?;
                        if d == 0.0 {
                            continue;
                        }
                        let path = shoot(surface, a, psi, 0.5 * d)?;
                        pts[i] = push_out(path.end_point(surface));
                    }
                }
                energy = BrokenLoop::new(pts.clone()).energy(surface)?;
            }
            RelaxMode::GradientDescent => {
                let mut eta = 1.0 / (8.0 * k as f64 * k as f64);
                let mut accepted = false;
                for _ in 0..30 {
                    let trial: Vec<SurfPoint> = pts
                        .iter()
                        .zip(&grads)
                        .map(|(p, g)| push_out(displace(surface, *p, [-eta * g[0], -eta * g[1]])))
                        .collect();
                    let e_trial = BrokenLoop::new(trial.clone()).energy(surface)?;
                    if e_trial < energy {
                        pts = trial;
                        energy = e_trial;
                        accepted = true;
                        break;
                    }
                    eta *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
    }

    let broken = BrokenLoop::new(pts.clone());
    check_segs(&broken)?;
    let length = broken.length(surface)?;
    let (index, nullity) = discrete_hessian_signature(surface, &pts)?;
    Ok(RelaxOutcome {
        broken,
        index,
        nullity,
        energy,
        length,
        degenerate_to_point: length < l_point,
    })
}

/// Index and nullity of the finite-difference Hessian of the discrete
/// energy, in per-point orthonormal frame coordinates. The exact tangential
/// rotation zero mode is subtracted from the nullity so the counts match
/// the normal Jacobi operator.
fn discrete_hessian_signature(
    surface: &ConeSurface,
    pts: &[SurfPoint],
) -> Result<(usize, usize), GeodesicError> {
    let k = pts.len();
    let dim = 2 * k;
    let h = 1e-5 * surface.len();
    let mut hess = DMatrix::<f64>::zeros(dim, dim);
    let cols: Vec<Result<Vec<f64>, GeodesicError>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let (j, b) = (col / 2, col % 2);
            let mut step = [0.0; 2];
            step[b] = h;
            let mut plus = pts.to_vec();
            plus[j] = displace(surface, pts[j], step);
            let gp = energy_gradient(surface, &plus)?;
            step[b] = -h;
            let mut minus = pts.to_vec();
            minus[j] = displace(surface, pts[j], step);
            let gm = energy_gradient(surface, &minus)?;
            Ok((0..dim).map(|row| (gp[row / 2][row % 2] - gm[row / 2][row % 2]) / (2.0 * h)).collect())
        })
        .collect();
    for (col, entry) in cols.into_iter().enumerate() {
        for (row, v) in entry?.into_iter().enumerate() {
            hess[(row, col)] = v;
        }
    }
    let sym = 0.5 * (&hess + hess.transpose());
    let eigen = sym.symmetric_eigenvalues();
    let scale = eigen.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    let tol = 1e-6 * scale;
    let index = eigen.iter().filter(|&&e| e < -tol).count();
    let zeros = eigen.iter().filter(|&&e| e.abs() <= tol).count();
    Ok((index, zeros.saturating_sub(1)))
}

/// Embedded loop strictly on one side of c, disjoint from it and shorter.
/// side +1 offsets to the left of the orientation.
pub fn shorter_side_loop(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    side: i32,
    delta0: f64,
) -> Result<LoopState, SearchError> {
    if !has_conjugate_pair(surface, c, 2)? {
        return Err(SearchError::Precondition("geodesic has no conjugate pair".into()));
    }
    let wall = c.samples(surface, 512);
    let mut delta = delta0;
    let margin = 1e-6;
    for retry in 0..=6 {
        let offset = LoopState::offset_of_geodesic(surface, c, side as f64 * delta, 128);
        let k = default_k(surface, offset.length).min(64);
        let broken = BrokenLoop::from_loop(&offset, k);
        match relax_broken_guarded(
            surface,
            broken,
            RelaxMode::GradientDescent,
            Some((&wall, 0.5 * delta)),
            Some(c.length - margin),
        ) {
            Ok(out) if !out.degenerate_to_point && out.length < c.length - margin => {
                let dense = out.broken.dense(surface, 8)?;
                let state = LoopState::from_points(surface, dense, 0.0);
                let min_gap = wall
                    .iter()
                    .flat_map(|w| state.vertices.iter().map(move |v| surface.dist_local(*v, *w)))
                    .fold(f64::INFINITY, f64::min);
                if min_gap > 0.45 * delta && state.embedded(surface) {
                    return Ok(state);
                }
            }
            Ok(_) | Err(SearchError::SubdivisionTooCoarse { .. }) => {}
            Err(e) => return Err(e),
        }
        if retry < 6 {
            delta *= 0.5;
        }
    }
    Err(SearchError::NoShorterLoop { retries: 6 })
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub length: f64,
    pub index: usize,
    pub nullity: usize,
    pub separating: bool,
    pub conjugate_pair: bool,
}

/// Iterated shortening: from a separating geodesic with a conjugate pair
/// and an escaper, produce strictly shorter separating geodesics until one
/// has no detected conjugate pair.
pub fn cascade(
    surface: &ConeSurface,
    c0: ClosedGeodesic,
    max_stages: usize,
    fan_size: usize,
    horizon: f64,
) -> Result<(Vec<ClosedGeodesic>, Vec<StageRecord>), SearchError> {
    if !has_conjugate_pair(surface, &c0, 2)? {
        return Err(SearchError::Precondition("cascade start has no conjugate pair".into()));
    }
    let escaper_side = |c: &ClosedGeodesic| -> Result<Option<i32>, SearchError> {
        for (side, sgn) in [(FanSide::Left, 1), (FanSide::Right, -1)] {
            if let ReturnVerdict::Escaper { .. } =
                check_return_condition(surface, c, fan_size, horizon, side)?
            {
                return Ok(Some(sgn));
            }
        }
        Ok(None)
    };
    let Some(mut side) = escaper_side(&c0)? else {
        return Err(SearchError::Precondition("no escaper within horizon".into()));
    };

    let mut chain = vec![c0];
    let mut records = Vec::new();
    for stage in 1..=max_stages {
        let prev = chain.last().unwrap();
        let fail = |reason: String| SearchError::StageFailure { stage, reason };
        let delta0 = 0.1 * surface.len();
        let loop0 = shorter_side_loop(surface, prev, side, delta0)
            .map_err(|e| fail(format!("side loop: {e}")))?;
        let out = evolve(surface, loop0, Budget::default())
            .map_err(|e| fail(format!("flow: {e}")))?;
        let cand = match out.verdict {
            Verdict::LimitGeodesic { geodesic, .. } => geodesic,
            Verdict::BudgetExhausted { ref final_loop, .. } => polish_loop(surface, final_loop)
                .ok_or_else(|| fail("budget exhausted and polish failed".into()))?,
            _ => return Err(fail("flow collapsed instead of limiting".into())),
        };
        if !verify_separating(surface, &cand) {
            return Err(fail("candidate not separating".into()));
        }
        if cand.length >= prev.length - 1e-6 {
            return Err(fail(format!(
                "no strict shortening: {} vs {}",
                cand.length, prev.length
            )));
        }
        let distinct = chain.iter().all(|c| {
            hausdorff(surface, &c.samples(surface, 128), &cand.samples(surface, 128)) > DIST_TOL
        });
        if !distinct {
            return Err(fail("candidate coincides with a predecessor".into()));
        }
        let conj = has_conjugate_pair(surface, &cand, 2)?;
        let jd = cand.jacobi.clone();
        records.push(StageRecord {
            length: cand.length,
            index: jd.as_ref().map_or(0, |j| j.index),
            nullity: jd.as_ref().map_or(0, |j| j.nullity),
            separating: true,
            conjugate_pair: conj,
        });
        chain.push(cand);
        if !conj {
            break;
        }
        side = match escaper_side(chain.last().unwrap())? {
            Some(s) => s,
            None => break,
        };
    }
    Ok((chain, records))
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Symmetric Hausdorff distance between two sample sets.
pub fn hausdorff(surface: &ConeSurface, a: &[SurfPoint], b: &[SurfPoint]) -> f64 {
    let one_way = |x: &[SurfPoint], y: &[SurfPoint]| {
        x.iter()
            .map(|p| y.iter().map(|q| surface.dist_local(*p, *q)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csf::LoopState;
    use crate::geodesic::{find_closed_geodesic, jacobi_index};
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn equator(surface: &ConeSurface) -> ClosedGeodesic {
        find_closed_geodesic(surface, SurfPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2, TAU).unwrap()
    }

    #[test]
    fn sweep_finds_football_waist() {
        let s = ConeSurface::spindle(3, 1);
        let (c, _) = sweep_separating_geodesic(&s, &SweepOpts::default()).unwrap();
        let waist = s.profile().waist_r().unwrap();
        let want = TAU * s.warp(waist).0;
        assert!((c.length - want).abs() < 1e-5, "len {} want {want}", c.length);
        assert!(verify_separating(&s, &c));
    }

    #[test]
    fn sweep_finds_great_circle_on_sphere() {
        let s = ConeSurface::round();
        let (c, _) = sweep_separating_geodesic(&s, &SweepOpts::default()).unwrap();
        assert!((c.length - TAU).abs() < 1e-4, "len {}", c.length);
    }

    #[test]
    fn relax_converges_to_great_circle_with_matching_signature() {
        let s = ConeSurface::round();
        let c = equator(&s);
        let jd = jacobi_index(&s, &c, 1).unwrap();
        // perturbed control points near the equator
        let k = 16;
        let control: Vec<SurfPoint> = (0..k)
            .map(|i| {
                let t = TAU * i as f64 / k as f64;
                SurfPoint::new(FRAC_PI_2 + 0.05 * (3.0 * t).sin(), t)
            })
            .collect();
        for mode in [RelaxMode::MidpointShortening, RelaxMode::GradientDescent] {
            let out = relax_broken(&s, BrokenLoop::new(control.clone()), mode).unwrap();
            assert!(!out.degenerate_to_point);
            assert!((out.length - TAU).abs() < 1e-3, "length {}", out.length);
            assert_eq!((out.index, out.nullity), (jd.index, jd.nullity), "{mode:?}");
        }
    }

    #[test]
    fn relax_shrinks_small_loop_to_point() {
        let s = ConeSurface::round();
        let k = 12;
        let control: Vec<SurfPoint> = (0..k)
            .map(|i| {
                let t = TAU * i as f64 / k as f64;
                SurfPoint::new(0.8 + 0.05 * t.cos(), 0.08 * t.sin())
            })
            .collect();
        let out =
            relax_broken(&s, BrokenLoop::new(control), RelaxMode::GradientDescent).unwrap();
        assert!(out.degenerate_to_point, "length {}", out.length);
    }

    #[test]
    fn waist_is_immediately_stationary() {
        let s = ConeSurface::football(3);
        let c = equator(&s);
        let broken = BrokenLoop::from_geodesic(&s, &c, 24);
        let g = energy_gradient(&s, &broken.control).unwrap();
        assert!(grad_norm(&g) < 1e-6, "gradient {}", grad_norm(&g));
    }

    #[test]
    fn midpoint_energy_monotone() {
        let s = ConeSurface::round();
        let k = 16;
        let mut pts: Vec<SurfPoint> = (0..k)
            .map(|i| {
                let t = TAU * i as f64 / k as f64;
                SurfPoint::new(FRAC_PI_2 + 0.2 * (2.0 * t).cos(), t)
            })
            .collect();
        let mut energy = BrokenLoop::new(pts.clone()).energy(&s).unwrap();
        for _ in 0..20 {
            for parity in 0..2 {
                let snapshot = pts.clone();
                for i in (parity..k).step_by(2) {
                    let a = snapshot[(i + k - 1) % k];
                    let b = snapshot[(i + 1) % k];
                    let (psi, d) = log_map(&s, a, b).unwrap();
                    let path = shoot(&s, a, psi, 0.5 * d).unwrap();
                    pts[i] = path.end_point(&s);
                }
                let e = BrokenLoop::new(pts.clone()).energy(&s).unwrap();
                assert!(e <= energy * (1.0 + 1e-12), "energy rose {energy} -> {e}");
                energy = e;
            }
        }
    }

    #[test]
    fn shorter_side_loop_on_sphere() {
        let s = ConeSurface::round();
        let c = equator(&s);
        let state = shorter_side_loop(&s, &c, 1, 0.1).unwrap();
        assert!(state.length < c.length - 1e-6, "length {}", state.length);
        let mut gap = f64::INFINITY;
        for w in c.samples(&s, 128) {
            for v in &state.vertices {
                gap = gap.min(s.dist_local(*v, w));
            }
        }
        assert!(gap > 0.045, "gap {gap}");
    }

    #[test]
    fn shorter_side_loop_needs_conjugate_points() {
        let s = ConeSurface::flat_neck();
        // a parallel in the flat neck is a geodesic with no conjugate points
        let neck_r = 3.0;
        let c = find_closed_geodesic(
            &s,
            SurfPoint::new(neck_r, 0.0),
            FRAC_PI_2,
            TAU * s.warp(neck_r).0,
        )
        .unwrap();
        assert!(matches!(
            shorter_side_loop(&s, &c, 1, 0.1),
            Err(SearchError::Precondition(_))
        ));
    }

    #[test]
    fn cascade_on_flat_neck() {
        let s = ConeSurface::flat_neck();
        let bulge = s.profile().waist_r().unwrap();
        let c0 = find_closed_geodesic(
            &s,
            SurfPoint::new(bulge, 0.0),
            FRAC_PI_2,
            TAU * s.warp(bulge).0,
        )
        .unwrap();
        let (chain, records) = cascade(&s, c0, 4, 48, 1.25 * s.len()).unwrap();
        assert!(records.len() >= 1, "no stages");
        for w in chain.windows(2) {
            assert!(w[1].length < w[0].length - 1e-6);
        }
        assert!(!records.last().unwrap().conjugate_pair);
    }

    #[test]
    fn sphere_has_no_escaper() {
        let s = ConeSurface::round();
        let c = equator(&s);
        assert!(matches!(
            check_return_condition(&s, &c, 6, 4.0 * PI, FanSide::Left).unwrap(),
            ReturnVerdict::AllReturn
        ));
    }

    #[test]
    fn loopstate_roundtrip_through_broken() {
        let s = ConeSurface::round();
        let state = LoopState::parallel(&s, 1.0, 64);
        let broken = BrokenLoop::from_loop(&state, 16);
        let d = broken.length(&s).unwrap();
        assert!((d - state.length).abs() < 0.01 * state.length);
    }
}
