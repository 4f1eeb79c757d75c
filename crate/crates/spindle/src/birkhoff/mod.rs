//! Birkhoff annulus return map of a separating geodesic: second-encounter
//! shooting, grid sampling with Jacobians in (t, cos alpha), boundary rows
//! from second conjugate points, and periodic-point search.

use rayon::prelude::*;
use serde::Serialize;

use crate::geodesic::{
    find_closed_geodesic, shoot, ClosedGeodesic, GeodesicError, SideFn,
};
use crate::num::{bisect, wrap_angle};
use crate::num::ode::{integrate, OdeOpts};
use crate::search::{hausdorff, DIST_TOL};
use crate::surface::{ConeSurface, SurfPoint};

pub const ALPHA_MIN: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum BirkhoffError {
    #[error("no second return within horizon ({found} crossings found)")]
    NoSecondReturn { found: usize },
    #[error("tangential encounter at incidence angle {alpha:.3e}")]
    TangentialEncounter { alpha: f64 },
    #[error("boundary rows need conjugate points")]
    ConjugateDataMissing,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnulusPoint {
    pub t: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeStatus {
    Ok,
    NoSecondReturn,
    Tangential,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusNode {
    pub t: f64,
    pub alpha: f64,
    pub t_prime: f64,
    pub alpha_prime: f64,
    pub return_length: f64,
    pub jac_det: Option<f64>,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryMethod {
    Jacobi,
    Extrapolated,
}

#[derive(Debug, Clone, Serialize)]
pub enum BoundaryRow {
    Undefined,
    Defined { values: Vec<f64>, method: BoundaryMethod },
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusSample {
    pub length: f64,
    pub n_t: usize,
    pub n_alpha: usize,
    pub horizon: f64,
    /// row-major: nodes[i * n_alpha + j] for t_i, alpha_j
    pub nodes: Vec<AnnulusNode>,
    pub row_zero: BoundaryRow,
    pub row_pi: BoundaryRow,
    pub partial: bool,
}

impl AnnulusSample {
    pub fn node(&self, i: usize, j: usize) -> &AnnulusNode {
        &self.nodes[i * self.n_alpha + j]
    }

    pub fn t_grid(&self, i: usize) -> f64 {
        self.length * i as f64 / self.n_t as f64
    }

    pub fn alpha_grid(&self, j: usize) -> f64 {
        std::f64::consts::PI * (j + 1) as f64 / (self.n_alpha + 1) as f64
    }
}

pub fn circ_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    if d > 0.5 * period { d - period } else { d }
}

/// Arclength parameter on c of the point nearest to p, via tangential
/// Newton projection from the nearest dense sample.
fn project_to_curve(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    table: &[(f64, SurfPoint)],
    p: SurfPoint,
) -> f64 {
    let (mut s, _) = table
        .iter()
        .map(|&(s, q)| (s, surface.dist_local(p, q)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    for _ in 0..40 {
        let (q, chi) = c.eval_dir(surface, s);
        let chart = surface.chart_for([q, p].iter().copied());
        let cq = surface.to_chart(chart, q, None);
        let cp = surface.to_chart(chart, p, Some(cq));
        let l = surface.log2(chart, cq, cp);
        let (f, _, _) = surface.warp(q.r);
        let tan = crate::geodesic::velocity_from_global(surface, chart, cq, chi.cos(), chi.sin() / f);
        let tn = surface.norm(chart, cq, tan);
        // metric inner product by polarization
        let sum = [l[0] + tan[0] / tn, l[1] + tan[1] / tn];
        let dif = [l[0] - tan[0] / tn, l[1] - tan[1] / tn];
        let h = 0.25
            * (surface.norm(chart, cq, sum).powi(2) - surface.norm(chart, cq, dif).powi(2));
        s = (s + h).rem_euclid(c.length);
        if h.abs() < 1e-12 * surface.len() {
            break;
        }
    }
    s
}

struct ReturnMachine<'a> {
    surface: &'a ConeSurface,
    c: &'a ClosedGeodesic,
    side: SideFn,
    table: Vec<(f64, SurfPoint)>,
    horizon: f64,
}

impl<'a> ReturnMachine<'a> {
    fn new(surface: &'a ConeSurface, c: &'a ClosedGeodesic, horizon: f64) -> Self {
        let n = 2048;
        let table = (0..n)
            .map(|i| {
                let s = c.length * i as f64 / n as f64;
                (s, c.eval(surface, s))
            })
            .collect();
        ReturnMachine { surface, c, side: SideFn::build(surface, c), table, horizon }
    }

    /// Second transversal crossing of c along the geodesic that leaves c(t)
    /// at incidence angle alpha.
    fn birkhoff_point(&self, t: f64, alpha: f64) -> Result<(f64, f64, f64), BirkhoffError> {
        if !(ALPHA_MIN..=std::f64::consts::PI - ALPHA_MIN).contains(&alpha) {
            return Err(BirkhoffError::Precondition(format!(
                "alpha {alpha} outside (0, pi)"
            )));
        }
        let (pt, chi) = self.c.eval_dir(self.surface, t);
        let psi = wrap_angle(chi + alpha);
        let path = shoot(self.surface, pt, psi, self.horizon)?;
        let ds = 0.005 * self.surface.len();
        let s_min = 3.0 * ds;
        let mut found = 0usize;
        let mut prev_s = s_min;
        let mut prev = self.side.eval(path.eval(self.surface, prev_s));
        let n_scan = ((self.horizon - s_min) / ds).ceil() as usize;
        for i in 1..=n_scan {
            let s = (s_min + i as f64 * ds).min(self.horizon);
            let cur = self.side.eval(path.eval(self.surface, s));
            if (prev > 0.0) != (cur > 0.0) {
                found += 1;
                if found == 2 {
                    let s_cross = bisect(prev_s, s, 1e-10, |x| {
                        self.side.eval(path.eval(self.surface, x))
                    });
                    let p = path.eval(self.surface, s_cross);
                    let t_prime = project_to_curve(self.surface, self.c, &self.table, p);
                    let (_, chi_path) = path.eval_dir(self.surface, s_cross);
                    let (_, chi_c) = self.c.eval_dir(self.surface, t_prime);
                    let alpha_prime = (chi_path - chi_c).rem_euclid(std::f64::consts::PI);
                    if alpha_prime < ALPHA_MIN || std::f64::consts::PI - alpha_prime < ALPHA_MIN
                    {
                        return Err(BirkhoffError::TangentialEncounter { alpha: alpha_prime });
                    }
                    return Ok((t_prime, alpha_prime, s_cross));
                }
            }
            prev = cur;
            prev_s = s;
        }
        Err(BirkhoffError::NoSecondReturn { found })
    }
}

pub fn birkhoff_point(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    t: f64,
    alpha: f64,
    horizon: f64,
) -> Result<(f64, f64, f64), BirkhoffError> {
    ReturnMachine::new(surface, c, horizon).birkhoff_point(t, alpha)
}

pub fn sample_annulus(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    n_t: usize,
    n_alpha: usize,
    horizon: f64,
) -> AnnulusSample {
    let machine = ReturnMachine::new(surface, c, horizon);
    let len = c.length;
    let mut nodes: Vec<AnnulusNode> = (0..n_t * n_alpha)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n_alpha, idx % n_alpha);
            let t = len * i as f64 / n_t as f64;
            let alpha = std::f64::consts::PI * (j + 1) as f64 / (n_alpha + 1) as f64;
            match machine.birkhoff_point(t, alpha) {
                Ok((tp, ap, rl)) => AnnulusNode {
                    t,
                    alpha,
                    t_prime: tp,
                    alpha_prime: ap,
                    return_length: rl,
                    jac_det: None,
                    status: NodeStatus::Ok,
                },
                Err(BirkhoffError::TangentialEncounter { .. }) => AnnulusNode {
                    t,
                    alpha,
                    t_prime: f64::NAN,
                    alpha_prime: f64::NAN,
                    return_length: f64::NAN,
                    jac_det: None,
                    status: NodeStatus::Tangential,
                },
                Err(_) => AnnulusNode {
                    t,
                    alpha,
                    t_prime: f64::NAN,
                    alpha_prime: f64::NAN,
                    return_length: f64::NAN,
                    jac_det: None,
                    status: NodeStatus::NoSecondReturn,
                },
            }
        })
        .collect();

    // central-difference Jacobians of (t, cos a) -> (t', cos a') on the grid
    let at = |i: usize, j: usize| &nodes[(i % n_t) * n_alpha + j];
    let mut dets: Vec<Option<f64>> = vec![None; n_t * n_alpha];
    for i in 0..n_t {
        for j in 1..n_alpha.saturating_sub(1) {
            let quad = [
                at(i + 1, j),
                at(i + n_t - 1, j),
                at(i, j + 1),
                at(i, j - 1),
            ];
            if at(i, j).status != NodeStatus::Ok
                || quad.iter().any(|n| n.status != NodeStatus::Ok)
            {
                continue;
            }
            let dt = 2.0 * len / n_t as f64;
            let dca = quad[2].alpha.cos() - quad[3].alpha.cos();
            let dtp_dt = circ_diff(quad[0].t_prime, quad[1].t_prime, len) / dt;
            let dcp_dt = (quad[0].alpha_prime.cos() - quad[1].alpha_prime.cos()) / dt;
            let dtp_dca = circ_diff(quad[2].t_prime, quad[3].t_prime, len) / dca;
            let dcp_dca = (quad[2].alpha_prime.cos() - quad[3].alpha_prime.cos()) / dca;
            dets[i * n_alpha + j] = Some(dtp_dt * dcp_dca - dtp_dca * dcp_dt);
        }
    }
    for (node, det) in nodes.iter_mut().zip(dets) {
        node.jac_det = det;
    }
    let partial = nodes.iter().any(|n| n.status != NodeStatus::Ok);
    AnnulusSample {
        length: len,
        n_t,
        n_alpha,
        horizon,
        nodes,
        row_zero: BoundaryRow::Undefined,
        row_pi: BoundaryRow::Undefined,
        partial,
    }
}

/// Second zero of the Jacobi field y(0)=0, y'(0)=1 along c starting at
/// base parameter t, searching over the doubled geodesic span.
fn second_conjugate(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    t: f64,
    forward: bool,
) -> Result<Option<f64>, GeodesicError> {
    let span = 4.0 * c.length;
    let k = |s: f64| {
        let p = c.eval(surface, if forward { t + s } else { t - s });
        surface.curvature_raw(p.r, p.theta)
    };
    let rhs = |s: f64, y: &[f64; 2]| [y[1], -k(s) * y[0]];
    let opts = OdeOpts { max_step: 0.05 * c.length, ..OdeOpts::default() };
    let dense = integrate(rhs, 0.0, span, [0.0, 1.0], &opts)?;
    let n = 1600;
    let mut zeros = Vec::new();
    let mut prev_s = span * 1e-9;
    let mut prev = dense.eval(prev_s)[0];
    for i in 1..=n {
        let s = span * 1e-9 + span * (1.0 - 2e-9) * i as f64 / n as f64;
        let cur = dense.eval(s)[0];
        if (prev > 0.0) != (cur > 0.0) {
            zeros.push(bisect(prev_s, s, 1e-12, |x| dense.eval(x)[0]));
            if zeros.len() == 2 {
                return Ok(Some(zeros[1]));
            }
        }
        prev = cur;
        prev_s = s;
    }
    Ok(None)
}

/// Fill the boundary rows from second conjugate points, cross-checked
/// against the limit of the interior rows.
pub fn extend_boundary(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    sample: &mut AnnulusSample,
) -> Result<(), BirkhoffError> {
    let len = sample.length;
    let build_row = |sample: &AnnulusSample, forward: bool| -> Result<BoundaryRow, BirkhoffError> {
        let mut values = Vec::with_capacity(sample.n_t);
        let mut method = BoundaryMethod::Jacobi;
        for i in 0..sample.n_t {
            let t = sample.t_grid(i);
            let s2 = second_conjugate(surface, c, t, forward)?
                .ok_or(BirkhoffError::ConjugateDataMissing)?;
            let jacobi_val =
                if forward { (t + s2).rem_euclid(len) } else { (t - s2).rem_euclid(len) };
            // limit of the two innermost interior rows, linear in cos alpha
            let (j1, j2) = if forward { (0, 1) } else { (sample.n_alpha - 1, sample.n_alpha - 2) };
            let (n1, n2) = (sample.node(i, j1), sample.node(i, j2));
            let value = if n1.status == NodeStatus::Ok && n2.status == NodeStatus::Ok {
                let target = if forward { 1.0 } else { -1.0 };
                let (c1, c2) = (n1.alpha.cos(), n2.alpha.cos());
                let dv = circ_diff(n2.t_prime, n1.t_prime, len);
                let extrap = n1.t_prime + dv * (target - c1) / (c2 - c1);
                if circ_diff(extrap, jacobi_val, len).abs() > 1e-3 {
                    method = BoundaryMethod::Extrapolated;
                    extrap.rem_euclid(len)
                } else {
                    jacobi_val
                }
            } else {
                jacobi_val
            };
            values.push(value);
        }
        Ok(BoundaryRow::Defined { values, method })
    };
    sample.row_zero = build_row(sample, true)?;
    sample.row_pi = build_row(sample, false)?;
    Ok(())
}

/// Max deviation of (alpha=0 row) composed with (alpha=pi row) from the
/// identity, on a fine grid.
pub fn boundary_inverse_check(sample: &AnnulusSample) -> Result<f64, BirkhoffError> {
    let (BoundaryRow::Defined { values: row0, .. }, BoundaryRow::Defined { values: rowp, .. }) =
        (&sample.row_zero, &sample.row_pi)
    else {
        return Err(BirkhoffError::Precondition("boundary rows undefined".into()));
    };
    let len = sample.length;
    let n = sample.n_t;
    let shift = |row: &[f64], t: f64| -> f64 {
        let x = t / len * n as f64;
        let i = (x.floor() as usize) % n;
        let u = x - x.floor();
        let d0 = circ_diff(row[i], sample.t_grid(i), len);
        let d1 = circ_diff(row[(i + 1) % n], sample.t_grid((i + 1) % n), len);
        d0 + u * (d1 - d0)
    };
    let mut worst = 0.0f64;
    let fine = 8 * n;
    for i in 0..fine {
        let t = len * i as f64 / fine as f64;
        let mid = (t + shift(rowp, t)).rem_euclid(len);
        let back = (mid + shift(row0, mid)).rem_euclid(len);
        worst = worst.max(circ_diff(back, t, len).abs());
    }
    Ok(worst)
}

#[derive(Serialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<AnnulusPoint>,
    #[serde(skip)]
    pub geodesic: ClosedGeodesic,
    pub length: f64,
    pub is_iterate: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeedStats {
    pub seeds: usize,
    pub converged: usize,
    pub kept: usize,
}

/// Periodic points of the return map up to max_period, each polished into
/// a closed geodesic; duplicates removed by Hausdorff distance. A near-
/// identity sample (the round sphere) is collapsed to one representative
/// per (period, length) family.
pub fn find_periodic_points(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    sample: &AnnulusSample,
    max_period: usize,
    horizon: f64,
) -> Result<(Vec<PeriodicOrbit>, SeedStats), BirkhoffError> {
    let machine = ReturnMachine::new(surface, c, horizon);
    let len = sample.length;
    let iterate = |t: f64, alpha: f64, n: usize| -> Option<(f64, f64, f64, Vec<AnnulusPoint>)> {
        let (mut tc, mut ac) = (t, alpha);
        let mut total = 0.0;
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            pts.push(AnnulusPoint { t: tc, alpha: ac });
            let (tp, ap, rl) = machine.birkhoff_point(tc, ac).ok()?;
            tc = tp;
            ac = ap;
            total += rl;
        }
        Some((tc, ac, total, pts))
    };

    let near_identity = {
        let ok: Vec<&AnnulusNode> =
            sample.nodes.iter().filter(|n| n.status == NodeStatus::Ok).collect();
        !ok.is_empty()
            && ok
                .iter()
                .filter(|n| {
                    circ_diff(n.t_prime, n.t, len).abs() < 1e-3 * len
                        && (n.alpha_prime - n.alpha).abs() < 1e-3
                })
                .count()
                * 2
                > ok.len()
    };

    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    let mut seeds_total = 0usize;
    let mut converged_total = 0usize;
    for period in 1..=max_period {
        // displacement field of B^n on the grid
        let disp: Vec<Option<(f64, f64)>> = (0..sample.nodes.len())
            .into_par_iter()
            .map(|idx| {
                let node = &sample.nodes[idx];
                if node.status != NodeStatus::Ok {
                    return None;
                }
                iterate(node.t, node.alpha, period).map(|(tp, ap, _, _)| {
                    (circ_diff(tp, node.t, len), ap.cos() - node.alpha.cos())
                })
            })
            .collect();
        let mut seeds: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..sample.n_t {
            for j in 0..sample.n_alpha.saturating_sub(1) {
                let corners = [
                    disp[i * sample.n_alpha + j],
                    disp[((i + 1) % sample.n_t) * sample.n_alpha + j],
                    disp[i * sample.n_alpha + j + 1],
                    disp[((i + 1) % sample.n_t) * sample.n_alpha + j + 1],
                ];
                let Some(vals): Option<Vec<(f64, f64)>> = corners.iter().copied().collect()
                else {
                    continue;
                };
                let flips = |f: fn(&(f64, f64)) -> f64| {
                    vals.iter().map(f).any(|v| v > 0.0) && vals.iter().map(f).any(|v| v < 0.0)
                };
                if flips(|v| v.0) && flips(|v| v.1) {
                    let mag = vals.iter().map(|v| v.0.abs() / len + v.1.abs()).sum::<f64>();
                    seeds.push((i, j, mag));
                }
            }
        }
        seeds.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        seeds.truncate(40);
        seeds_total += seeds.len();

        for (i, j, _) in seeds {
            let mut t = sample.t_grid(i) + 0.5 * len / sample.n_t as f64;
            let mut alpha = 0.5 * (sample.alpha_grid(j) + sample.alpha_grid(j + 1));
            let mut ok = false;
            for _ in 0..30 {
                let Some((tp, ap, _, _)) = iterate(t, alpha, period) else { break };
                let g = [circ_diff(tp, t, len), ap - alpha];
                if g[0].abs() < 1e-9 * len && g[1].abs() < 1e-9 {
                    ok = true;
                    break;
                }
                let ht = 1e-6 * len;
                let ha = 1e-6;
                let (Some(gt), Some(ga)) = (iterate(t + ht, alpha, period), iterate(t, alpha + ha, period))
                else {
                    break;
                };
                let jac = nalgebra::Matrix2::new(
                    (circ_diff(gt.0, t + ht, len) - g[0]) / ht,
                    (circ_diff(ga.0, t, len) - g[0]) / ha,
                    (gt.1 - alpha - g[1]) / ht,
                    (ga.1 - alpha - g[1]) / ha,
                );
                let Some(step) = jac.lu().solve(&nalgebra::Vector2::new(g[0], g[1])) else {
                    break;
                };
                let step_t = step[0].clamp(-0.1 * len, 0.1 * len);
                let step_a = step[1].clamp(-0.3, 0.3);
                t = (t - step_t).rem_euclid(len);
                alpha = (alpha - step_a).clamp(10.0 * ALPHA_MIN, std::f64::consts::PI - 10.0 * ALPHA_MIN);
                if step_t.abs() < 1e-12 * len && step_a.abs() < 1e-12 {
                    ok = true;
                    break;
                }
            }
            if !ok {
                continue;
            }
            converged_total += 1;
            let Some((_, _, total_len, points)) = iterate(t, alpha, period) else { continue };
            let (pt, chi) = c.eval_dir(surface, t);
            let psi = wrap_angle(chi + alpha);
            let Ok(geo) = find_closed_geodesic(surface, pt, psi, total_len) else { continue };
            let geo_samples = geo.samples(surface, 128);
            let dup = orbits.iter().any(|o| {
                hausdorff(surface, &o.geodesic.samples(surface, 128), &geo_samples) < DIST_TOL
                    || (near_identity
                        && o.period == period
                        && (o.length - geo.length).abs() < 1e-6 * (1.0 + geo.length))
            });
            if dup {
                continue;
            }
            let is_iterate = orbits.iter().any(|o| {
                let ratio = geo.length / o.length;
                ratio > 1.5 && (ratio - ratio.round()).abs() < 1e-4
            });
            orbits.push(PeriodicOrbit {
                period,
                points,
                length: geo.length,
                geodesic: geo,
                is_iterate,
            });
        }
    }
    orbits.sort_by(|a, b| {
        a.period.cmp(&b.period).then(a.points[0].t.total_cmp(&b.points[0].t))
    });
    let kept = orbits.len();
    Ok((orbits, SeedStats { seeds: seeds_total, converged: converged_total, kept }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn equator(surface: &ConeSurface) -> ClosedGeodesic {
        find_closed_geodesic(surface, SurfPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2, TAU).unwrap()
    }

    #[test]
    fn sphere_return_is_identity() {
        let s = ConeSurface::round();
        let c = equator(&s);
        for (t, a) in [(0.3, 0.7), (2.0, FRAC_PI_2), (5.5, 2.2)] {
            let (tp, ap, rl) = birkhoff_point(&s, &c, t, a, 10.0 * c.length).unwrap();
            assert!(circ_diff(tp, t, c.length).abs() < 1e-6, "t {t} -> {tp}");
            assert!((ap - a).abs() < 1e-6, "a {a} -> {ap}");
            assert!((rl - TAU).abs() < 1e-6, "return length {rl}");
        }
    }

    #[test]
    fn alpha_zero_is_rejected() {
        let s = ConeSurface::round();
        let c = equator(&s);
        assert!(matches!(
            birkhoff_point(&s, &c, 0.0, 0.0, 10.0 * c.length),
            Err(BirkhoffError::Precondition(_))
        ));
    }

    #[test]
    fn sphere_annulus_identity_with_unit_jacobians() {
        let s = ConeSurface::round();
        let c = equator(&s);
        let sample = sample_annulus(&s, &c, 16, 16, 10.0 * c.length);
        assert!(!sample.partial);
        for n in &sample.nodes {
            assert!(circ_diff(n.t_prime, n.t, c.length).abs() < 1e-4);
            assert!((n.alpha_prime - n.alpha).abs() < 1e-4);
            if let Some(det) = n.jac_det {
                assert!((det - 1.0).abs() < 1e-4, "det {det}");
            }
        }
    }

    #[test]
    fn spindle_waist_fixed_meridian_row() {
        let s = ConeSurface::spindle(3, 1);
        let waist = s.profile().waist_r().unwrap();
        let c = find_closed_geodesic(
            &s,
            SurfPoint::new(waist, 0.0),
            FRAC_PI_2,
            TAU * s.warp(waist).0,
        )
        .unwrap();
        for i in 0..8 {
            let t = c.length * i as f64 / 8.0;
            let (tp, ap, _) = birkhoff_point(&s, &c, t, FRAC_PI_2, 10.0 * c.length).unwrap();
            assert!(circ_diff(tp, t, c.length).abs() < 1e-5, "t {t} -> {tp}");
            assert!((ap - FRAC_PI_2).abs() < 1e-5, "alpha -> {ap}");
        }
    }

    #[test]
    fn sphere_boundary_rows_and_inverse() {
        let s = ConeSurface::round();
        let c = equator(&s);
        let mut sample = sample_annulus(&s, &c, 16, 16, 10.0 * c.length);
        extend_boundary(&s, &c, &mut sample).unwrap();
        match (&sample.row_zero, &sample.row_pi) {
            (
                BoundaryRow::Defined { values: r0, .. },
                BoundaryRow::Defined { values: rp, .. },
            ) => {
                for i in 0..16 {
                    let t = sample.t_grid(i);
                    assert!(circ_diff(r0[i], t, c.length).abs() < 1e-5);
                    assert!(circ_diff(rp[i], t, c.length).abs() < 1e-5);
                }
            }
            _ => panic!("rows undefined"),
        }
        let dev = boundary_inverse_check(&sample).unwrap();
        assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn flat_neck_boundary_needs_conjugate_points() {
        let s = ConeSurface::flat_neck();
        let neck_r = 3.0;
        let c = find_closed_geodesic(
            &s,
            SurfPoint::new(neck_r, 0.0),
            FRAC_PI_2,
            TAU * s.warp(neck_r).0,
        )
        .unwrap();
        let mut sample = sample_annulus(&s, &c, 4, 4, 4.0 * c.length);
        assert!(matches!(
            extend_boundary(&s, &c, &mut sample),
            Err(BirkhoffError::ConjugateDataMissing)
        ));
    }

    #[test]
    fn sphere_periodic_points_collapse_to_one_family() {
        let s = ConeSurface::round();
        let c = equator(&s);
        let sample = sample_annulus(&s, &c, 12, 12, 10.0 * c.length);
        let (orbits, stats) =
            find_periodic_points(&s, &c, &sample, 2, 10.0 * c.length).unwrap();
        assert!(stats.seeds > 0);
        for o in &orbits {
            assert!(
                (o.length - TAU).abs() < 1e-6 || o.is_iterate,
                "length {} period {}",
                o.length,
                o.period
            );
        }
        let fixed: Vec<_> = orbits.iter().filter(|o| o.period == 1).collect();
        assert_eq!(fixed.len(), 1, "family not collapsed: {}", fixed.len());
    }

    #[test]
    fn spindle_meridians_from_fixed_row() {
        let s = ConeSurface::spindle(3, 1);
        let waist = s.profile().waist_r().unwrap();
        let c = find_closed_geodesic(
            &s,
            SurfPoint::new(waist, 0.0),
            FRAC_PI_2,
            TAU * s.warp(waist).0,
        )
        .unwrap();
        let sample = sample_annulus(&s, &c, 12, 12, 10.0 * c.length);
        let (orbits, _) = find_periodic_points(&s, &c, &sample, 1, 10.0 * c.length).unwrap();
        let fixed: Vec<_> = orbits.iter().filter(|o| o.period == 1).collect();
        assert!(!fixed.is_empty());
        for w in fixed.windows(2) {
            assert!((w[0].length - w[1].length).abs() < 1e-6);
        }
    }

    #[test]
    fn crossing_set_stable_under_alpha_jitter() {
        let s = ConeSurface::round();
        let c = equator(&s);
        let pi_3 = PI / 3.0;
        let (tp1, ap1, _) = birkhoff_point(&s, &c, 1.0, pi_3, 10.0 * c.length).unwrap();
        let (tp2, ap2, _) =
            birkhoff_point(&s, &c, 1.0, pi_3 + 1e-7, 10.0 * c.length).unwrap();
        assert!(circ_diff(tp1, tp2, c.length).abs() < 1e-4);
        assert!((ap1 - ap2).abs() < 1e-4);
    }
}
