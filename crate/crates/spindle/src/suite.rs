//! Acceptance suite: the fixed battery of geometry checks shipped with the
//! crate, each writing a deterministic artifact so a rerun can be compared
//! byte for byte.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::birkhoff::{
    boundary_inverse_check, circ_diff, extend_boundary, find_periodic_points, sample_annulus,
    AnnulusSample, BoundaryRow, NodeStatus,
};
use crate::csf::{avoidance_check, evolve, Budget, LoopState, Verdict};
use crate::geodesic::{
    find_closed_geodesic, jacobi_index, shoot, ClosedGeodesic, ConeEventKind,
};
use crate::report::{fmt_f64, write_csv, write_json};
use crate::search::{cascade, relax_broken, sweep_separating_geodesic, BrokenLoop, RelaxMode, SweepOpts};
use crate::surface::{ConeSurface, SurfPoint};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn res(id: usize, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult { id, name, passed, detail }
}

fn fail(id: usize, name: &'static str, msg: impl std::fmt::Display) -> CriterionResult {
    res(id, name, false, format!("error: {msg}"))
}

/// Run criteria 1 through 10 into `out`, leaving one artifact file per
/// criterion. Returns the verdicts in order.
pub fn run_criteria(out: &Path) -> Vec<CriterionResult> {
    let mut results = Vec::new();
    results.push(collapse_law(out));
    results.push(trichotomy(out));
    results.push(avoidance(out));
    let (r4, bumped) = sweeps(out);
    results.push(r4);
    results.push(cone_parity(out));
    results.push(equator_iterates(out));
    results.push(discrete_signature(out));
    results.push(annulus_maps(out));
    results.push(periodic_orbits(out, bumped.as_ref()));
    results.push(neck_cascade(out));
    results
}

/// Full suite: criteria 1-10 into out/run1, then an identical replay into
/// out/run2 compared byte for byte as criterion 11.
pub fn run_suite(out: &Path) -> Vec<CriterionResult> {
    let mut results = run_criteria(&out.join("run1"));
    let _ = run_criteria(&out.join("run2"));
    results.push(replay_identical(out));
    results
}

// 1. collapse time of flat-cone circles follows T = R^2 / 2

fn collapse_law(out: &Path) -> CriterionResult {
    const NAME: &str = "flat-cone collapse law";
    let t0 = Instant::now();
    let cases: Vec<(u32, f64)> =
        [2u32, 3, 5].iter().flat_map(|&p| [0.25, 0.5, 1.0].map(|r| (p, r))).collect();
    let runs: Vec<Result<(u32, f64, f64), String>> = cases
        .par_iter()
        .map(|&(p, radius)| {
            let s = ConeSurface::flat_cone(p);
            let state = LoopState::parallel(&s, radius, 256);
            let outcome = evolve(&s, state, Budget::default()).map_err(|e| e.to_string())?;
            match outcome.verdict {
                Verdict::ConeCollapse { cone, collapse_time } if cone.order == p => {
                    Ok((p, radius, collapse_time))
                }
                v => Err(format!("p={p} R={radius}: unexpected verdict {}", verdict_name(&v))),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for run in runs {
        match run {
            Ok((p, radius, t)) => {
                let want = radius * radius / 2.0;
                let rel = (t - want).abs() / want;
                worst = worst.max(rel);
                rows.push(vec![
                    p.to_string(),
                    fmt_f64(radius),
                    fmt_f64(t),
                    fmt_f64(want),
                    fmt_f64(rel),
                ]);
            }
            Err(e) => return fail(1, NAME, e),
        }
    }
    if let Err(e) =
        write_csv(&out.join("collapse_law.csv"), &["p", "radius", "t", "predicted", "rel_err"], &rows)
    {
        return fail(1, NAME, e);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let passed = worst < 0.02 && elapsed < 30.0;
    res(1, NAME, passed, format!("max rel err {worst:.2e}, {elapsed:.1}s"))
}

// 2. flow trichotomy: every run classified, cone terminations collapse
//    into the attributed cone

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::RoundPoint { .. } => "RoundPoint",
        Verdict::ConeCollapse { .. } => "ConeCollapse",
        Verdict::LimitGeodesic { .. } => "LimitGeodesic",
        Verdict::BudgetExhausted { .. } => "BudgetExhausted",
    }
}

fn trichotomy(out: &Path) -> CriterionResult {
    const NAME: &str = "flow trichotomy";
    let surfaces: Vec<(&str, ConeSurface)> = vec![
        ("round", ConeSurface::round()),
        ("spindle_2_1", ConeSurface::spindle(2, 1)),
        ("spindle_3_1", ConeSurface::spindle(3, 1)),
        ("bumped_spindle", ConeSurface::bumped_spindle()),
        ("flat_cone_3", ConeSurface::flat_cone(3)),
    ];
    let fractions = [0.2, 0.45, 0.7, 0.9];
    let cases: Vec<(usize, f64)> =
        (0..surfaces.len()).flat_map(|i| fractions.map(|s| (i, s))).collect();
    let runs: Vec<Result<(usize, f64, String, f64), String>> = cases
        .par_iter()
        .map(|&(i, frac)| {
            let s = &surfaces[i].1;
            let guard = s.r_guard();
            let r = guard + frac * (s.len() - 2.0 * guard);
            let outcome = evolve(s, LoopState::parallel(s, r, 64), Budget::default())
                .map_err(|e| e.to_string())?;
            let eps = 1e-2 * s.len();
            match &outcome.verdict {
                Verdict::ConeCollapse { cone, .. } => {
                    let last = outcome.history.last().ok_or("empty history")?;
                    if last.nearest_pole(s) != cone.pole {
                        return Err(format!(
                            "{} frac={frac}: collapse attributed to wrong pole",
                            surfaces[i].0
                        ));
                    }
                }
                Verdict::RoundPoint { limit, .. } => {
                    for cp in s.cone_points() {
                        if cp.order >= 2 && (limit.r - cp.position).abs() < eps {
                            return Err(format!(
                                "{} frac={frac}: round point at a cone point",
                                surfaces[i].0
                            ));
                        }
                    }
                }
                Verdict::LimitGeodesic { .. } | Verdict::BudgetExhausted { .. } => {}
            }
            let t_final = outcome.trace.last().map(|r| r.0).unwrap_or(0.0);
            Ok((i, frac, verdict_name(&outcome.verdict).to_string(), t_final))
        })
        .collect();
    let mut rows = Vec::new();
    let mut budget_outs = 0usize;
    for run in runs {
        match run {
            Ok((i, frac, verdict, t)) => {
                if verdict == "BudgetExhausted" {
                    budget_outs += 1;
                }
                rows.push(vec![
                    surfaces[i].0.to_string(),
                    fmt_f64(frac),
                    verdict,
                    fmt_f64(t),
                ]);
            }
            Err(e) => return fail(2, NAME, e),
        }
    }
    let n = rows.len();
    if let Err(e) =
        write_csv(&out.join("trichotomy.csv"), &["surface", "fraction", "verdict", "t_final"], &rows)
    {
        return fail(2, NAME, e);
    }
    let passed = n >= 20 && budget_outs == 0;
    res(2, NAME, passed, format!("{n} runs classified, {budget_outs} budget exhaustions"))
}

// 3. avoidance principle: disjoint loop pairs never touch under the flow

fn avoidance(out: &Path) -> CriterionResult {
    const NAME: &str = "avoidance principle";
    let pairs: Vec<(&str, ConeSurface, f64, f64)> = vec![
        ("round", ConeSurface::round(), 0.7, 1.1),
        ("round", ConeSurface::round(), 0.5, 1.0),
        ("round", ConeSurface::round(), 0.9, 2.0),
        ("round", ConeSurface::round(), 1.2, 2.4),
        ("spindle_3_1", ConeSurface::spindle(3, 1), 0.8, 1.4),
        ("spindle_3_1", ConeSurface::spindle(3, 1), 1.0, 2.0),
        ("football_3", ConeSurface::football(3), 0.8, 1.5),
        ("football_3", ConeSurface::football(3), 1.0, 2.2),
        ("bumped_spindle", ConeSurface::bumped_spindle(), 0.9, 1.6),
        ("flat_cone_3", ConeSurface::flat_cone(3), 0.6, 1.3),
    ];
    let runs: Vec<Result<(usize, f64, bool), String>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (_, s, r_a, r_b))| {
            let a = LoopState::parallel(s, *r_a, 64);
            let b = LoopState::parallel(s, *r_b, 64);
            let rep = avoidance_check(s, a, b, Budget::default()).map_err(|e| e.to_string())?;
            Ok((i, rep.min_distance, rep.violated))
        })
        .collect();
    let mut rows = Vec::new();
    let mut violations = 0usize;
    for run in runs {
        match run {
            Ok((i, min_d, violated)) => {
                if violated {
                    violations += 1;
                }
                rows.push(vec![
                    pairs[i].0.to_string(),
                    fmt_f64(pairs[i].2),
                    fmt_f64(pairs[i].3),
                    fmt_f64(min_d),
                    violated.to_string(),
                ]);
            }
            Err(e) => return fail(3, NAME, e),
        }
    }
    if let Err(e) = write_csv(
        &out.join("avoidance.csv"),
        &["surface", "r_a", "r_b", "min_distance", "violated"],
        &rows,
    ) {
        return fail(3, NAME, e);
    }
    res(3, NAME, violations == 0, format!("{} pairs, {violations} violations", rows.len()))
}

// 4. sweep: waist recovery on the symmetric spindle, separating geodesic
//    on the bumped one

fn sweeps(out: &Path) -> (CriterionResult, Option<(ConeSurface, ClosedGeodesic)>) {
    const NAME: &str = "sweep finds separating geodesics";
    let s1 = ConeSurface::spindle(3, 1);
    let waist = s1.profile().waist_r().unwrap();
    let want = TAU * s1.warp(waist).0;
    let (c1, rec1) = match sweep_separating_geodesic(&s1, &SweepOpts::default()) {
        Ok(v) => v,
        Err(e) => return (fail(4, NAME, e), None),
    };
    let s2 = ConeSurface::bumped_spindle();
    let (c2, rec2) = match sweep_separating_geodesic(&s2, &SweepOpts::default()) {
        Ok(v) => v,
        Err(e) => return (fail(4, NAME, e), None),
    };
    for (file, recs) in [("sweep_spindle.csv", &rec1), ("sweep_bumped.csv", &rec2)] {
        let rows: Vec<Vec<String>> = recs
            .iter()
            .map(|r| {
                vec![
                    fmt_f64(r.s),
                    r.verdict.clone(),
                    format!("{:?}", r.collapse_pole),
                    fmt_f64(r.t_final),
                ]
            })
            .collect();
        if let Err(e) =
            write_csv(&out.join(file), &["s", "verdict", "collapse_pole", "t_final"], &rows)
        {
            return (fail(4, NAME, e), None);
        }
    }
    #[derive(Serialize)]
    struct Summary {
        spindle_length: String,
        spindle_expected: String,
        bumped_length: String,
        bumped_defect: String,
        bumped_separating: bool,
    }
    let summary = Summary {
        spindle_length: fmt_f64(c1.length),
        spindle_expected: fmt_f64(want),
        bumped_length: fmt_f64(c2.length),
        bumped_defect: fmt_f64(c2.defect),
        bumped_separating: c2.is_separating(&s2),
    };
    if let Err(e) = write_json(&out.join("sweep_summary.json"), &summary) {
        return (fail(4, NAME, e), None);
    }
    let waist_err = (c1.length - want).abs();
    let passed = waist_err < 1e-5 && summary.bumped_separating && c2.defect < 1e-6;
    let detail = format!(
        "waist err {waist_err:.2e}, bumped length {:.8} defect {:.2e}",
        c2.length, c2.defect
    );
    (res(4, NAME, passed, detail), Some((s2, c2)))
}

// 5. cone events: reflection for even order, pass-through for odd, with
//    tight cover development on 1000 random apex rays

fn cone_parity(out: &Path) -> CriterionResult {
    const NAME: &str = "cone event parity";
    let mut rows = Vec::new();
    let mut total = 0usize;
    let mut bad = 0usize;
    for (pi, p) in (2u32..=7).enumerate() {
        let n_rays = if pi < 4 { 167 } else { 166 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + p as u64);
        let s = ConeSurface::football(p);
        let mut max_defect = 0.0f64;
        let mut ok = 0usize;
        for _ in 0..n_rays {
            total += 1;
            let r0: f64 = rng.gen_range(0.5..1.2);
            let t0: f64 = rng.gen_range(0.0..TAU);
            let path = match shoot(&s, SurfPoint::new(r0, t0), PI, 2.0 * r0.min(1.0)) {
                Ok(p) => p,
                Err(_) => {
                    bad += 1;
                    continue;
                }
            };
            let want = if p % 2 == 0 { ConeEventKind::Reflect } else { ConeEventKind::PassThrough };
            if path.events.len() == 1
                && path.events[0].kind == want
                && path.events[0].cover_defect < 1e-9
            {
                ok += 1;
                max_defect = max_defect.max(path.events[0].cover_defect);
            } else {
                bad += 1;
            }
        }
        rows.push(vec![p.to_string(), n_rays.to_string(), ok.to_string(), fmt_f64(max_defect)]);
    }
    if let Err(e) =
        write_csv(&out.join("cone_parity.csv"), &["p", "rays", "ok", "max_cover_defect"], &rows)
    {
        return fail(5, NAME, e);
    }
    res(5, NAME, bad == 0 && total == 1000, format!("{total} rays, {bad} failures"))
}

// 6. Morse indices of equator iterates: ind(c^m) = 2m - 1

fn equator(s: &ConeSurface) -> Result<ClosedGeodesic, String> {
    find_closed_geodesic(s, SurfPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2, TAU)
        .map_err(|e| e.to_string())
}

fn equator_iterates(out: &Path) -> CriterionResult {
    const NAME: &str = "equator iterate indices";
    let s = ConeSurface::round();
    let c = match equator(&s) {
        Ok(c) => c,
        Err(e) => return fail(6, NAME, e),
    };
    let mut rows = Vec::new();
    let mut passed = true;
    for m in 1..=6usize {
        let data = match jacobi_index(&s, &c, m) {
            Ok(d) => d,
            Err(e) => return fail(6, NAME, e),
        };
        if data.index != 2 * m - 1 || (m == 1 && data.nullity != 2) {
            passed = false;
        }
        rows.push(vec![
            m.to_string(),
            data.index.to_string(),
            (2 * m - 1).to_string(),
            data.nullity.to_string(),
        ]);
    }
    if let Err(e) = write_csv(
        &out.join("equator_iterates.csv"),
        &["m", "index", "expected", "nullity"],
        &rows,
    ) {
        return fail(6, NAME, e);
    }
    res(6, NAME, passed, format!("m = 1..6, nullity(c) = {}", rows[0][3]))
}

// 7. discrete Hessian signature of the broken-loop energy matches the
//    Jacobi index and nullity at k in {16, 32, 64}

fn discrete_signature(out: &Path) -> CriterionResult {
    const NAME: &str = "discrete signature matches Jacobi";
    let round = ConeSurface::round();
    let sp = ConeSurface::spindle(3, 1);
    let waist = sp.profile().waist_r().unwrap();
    let cases: Vec<(&str, &ConeSurface, Result<ClosedGeodesic, String>)> = vec![
        ("round_equator", &round, equator(&round)),
        (
            "spindle_3_1_waist",
            &sp,
            find_closed_geodesic(
                &sp,
                SurfPoint::new(waist, 0.0),
                FRAC_PI_2,
                TAU * sp.warp(waist).0,
            )
            .map_err(|e| e.to_string()),
        ),
    ];
    let mut rows = Vec::new();
    let mut passed = true;
    for (label, s, c) in &cases {
        let c = match c {
            Ok(c) => c,
            Err(e) => return fail(7, NAME, e),
        };
        let jac = match jacobi_index(s, c, 1) {
            Ok(d) => d,
            Err(e) => return fail(7, NAME, e),
        };
        for k in [16usize, 32, 64] {
            let broken = BrokenLoop::from_geodesic(s, c, k);
            let outcome = match relax_broken(s, broken, RelaxMode::GradientDescent) {
                Ok(o) => o,
                Err(e) => return fail(7, NAME, e),
            };
            if outcome.index != jac.index || outcome.nullity != jac.nullity {
                passed = false;
            }
            rows.push(vec![
                label.to_string(),
                k.to_string(),
                outcome.index.to_string(),
                outcome.nullity.to_string(),
                jac.index.to_string(),
                jac.nullity.to_string(),
            ]);
        }
    }
    if let Err(e) = write_csv(
        &out.join("discrete_signature.csv"),
        &["geodesic", "k", "index", "nullity", "jacobi_index", "jacobi_nullity"],
        &rows,
    ) {
        return fail(7, NAME, e);
    }
    res(7, NAME, passed, format!("{} signature comparisons", rows.len()))
}

// 8. Birkhoff annulus maps: identity on the round sphere, fixed meridian
//    row and unit Jacobians on the symmetric spindle, boundary extension
//    inverse-consistent

fn annulus_rows(sample: &AnnulusSample) -> Vec<Vec<String>> {
    sample
        .nodes
        .iter()
        .map(|n| {
            vec![
                fmt_f64(n.t),
                fmt_f64(n.alpha),
                fmt_f64(n.t_prime),
                fmt_f64(n.alpha_prime),
                fmt_f64(n.return_length),
                n.jac_det.map(fmt_f64).unwrap_or_else(|| "".into()),
                format!("{:?}", n.status),
            ]
        })
        .collect()
}

const ANNULUS_HEADER: [&str; 7] =
    ["t", "alpha", "t_prime", "alpha_prime", "return_length", "jac_det", "status"];

fn annulus_maps(out: &Path) -> CriterionResult {
    const NAME: &str = "annulus maps";
    let s = ConeSurface::round();
    let c = match equator(&s) {
        Ok(c) => c,
        Err(e) => return fail(8, NAME, e),
    };
    let sphere_sample = sample_annulus(&s, &c, 32, 32, 10.0 * c.length);
    let mut sphere_disp = 0.0f64;
    let mut sphere_det = 0.0f64;
    for n in &sphere_sample.nodes {
        if n.status != NodeStatus::Ok {
            return fail(8, NAME, format!("sphere node failed at t={} alpha={}", n.t, n.alpha));
        }
        sphere_disp = sphere_disp
            .max(circ_diff(n.t_prime, n.t, c.length).abs())
            .max((n.alpha_prime - n.alpha).abs());
        if let Some(det) = n.jac_det {
            sphere_det = sphere_det.max((det - 1.0).abs());
        }
    }
    if let Err(e) =
        write_csv(&out.join("annulus_sphere.csv"), &ANNULUS_HEADER, &annulus_rows(&sphere_sample))
    {
        return fail(8, NAME, e);
    }

    let sp = ConeSurface::spindle(3, 1);
    let waist = sp.profile().waist_r().unwrap();
    let cw = match find_closed_geodesic(
        &sp,
        SurfPoint::new(waist, 0.0),
        FRAC_PI_2,
        TAU * sp.warp(waist).0,
    ) {
        Ok(c) => c,
        Err(e) => return fail(8, NAME, e),
    };
    let mut sample = sample_annulus(&sp, &cw, 32, 32, 10.0 * cw.length);
    // row closest to alpha = pi/2
    let mid = (0..32)
        .min_by(|&a, &b| {
            let da = (sample.alpha_grid(a) - FRAC_PI_2).abs();
            let db = (sample.alpha_grid(b) - FRAC_PI_2).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let mut meridian_err = 0.0f64;
    for i in 0..32 {
        let t = sample.t_grid(i);
        match crate::birkhoff::birkhoff_point(&sp, &cw, t, FRAC_PI_2, 10.0 * cw.length) {
            Ok((tp, ap, _)) => {
                meridian_err = meridian_err
                    .max(circ_diff(tp, t, cw.length).abs())
                    .max((ap - FRAC_PI_2).abs());
            }
            Err(e) => return fail(8, NAME, e),
        }
        let _ = sample.node(i, mid);
    }
    let mut defined = 0usize;
    let mut within = 0usize;
    for n in &sample.nodes {
        if let Some(det) = n.jac_det {
            defined += 1;
            if (det - 1.0).abs() < 1e-3 {
                within += 1;
            }
        }
    }
    let det_frac = within as f64 / defined.max(1) as f64;
    if let Err(e) = extend_boundary(&sp, &cw, &mut sample) {
        return fail(8, NAME, e);
    }
    let rows_ok = matches!(sample.row_zero, BoundaryRow::Defined { .. })
        && matches!(sample.row_pi, BoundaryRow::Defined { .. });
    let inverse_dev = match boundary_inverse_check(&sample) {
        Ok(d) => d,
        Err(e) => return fail(8, NAME, e),
    };
    if let Err(e) =
        write_csv(&out.join("annulus_spindle.csv"), &ANNULUS_HEADER, &annulus_rows(&sample))
    {
        return fail(8, NAME, e);
    }
    #[derive(Serialize)]
    struct Summary {
        sphere_max_displacement: String,
        sphere_max_det_dev: String,
        spindle_meridian_err: String,
        spindle_det_within_1e3: String,
        boundary_inverse_dev: String,
    }
    if let Err(e) = write_json(
        &out.join("annulus_summary.json"),
        &Summary {
            sphere_max_displacement: fmt_f64(sphere_disp),
            sphere_max_det_dev: fmt_f64(sphere_det),
            spindle_meridian_err: fmt_f64(meridian_err),
            spindle_det_within_1e3: fmt_f64(det_frac),
            boundary_inverse_dev: fmt_f64(inverse_dev),
        },
    ) {
        return fail(8, NAME, e);
    }
    let passed = sphere_disp < 1e-4
        && sphere_det < 1e-4
        && meridian_err < 1e-5
        && det_frac >= 0.99
        && rows_ok
        && inverse_dev < 1e-4;
    res(
        8,
        NAME,
        passed,
        format!(
            "sphere disp {sphere_disp:.1e} det {sphere_det:.1e}; meridian {meridian_err:.1e}, \
             dets ok {:.1}%, inverse {inverse_dev:.1e}",
            100.0 * det_frac
        ),
    )
}

// 9. periodic return-map points on the bumped spindle polish into at
//    least two distinct closed geodesics

fn periodic_orbits(out: &Path, bumped: Option<&(ConeSurface, ClosedGeodesic)>) -> CriterionResult {
    const NAME: &str = "periodic orbits on the bumped spindle";
    let (s, c) = match bumped {
        Some((s, c)) => (s, c),
        None => return fail(9, NAME, "no separating geodesic from the sweep stage"),
    };
    let horizon = 10.0 * c.length;
    let sample = sample_annulus(s, c, 24, 24, horizon);
    let (orbits, stats) = match find_periodic_points(s, c, &sample, 3, horizon) {
        Ok(v) => v,
        Err(e) => return fail(9, NAME, e),
    };
    let rows: Vec<Vec<String>> = orbits
        .iter()
        .map(|o| {
            vec![
                o.period.to_string(),
                fmt_f64(o.points[0].t),
                fmt_f64(o.points[0].alpha),
                fmt_f64(o.length),
                fmt_f64(o.geodesic.defect),
                o.is_iterate.to_string(),
            ]
        })
        .collect();
    if let Err(e) = write_csv(
        &out.join("periodic_orbits.csv"),
        &["period", "t0", "alpha0", "length", "defect", "is_iterate"],
        &rows,
    ) {
        return fail(9, NAME, e);
    }
    let distinct = orbits.iter().filter(|o| !o.is_iterate).count();
    let worst_defect =
        orbits.iter().map(|o| o.geodesic.defect).fold(0.0f64, f64::max);
    let passed = distinct >= 2 && worst_defect < 1e-10;
    res(
        9,
        NAME,
        passed,
        format!(
            "{} orbits ({distinct} distinct) from {} seeds, worst defect {worst_defect:.1e}",
            orbits.len(),
            stats.seeds
        ),
    )
}

// 10. shortening cascade on the flat-neck spindle terminates with no
//     conjugate pair and strictly decreasing lengths

fn neck_cascade(out: &Path) -> CriterionResult {
    const NAME: &str = "flat-neck cascade";
    let s = ConeSurface::flat_neck();
    let bulge = s.profile().waist_r().unwrap();
    let c0 = match find_closed_geodesic(
        &s,
        SurfPoint::new(bulge, 0.0),
        FRAC_PI_2,
        TAU * s.warp(bulge).0,
    ) {
        Ok(c) => c,
        Err(e) => return fail(10, NAME, e),
    };
    let start_len = c0.length;
    let (chain, records) = match cascade(&s, c0, 4, 48, 1.25 * s.len()) {
        Ok(v) => v,
        Err(e) => return fail(10, NAME, e),
    };
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.length),
                r.index.to_string(),
                r.nullity.to_string(),
                r.separating.to_string(),
                r.conjugate_pair.to_string(),
            ]
        })
        .collect();
    if let Err(e) = write_csv(
        &out.join("cascade.csv"),
        &["length", "index", "nullity", "separating", "conjugate_pair"],
        &rows,
    ) {
        return fail(10, NAME, e);
    }
    // the chain starts at c0 itself
    let decreasing = chain.windows(2).all(|w| w[1].length < w[0].length - 1e-6)
        && chain.last().map(|c| c.length < start_len - 1e-6).unwrap_or(false);
    let terminated = records.last().map(|r| !r.conjugate_pair).unwrap_or(false);
    let passed = !records.is_empty() && decreasing && terminated;
    let lens: Vec<String> = records.iter().map(|r| format!("{:.6}", r.length)).collect();
    res(
        10,
        NAME,
        passed,
        format!("start {start_len:.6} -> [{}], terminal conjugate-free: {terminated}", lens.join(", ")),
    )
}

// 11. replay determinism: a second run writes byte-identical artifacts

fn replay_identical(out: &Path) -> CriterionResult {
    const NAME: &str = "byte-identical replay";
    let a = out.join("run1");
    let b = out.join("run2");
    let names = match artifact_names(&a) {
        Ok(n) => n,
        Err(e) => return fail(11, NAME, e),
    };
    if names.is_empty() {
        return fail(11, NAME, "no artifacts to compare");
    }
    let mut mismatches = Vec::new();
    for name in &names {
        let fa = std::fs::read(a.join(name));
        let fb = std::fs::read(b.join(name));
        match (fa, fb) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => mismatches.push(name.clone()),
        }
    }
    let passed = mismatches.is_empty();
    let detail = if passed {
        format!("{} artifacts identical", names.len())
    } else {
        format!("differs: {}", mismatches.join(", "))
    };
    res(11, NAME, passed, detail)
}

fn artifact_names(dir: &Path) -> Result<Vec<String>, String> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        if entry.path().is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}
