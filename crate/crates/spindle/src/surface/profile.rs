//! Revolution profiles f: [0, L] -> R+ for the warped-product metric
//! ds^2 = dr^2 + f(r)^2 dtheta^2.
//!
//! Every profile satisfies f(0) = f(L) = 0, f > 0 inside, and the cone-angle
//! slopes f'(0) = 1/p, f'(L) = -1/q exactly. Near a pole the branched cover
//! has warp F = p*f (resp. q*f), and the Cartesian cover metric needs the
//! excess D(x) = F(x) - x evaluated without cancellation; each profile
//! provides that directly.

use serde::{Deserialize, Serialize};

use super::Pole;

/// sin(x) - x without cancellation for small x.
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() > 0.5 {
        x.sin() - x
    } else {
        // alternating series, converges fast for |x| <= 0.5
        let x2 = x * x;
        let mut term = -x * x2 / 6.0;
        let mut sum = term;
        let mut n = 3.0f64;
        for _ in 0..8 {
            term *= -x2 / ((n + 1.0) * (n + 2.0));
            sum += term;
            n += 2.0;
            if term.abs() < 1e-20 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    }
}

/// cos(x) - 1 without cancellation.
fn cos_minus_1(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    -2.0 * s * s
}

/// A single quintic piece a0 + a1 t + ... + a5 t^5 on t in [0, len].
/// `mirrored` pieces are evaluated in t = right_end - r instead of r - left_end,
/// which keeps the pole-side coefficients exact for the south end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuinticPiece {
    pub left: f64,
    pub len: f64,
    pub coeffs: [f64; 6],
    pub mirrored: bool,
}

impl QuinticPiece {
    /// Hermite quintic on [0, len] from (value, d1, d2) at both ends.
    pub fn hermite(left: f64, len: f64, a: [f64; 3], b: [f64; 3], mirrored: bool) -> Self {
        let t = len;
        let (f0, d0, s0) = (a[0], a[1], a[2]);
        let (f1, d1, s1) = (b[0], b[1], b[2]);
        let c0 = f0;
        let c1 = d0;
        let c2 = 0.5 * s0;
        // solve for c3..c5 from the right-end conditions
        let r0 = f1 - (c0 + c1 * t + c2 * t * t);
        let r1 = d1 - (c1 + 2.0 * c2 * t);
        let r2 = s1 - 2.0 * c2;
        let t2 = t * t;
        let t3 = t2 * t;
        // [t^3 t^4 t^5; 3t^2 4t^3 5t^4; 6t 12t^2 20t^3] * [c3 c4 c5]^T = [r0 r1 r2]^T
        let c3 = (10.0 * r0 - 4.0 * r1 * t + 0.5 * r2 * t2) / t3;
        let c4 = (-15.0 * r0 + 7.0 * r1 * t - r2 * t2) / (t3 * t);
        let c5 = (6.0 * r0 - 3.0 * r1 * t + 0.5 * r2 * t2) / (t3 * t2);
        QuinticPiece { left, len, coeffs: [c0, c1, c2, c3, c4, c5], mirrored }
    }

    fn local(&self, r: f64) -> (f64, f64) {
        if self.mirrored {
            (self.left + self.len - r, -1.0)
        } else {
            (r - self.left, 1.0)
        }
    }

    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (t, sgn) = self.local(r);
        let c = &self.coeffs;
        let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let d = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        let s = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        (v, sgn * d, s)
    }
}

/// Piecewise-quintic C^2 profile. First and last pieces store the pole-side
/// coefficients exactly (a0 = a2 = 0, a1 = 1/p resp. 1/q).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuinticSpline {
    pub pieces: Vec<QuinticPiece>,
}

impl QuinticSpline {
    fn piece_at(&self, r: f64) -> &QuinticPiece {
        let mut lo = 0usize;
        let mut hi = self.pieces.len() - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.pieces[mid].left <= r {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        &self.pieces[lo]
    }

    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        self.piece_at(r).eval(r)
    }
}

/// The metric profile. All variants expose f, f', f'' and the stable
/// near-pole cover excess.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// Round sphere: f = sin r on [0, pi], smooth poles (p = q = 1).
    Round,
    /// Constant-curvature football S^2(p, p): f = sin(r)/p on [0, pi].
    Football { p: u32 },
    /// Smooth spindle with distinct orders (p, q):
    /// f = sin(r) * (1/p + (1/q - 1/p)(1 - cos r)/2) on [0, pi].
    Spindle { p: u32, q: u32 },
    /// Exact flat cone of order p near the north apex (f = r/p for r <= flat_extent),
    /// closed off smoothly to a smooth south pole (q = 1).
    FlatCone { p: u32, flat_extent: f64, total_len: f64 },
    /// Spindle with a bulge of positive curvature and an exactly flat
    /// cylindrical neck (f constant over the neck).
    FlatNeck {
        p: u32,
        q: u32,
        bulge_height: f64,
        bulge_pos: f64,
        bulge_f2: f64,
        neck_height: f64,
        neck_start: f64,
        neck_len: f64,
        total_len: f64,
        #[serde(skip)]
        spline: Option<QuinticSpline>,
    },
    /// C^2 quintic-Hermite interpolant of a user knot table (r, f) with pole
    /// slopes 1/p, -1/q and vanishing endpoint second derivative.
    Spline {
        p: u32,
        q: u32,
        knots: Vec<(f64, f64)>,
        #[serde(skip)]
        spline: Option<QuinticSpline>,
    },
}

impl Profile {
    pub fn orders(&self) -> (u32, u32) {
        match self {
            Profile::Round => (1, 1),
            Profile::Football { p } => (*p, *p),
            Profile::Spindle { p, q } => (*p, *q),
            Profile::FlatCone { p, .. } => (*p, 1),
            Profile::FlatNeck { p, q, .. } => (*p, *q),
            Profile::Spline { p, q, .. } => (*p, *q),
        }
    }

    pub fn total_len(&self) -> f64 {
        match self {
            Profile::Round | Profile::Football { .. } | Profile::Spindle { .. } => {
                std::f64::consts::PI
            }
            Profile::FlatCone { total_len, .. } => *total_len,
            Profile::FlatNeck { total_len, .. } => *total_len,
            Profile::Spline { knots, .. } => knots.last().map_or(0.0, |k| k.0),
        }
    }

    fn blend_beta(p: u32, q: u32) -> f64 {
        0.5 * (1.0 / q as f64 - 1.0 / p as f64)
    }

    /// Builds the internal spline for the variants that need one. Must be
    /// called once after construction/deserialization.
    pub fn prepare(&mut self) -> Result<(), String> {
        match self {
            Profile::FlatNeck {
                p,
                q,
                bulge_height,
                bulge_pos,
                bulge_f2,
                neck_height,
                neck_start,
                neck_len,
                total_len,
                spline,
            } => {
                if !(*neck_height > 0.0 && *bulge_height > *neck_height) {
                    return Err("flat_neck: need bulge_height > neck_height > 0".into());
                }
                if !(0.0 < *bulge_pos && *bulge_pos < *neck_start) {
                    return Err("flat_neck: need 0 < bulge_pos < neck_start".into());
                }
                let neck_end = *neck_start + *neck_len;
                if !(neck_end < *total_len) {
                    return Err("flat_neck: neck must end before the south pole".into());
                }
                let pf = *p as f64;
                let qf = *q as f64;
                let h = *neck_height;
                let pieces = vec![
                    QuinticPiece::hermite(
                        0.0,
                        *bulge_pos,
                        [0.0, 1.0 / pf, 0.0],
                        [*bulge_height, 0.0, *bulge_f2],
                        false,
                    ),
                    QuinticPiece::hermite(
                        *bulge_pos,
                        *neck_start - *bulge_pos,
                        [*bulge_height, 0.0, *bulge_f2],
                        [h, 0.0, 0.0],
                        false,
                    ),
                    QuinticPiece {
                        left: *neck_start,
                        len: *neck_len,
                        coeffs: [h, 0.0, 0.0, 0.0, 0.0, 0.0],
                        mirrored: false,
                    },
                    // mirrored: coefficients in t = total_len - r, pole side exact
                    QuinticPiece::hermite(
                        neck_end,
                        *total_len - neck_end,
                        [0.0, 1.0 / qf, 0.0],
                        [h, 0.0, 0.0],
                        true,
                    ),
                ];
                let sp = QuinticSpline { pieces };
                check_positive(&sp, *total_len)?;
                *spline = Some(sp);
                Ok(())
            }
            Profile::Spline { p, q, knots, spline } => {
                if knots.len() < 3 {
                    return Err("spline: need at least 3 knots".into());
                }
                if knots[0] != (0.0, 0.0) {
                    return Err("spline: first knot must be (0, 0)".into());
                }
                let n = knots.len();
                if knots[n - 1].1 != 0.0 {
                    return Err("spline: last knot must have f = 0".into());
                }
                for w in knots.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err("spline: knot radii must be strictly increasing".into());
                    }
                }
                // estimate interior first/second derivatives by parabolic fit
                let mut data = vec![[0.0f64; 3]; n];
                data[0] = [0.0, 1.0 / *p as f64, 0.0];
                data[n - 1] = [0.0, 1.0 / *q as f64, 0.0]; // in mirrored variable
                for i in 1..n - 1 {
                    let (r0, f0) = knots[i - 1];
                    let (r1, f1) = knots[i];
                    let (r2, f2) = knots[i + 1];
                    let h0 = r1 - r0;
                    let h1 = r2 - r1;
                    let d = (f2 - f1) / h1 * h0 / (h0 + h1) + (f1 - f0) / h0 * h1 / (h0 + h1);
                    let s = 2.0 * ((f2 - f1) / h1 - (f1 - f0) / h0) / (h0 + h1);
                    data[i] = [f1, d, s];
                }
                let mut pieces = Vec::with_capacity(n - 1);
                for i in 0..n - 1 {
                    let left = knots[i].0;
                    let len = knots[i + 1].0 - left;
                    if i == n - 2 {
                        pieces.push(QuinticPiece::hermite(
                            left,
                            len,
                            data[n - 1],
                            [data[i][0], -data[i][1], data[i][2]],
                            true,
                        ));
                    } else {
                        pieces.push(QuinticPiece::hermite(left, len, data[i], data[i + 1], false));
                    }
                }
                let sp = QuinticSpline { pieces };
                check_positive(&sp, knots[n - 1].0)?;
                *spline = Some(sp);
                Ok(())
            }
            Profile::Football { p } => {
                if *p < 1 {
                    return Err("cone order must be >= 1".into());
                }
                Ok(())
            }
            Profile::FlatCone { p, flat_extent, total_len } => {
                if *p < 1 {
                    return Err("cone order must be >= 1".into());
                }
                if !(*flat_extent > 0.0 && *flat_extent < *total_len) {
                    return Err("flat_cone: need 0 < flat_extent < total_len".into());
                }
                // cap must stay positive all the way to the south pole
                let cap = flat_cone_cap(*p, *flat_extent, *total_len);
                let n = 200;
                for i in 1..n {
                    let r = *flat_extent + (*total_len - *flat_extent) * i as f64 / n as f64;
                    if cap.eval(r).0 <= 0.0 {
                        return Err(format!("flat_cone cap not positive at r = {r:.4}"));
                    }
                }
                Ok(())
            }
            Profile::Spindle { p, q } => {
                if *p < 1 || *q < 1 {
                    return Err("cone orders must be >= 1".into());
                }
                Ok(())
            }
            Profile::Round => Ok(()),
        }
    }

    /// (f, f', f'') at radial coordinate r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match self {
            Profile::Round => (r.sin(), r.cos(), -r.sin()),
            Profile::Football { p } => {
                let pf = *p as f64;
                (r.sin() / pf, r.cos() / pf, -r.sin() / pf)
            }
            Profile::Spindle { p, q } => {
                let b = Self::blend_beta(*p, *q);
                let g = 1.0 / *p as f64 + b * (1.0 - r.cos());
                let g1 = b * r.sin();
                let g2 = b * r.cos();
                let (s, c) = (r.sin(), r.cos());
                (s * g, c * g + s * g1, -s * g + 2.0 * c * g1 + s * g2)
            }
            Profile::FlatCone { p, flat_extent, total_len } => {
                let pf = *p as f64;
                if r <= *flat_extent {
                    (r / pf, 1.0 / pf, 0.0)
                } else {
                    flat_cone_cap(*p, *flat_extent, *total_len).eval(r)
                }
            }
            Profile::FlatNeck { spline, .. } | Profile::Spline { spline, .. } => {
                spline.as_ref().expect("profile not prepared").eval(r)
            }
        }
    }

    /// Radial coordinate of the first interior critical point of f (f' = 0),
    /// located by sampling and bisection.
    pub fn waist_r(&self) -> Option<f64> {
        let len = self.total_len();
        let f1 = |r: f64| self.eval(r).1;
        let n = 400;
        let mut prev = f1(len / n as f64);
        for i in 2..n {
            let r = len * i as f64 / n as f64;
            let cur = f1(r);
            if prev > 0.0 && cur <= 0.0 {
                return Some(crate::num::bisect(len * (i - 1) as f64 / n as f64, r, 1e-13, f1));
            }
            prev = cur;
        }
        None
    }

    /// Stable cover excess near a pole: D(x) = order * f_pole(x) - x and D'(x),
    /// where x is the radial distance from the given pole.
    pub fn cover_excess(&self, pole: Pole, x: f64) -> (f64, f64) {
        let (p, q) = self.orders();
        match (self, pole) {
            (Profile::Round, _) | (Profile::Football { .. }, _) => {
                (sin_minus_x(x), cos_minus_1(x))
            }
            (Profile::Spindle { .. }, Pole::North) => {
                let b = Self::blend_beta(p, q) * p as f64;
                let (s, c) = (x.sin(), x.cos());
                let one_m_c = -cos_minus_1(x);
                (sin_minus_x(x) + b * s * one_m_c, cos_minus_1(x) + b * (c * one_m_c + s * s))
            }
            (Profile::Spindle { .. }, Pole::South) => {
                // q*f(L - x) - x = a (sin x - x) + b (sin 2x - 2x),
                // a = (1 + q/p)/2, b = (1 - q/p)/4, a + 2b = 1 exactly.
                let ratio = q as f64 / p as f64;
                let a = 0.5 * (1.0 + ratio);
                let b = 0.25 * (1.0 - ratio);
                (
                    a * sin_minus_x(x) + b * sin_minus_x(2.0 * x),
                    a * cos_minus_1(x) + 2.0 * b * cos_minus_1(2.0 * x),
                )
            }
            (Profile::FlatCone { flat_extent, .. }, Pole::North) if x <= *flat_extent => {
                (0.0, 0.0)
            }
            _ => {
                // pole-side quintic piece: exact polynomial (a0 = 0, a1 = 1/order, a2 = 0)
                let order = match pole {
                    Pole::North => p as f64,
                    Pole::South => q as f64,
                };
                let piece = self.pole_piece(pole);
                let c = &piece.coeffs;
                let d = order * x * x * x * (c[3] + x * (c[4] + x * c[5]));
                let d1 = order * x * x * (3.0 * c[3] + x * (4.0 * c[4] + x * 5.0 * c[5]));
                (d, d1)
            }
        }
    }

    fn pole_piece(&self, pole: Pole) -> QuinticPiece {
        match self {
            Profile::FlatCone { p, flat_extent, total_len } => match pole {
                Pole::North => QuinticPiece {
                    left: 0.0,
                    len: *flat_extent,
                    coeffs: [0.0, 1.0 / *p as f64, 0.0, 0.0, 0.0, 0.0],
                    mirrored: false,
                },
                Pole::South => flat_cone_cap(*p, *flat_extent, *total_len),
            },
            Profile::FlatNeck { spline, .. } | Profile::Spline { spline, .. } => {
                let sp = spline.as_ref().expect("profile not prepared");
                match pole {
                    Pole::North => sp.pieces.first().unwrap().clone(),
                    Pole::South => sp.pieces.last().unwrap().clone(),
                }
            }
            _ => unreachable!("analytic profiles handle cover_excess directly"),
        }
    }
}

/// Smooth closing cap of the flat cone, stored mirrored so the south-pole
/// coefficients are exact.
fn flat_cone_cap(p: u32, flat_extent: f64, total_len: f64) -> QuinticPiece {
    let pf = p as f64;
    QuinticPiece::hermite(
        flat_extent,
        total_len - flat_extent,
        [0.0, 1.0, 0.0],
        [flat_extent / pf, -1.0 / pf, 0.0],
        true,
    )
}

fn check_positive(sp: &QuinticSpline, total_len: f64) -> Result<(), String> {
    let n = 400;
    for i in 1..n {
        let r = total_len * i as f64 / n as f64;
        if sp.eval(r).0 <= 0.0 {
            return Err(format!("profile not positive at r = {r:.4}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_basics() {
        let p = Profile::Round;
        let (f, f1, f2) = p.eval(std::f64::consts::FRAC_PI_2);
        assert!((f - 1.0).abs() < 1e-15);
        assert!(f1.abs() < 1e-15);
        assert!((f2 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spindle_cone_slopes() {
        let p = Profile::Spindle { p: 3, q: 1 };
        let h = 1e-7;
        let (f0, d0, _) = p.eval(h);
        assert!((d0 - 1.0 / 3.0).abs() < 1e-6);
        assert!((f0 / h - 1.0 / 3.0).abs() < 1e-6);
        let l = p.total_len();
        let (_, dl, _) = p.eval(l - 1e-9);
        assert!((dl + 1.0).abs() < 1e-6);
    }

    #[test]
    fn spindle_cover_excess_matches_direct() {
        let prof = Profile::Spindle { p: 3, q: 2 };
        let (p, q) = prof.orders();
        let l = prof.total_len();
        for &x in &[0.3, 0.1, 0.02] {
            let (d, d1) = prof.cover_excess(Pole::North, x);
            let direct = p as f64 * prof.eval(x).0 - x;
            assert!((d - direct).abs() < 1e-12, "north x={x}: {d} vs {direct}");
            let h = 1e-6;
            let fd = (prof.cover_excess(Pole::North, x + h).0
                - prof.cover_excess(Pole::North, x - h).0)
                / (2.0 * h);
            assert!((d1 - fd).abs() < 1e-8);

            let (ds, _) = prof.cover_excess(Pole::South, x);
            let direct_s = q as f64 * prof.eval(l - x).0 - x;
            assert!((ds - direct_s).abs() < 1e-12, "south x={x}: {ds} vs {direct_s}");
        }
        // tiny x: relative structure D ~ c3 x^3 must survive
        let (d, _) = prof.cover_excess(Pole::North, 1e-5);
        assert!(d.abs() > 0.0 && d.abs() < 1e-13);
    }

    #[test]
    fn flat_neck_prepares_and_is_c2() {
        let mut prof = Profile::FlatNeck {
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
        };
        prof.prepare().unwrap();
        // continuity across piece boundaries
        for &r in &[1.0, 1.8, 4.8] {
            let a = prof.eval(r - 1e-9);
            let b = prof.eval(r + 1e-9);
            assert!((a.0 - b.0).abs() < 1e-7);
            assert!((a.1 - b.1).abs() < 1e-6);
            assert!((a.2 - b.2).abs() < 1e-4);
        }
        // neck exactly flat
        let (f, f1, f2) = prof.eval(3.0);
        assert_eq!(f, 0.6);
        assert_eq!(f1, 0.0);
        assert_eq!(f2, 0.0);
        // pole slopes
        assert!((prof.eval(1e-9).1 - 1.0 / 3.0).abs() < 1e-6);
        assert!((prof.eval(6.0 - 1e-9).1 + 0.5).abs() < 1e-5);
    }

    #[test]
    fn flat_cone_cap_positive() {
        let prof = Profile::FlatCone { p: 2, flat_extent: 2.0, total_len: 3.2 };
        for i in 1..200 {
            let r = 3.2 * i as f64 / 200.0;
            assert!(prof.eval(r).0 > 0.0, "f({r}) <= 0");
        }
        assert!((prof.eval(3.2 - 1e-9).1 + 1.0).abs() < 1e-6);
    }
}
