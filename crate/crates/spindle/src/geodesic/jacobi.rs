//! Scalar Jacobi analysis along closed geodesics: conjugate points, Morse
//! index and nullity. Reflected arcs need no special handling because the
//! traced path already parametrizes the straight development in the cover,
//! so K(s) is smooth across cone events.

use serde::Serialize;

use crate::num::bisect;
use crate::num::ode::{integrate, OdeOpts};
use crate::surface::ConeSurface;

use super::solve::ClosedGeodesic;
use super::GeodesicError;

pub const TOL_NULL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct JacobiData {
    pub index: usize,
    pub nullity: usize,
    pub conjugate_parameters: Vec<f64>,
}

fn curvature_along<'a>(
    surface: &'a ConeSurface,
    c: &'a ClosedGeodesic,
) -> impl Fn(f64) -> f64 + 'a {
    move |s: f64| {
        let pt = c.eval(surface, s);
        surface.curvature_raw(pt.r, pt.theta)
    }
}

/// Index and nullity of the m-th iterate of a closed geodesic, from the
/// scalar Jacobi equation y'' + K(c(s)) y = 0.
pub fn jacobi_index(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    m: usize,
) -> Result<JacobiData, GeodesicError> {
    let k = curvature_along(surface, c);
    let span = m as f64 * c.length;
    let opts = OdeOpts { max_step: 0.05 * c.length, ..OdeOpts::default() };
    let rhs = |s: f64, y: &[f64; 2]| [y[1], -k(s) * y[0]];

    // conjugate points: zeros of the field with y(0)=0, y'(0)=1
    let dense = integrate(rhs, 0.0, span, [0.0, 1.0], &opts)?;
    let mut conj = Vec::new();
    let n = 400 * m;
    let field = |s: f64| dense.eval(s)[0];
    let mut prev_s = span * 1e-9;
    let mut prev = field(prev_s);
    for i in 1..=n {
        let s = span * 1e-9 + (span * (1.0 - 2e-9)) * i as f64 / n as f64;
        let cur = field(s);
        if (prev > 0.0) != (cur > 0.0) {
            conj.push(bisect(prev_s, s, 1e-12, field));
        }
        prev = cur;
        prev_s = s;
    }

    // nullity from the monodromy of the m-th iterate
    let y1 = integrate(rhs, 0.0, c.length, [1.0, 0.0], &opts)?.eval(c.length);
    let y2 = integrate(rhs, 0.0, c.length, [0.0, 1.0], &opts)?.eval(c.length);
    let mono = nalgebra::Matrix2::new(y1[0], y2[0], y1[1], y2[1]);
    let mut mm = nalgebra::Matrix2::identity();
    for _ in 0..m {
        mm = mono * mm;
    }
    let delta = mm - nalgebra::Matrix2::identity();
    let sv = delta.svd(false, false).singular_values;
    let nullity = sv.iter().filter(|&&s| s < TOL_NULL).count();

    Ok(JacobiData { index: conj.len(), nullity, conjugate_parameters: conj })
}

/// Whether the geodesic carries a pair of conjugate points within a horizon
/// of `m_max` periods, probing several base points.
pub fn has_conjugate_pair(
    surface: &ConeSurface,
    c: &ClosedGeodesic,
    m_max: usize,
) -> Result<bool, GeodesicError> {
    let k = curvature_along(surface, c);
    let opts = OdeOpts { max_step: 0.05 * c.length, ..OdeOpts::default() };
    let n_base = 4;
    for b in 0..n_base {
        let s0 = c.length * b as f64 / n_base as f64;
        let rhs = |s: f64, y: &[f64; 2]| [y[1], -k(s0 + s) * y[0]];
        let span = m_max as f64 * c.length;
        let dense = integrate(rhs, 0.0, span, [0.0, 1.0], &opts)?;
        let n = 400 * m_max;
        let mut prev = dense.eval(span * 1e-9)[0];
        for i in 1..=n {
            let s = span * 1e-9 + span * (1.0 - 1e-9) * i as f64 / n as f64;
            let cur = dense.eval(s)[0];
            if (prev > 0.0) != (cur > 0.0) {
                return Ok(true);
            }
            prev = cur;
        }
    }
    Ok(false)
}
