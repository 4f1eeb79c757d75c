//! Explicit adaptive Runge-Kutta 5(4) (Dormand-Prince) with dense output.
//!
//! The integrator is generic over the state dimension so the same code drives
//! the 4-dimensional geodesic equation and the 2-dimensional Jacobi equation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("adaptive step size fell below the minimum ({min_step:.3e}) at s = {s:.6}")]
    StepFailure { s: f64, min_step: f64 },
}

/// One accepted step together with the dense-output coefficients of the
/// standard DOPRI5 quartic interpolant.
#[derive(Debug, Clone)]
pub struct DenseSeg<const N: usize> {
    pub s0: f64,
    pub h: f64,
    pub r1: [f64; N],
    pub r2: [f64; N],
    pub r3: [f64; N],
    pub r4: [f64; N],
    pub r5: [f64; N],
}

impl<const N: usize> DenseSeg<N> {
    /// Evaluate the interpolant at `s` in [s0, s0 + h].
    pub fn eval(&self, s: f64) -> [f64; N] {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.r1[i]
                + th * (self.r2[i] + th1 * (self.r3[i] + th * (self.r4[i] + th1 * self.r5[i])));
        }
        y
    }

    pub fn end(&self) -> f64 {
        self.s0 + self.h
    }
}

/// Dense trajectory over an interval, queryable at arbitrary parameters.
#[derive(Debug, Clone, Default)]
pub struct DenseOutput<const N: usize> {
    pub segs: Vec<DenseSeg<N>>,
}

impl<const N: usize> DenseOutput<N> {
    pub fn s_start(&self) -> f64 {
        self.segs.first().map_or(0.0, |s| s.s0)
    }

    pub fn s_end(&self) -> f64 {
        self.segs.last().map_or(0.0, |s| s.end())
    }

    pub fn eval(&self, s: f64) -> [f64; N] {
        debug_assert!(!self.segs.is_empty());
        // binary search for the containing segment
        let segs = &self.segs;
        if s <= segs[0].s0 {
            return segs[0].eval(segs[0].s0.max(s.min(segs[0].end())));
        }
        let mut lo = 0usize;
        let mut hi = segs.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if segs[mid].end() < s {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        segs[lo].eval(s.clamp(segs[lo].s0, segs[lo].end()))
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for OdeOpts {
    fn default() -> Self {
        OdeOpts {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: 0.25,
            min_step: 1e-13,
        }
    }
}

/// Integrate dy/ds = f(s, y) from `s0` to `s1` (s1 > s0), recording dense output.
pub fn integrate<const N: usize>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> [f64; N],
    s0: f64,
    s1: f64,
    y0: [f64; N],
    opts: &OdeOpts,
) -> Result<DenseOutput<N>, OdeError> {
    let mut out = DenseOutput { segs: Vec::new() };
    let mut s = s0;
    let mut y = y0;
    let mut k1 = rhs(s, &y);
    let span = s1 - s0;
    let mut h = (0.01 * span).min(opts.max_step).max(opts.min_step);

    while s < s1 - 1e-14 * span.abs().max(1.0) {
        h = h.min(s1 - s);
        let mut y2 = [0.0; N];
        for i in 0..N {
            y2[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = rhs(s + h / 5.0, &y2);
        let mut y3 = [0.0; N];
        for i in 0..N {
            y3[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = rhs(s + 3.0 * h / 10.0, &y3);
        let mut y4 = [0.0; N];
        for i in 0..N {
            y4[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = rhs(s + 4.0 * h / 5.0, &y4);
        let mut y5 = [0.0; N];
        for i in 0..N {
            y5[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = rhs(s + 8.0 * h / 9.0, &y5);
        let mut y6 = [0.0; N];
        for i in 0..N {
            y6[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = rhs(s + h, &y6);
        let mut ynew = [0.0; N];
        for i in 0..N {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let k7 = rhs(s + h, &ynew);

        // error estimate
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / N as f64).sqrt();

        if err <= 1.0 {
            // accept; build dense coefficients
            let mut r1 = [0.0; N];
            let mut r2 = [0.0; N];
            let mut r3 = [0.0; N];
            let mut r4 = [0.0; N];
            let mut r5 = [0.0; N];
            for i in 0..N {
                let dy = ynew[i] - y[i];
                r1[i] = y[i];
                r2[i] = dy;
                r3[i] = h * k1[i] - dy;
                r4[i] = dy - h * k7[i] - r3[i];
                r5[i] = h
                    * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]);
            }
            out.segs.push(DenseSeg { s0: s, h, r1, r2, r3, r4, r5 });
            s += h;
            y = ynew;
            k1 = k7; // FSAL
        }

        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.max_step);
        if h < opts.min_step {
            return Err(OdeError::StepFailure { s, min_step: opts.min_step });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        // y'' = -y, period 2*pi
        let out = integrate(
            |_s, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            std::f64::consts::TAU,
            [1.0, 0.0],
            &OdeOpts::default(),
        )
        .unwrap();
        let y = out.eval(std::f64::consts::TAU);
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
        // dense output mid-interval
        let y = out.eval(std::f64::consts::PI / 2.0);
        assert!(y[0].abs() < 1e-8);
        assert!((y[1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn step_failure_surfaces() {
        // blow-up: y' = y^2, y(0)=1 blows up at s=1
        let res = integrate(|_s, y: &[f64; 1]| [y[0] * y[0]], 0.0, 2.0, [1.0], &OdeOpts::default());
        assert!(matches!(res, Err(OdeError::StepFailure { .. })));
    }
}
