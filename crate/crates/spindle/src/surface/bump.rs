//! Conformal perturbation u(r, theta): the metric is multiplied by e^{2u}.
//!
//! u is a sum of compactly supported terms
//!     A * W((r - r0)/sigma) * cos(k*theta - phase),
//! W(x) = (1 - x^2)^3, so u is C^2 and vanishes identically (bit-exact zero,
//! same code path as the unperturbed metric) outside the radial supports.
//! The constructor rejects supports that intrude into the pole guard zones.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpTerm {
    pub amplitude: f64,
    pub r_center: f64,
    pub r_sigma: f64,
    /// angular mode count; 0 gives a rotationally symmetric term
    pub mode: u32,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub terms: Vec<BumpTerm>,
}

/// Value and first/second partials of u at (r, theta).
#[derive(Debug, Clone, Copy, Default)]
pub struct BumpJet {
    pub u: f64,
    pub ur: f64,
    pub ut: f64,
    pub urr: f64,
    pub urt: f64,
    pub utt: f64,
}

impl Bump {
    pub fn validate(&self, r_guard: f64, total_len: f64) -> Result<(), String> {
        for t in &self.terms {
            if t.r_sigma <= 0.0 {
                return Err("bump r_sigma must be positive".into());
            }
            let lo = t.r_center - t.r_sigma;
            let hi = t.r_center + t.r_sigma;
            if lo < r_guard || hi > total_len - r_guard {
                return Err(format!(
                    "bump support [{lo:.3}, {hi:.3}] intrudes into the pole guard zones \
                     [0, {r_guard:.3}] / [{:.3}, {total_len:.3}]",
                    total_len - r_guard
                ));
            }
        }
        Ok(())
    }

    pub fn is_supported_at(&self, r: f64) -> bool {
        self.terms.iter().any(|t| (r - t.r_center).abs() < t.r_sigma)
    }

    pub fn jet(&self, r: f64, theta: f64) -> BumpJet {
        let mut j = BumpJet::default();
        for t in &self.terms {
            let x = (r - t.r_center) / t.r_sigma;
            if x.abs() >= 1.0 {
                continue;
            }
            let one = 1.0 - x * x;
            let w = one * one * one;
            let wx = -6.0 * x * one * one;
            let wxx = one * (24.0 * x * x - 6.0 * one);
            let (wr, wrr) = (wx / t.r_sigma, wxx / (t.r_sigma * t.r_sigma));
            let k = t.mode as f64;
            let arg = k * theta - t.phase;
            let (sa, ca) = arg.sin_cos();
            let a = t.amplitude;
            j.u += a * w * ca;
            j.ur += a * wr * ca;
            j.ut += -a * w * k * sa;
            j.urr += a * wrr * ca;
            j.urt += -a * wr * k * sa;
            j.utt += -a * w * k * k * ca;
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_term() -> Bump {
        Bump {
            terms: vec![BumpTerm {
                amplitude: 0.1,
                r_center: 1.5,
                r_sigma: 0.6,
                mode: 2,
                phase: 0.3,
            }],
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let b = one_term();
        let (r, th) = (1.3, 0.7);
        let h = 1e-5;
        let j = b.jet(r, th);
        let fd_r = (b.jet(r + h, th).u - b.jet(r - h, th).u) / (2.0 * h);
        let fd_t = (b.jet(r, th + h).u - b.jet(r, th - h).u) / (2.0 * h);
        let fd_rr = (b.jet(r + h, th).u - 2.0 * j.u + b.jet(r - h, th).u) / (h * h);
        let fd_tt = (b.jet(r, th + h).u - 2.0 * j.u + b.jet(r, th - h).u) / (h * h);
        let fd_rt =
            (b.jet(r + h, th + h).u - b.jet(r + h, th - h).u - b.jet(r - h, th + h).u
                + b.jet(r - h, th - h).u)
                / (4.0 * h * h);
        assert!((j.ur - fd_r).abs() < 1e-8);
        assert!((j.ut - fd_t).abs() < 1e-8);
        assert!((j.urr - fd_rr).abs() < 1e-5);
        assert!((j.utt - fd_tt).abs() < 1e-5);
        assert!((j.urt - fd_rt).abs() < 1e-6);
    }

    #[test]
    fn compact_support_is_exact_zero() {
        let b = one_term();
        let j = b.jet(2.2, 0.1);
        assert_eq!(j.u, 0.0);
        assert_eq!(j.urr, 0.0);
        assert!(!b.is_supported_at(2.11));
        assert!(b.is_supported_at(2.0));
    }

    #[test]
    fn guard_validation() {
        let b = one_term();
        assert!(b.validate(0.5, std::f64::consts::PI).is_ok());
        assert!(b.validate(1.0, std::f64::consts::PI).is_err());
    }
}
