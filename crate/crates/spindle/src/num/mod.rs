pub mod ode;

/// Wrap an angle into [0, 2*pi).
pub fn wrap_angle(t: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut t = t % two_pi;
    if t < 0.0 {
        t += two_pi;
    }
    t
}

/// Signed angular difference a - b wrapped into (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut d = (a - b) % std::f64::consts::TAU;
    if d > pi {
        d -= std::f64::consts::TAU;
    }
    if d <= -pi {
        d += std::f64::consts::TAU;
    }
    d
}

/// Bisection for a root of `f` on [a, b] assuming a sign change.
/// Returns the midpoint of the final bracket.
pub fn bisect(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa > 0.0) == (fm > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_diff() {
        assert!((wrap_angle(-0.1) - (std::f64::consts::TAU - 0.1)).abs() < 1e-15);
        assert!((angle_diff(0.1, std::f64::consts::TAU - 0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(1.0, 2.0, 1e-14, |x| x * x - 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
