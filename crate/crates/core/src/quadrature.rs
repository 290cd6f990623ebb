//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_DEPTH: usize = 60;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by adaptive Simpson
/// with Richardson correction.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let (value, ok) = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if !value.is_finite() {
        return Err(Error::internal("quadrature produced a non-finite value"));
    }
    if !ok {
        return Err(Error::internal(format!(
            "adaptive Simpson did not reach tolerance {tol} on [{a}, {b}]"
        )));
    }
    Ok(value)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: usize,
) -> (T, bool) {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let floor = T::epsilon() * T::lit(16.0) * (left.abs() + right.abs());
    if delta.abs() <= T::lit(15.0) * tol.max(floor) {
        return (left + right + delta / T::lit(15.0), true);
    }
    if depth == 0 || m <= a || m >= b {
        return (left + right + delta / T::lit(15.0), false);
    }
    let (l, okl) = recurse(f, a, m, fa, flm, fm, left, tol / two, depth - 1);
    let (r, okr) = recurse(f, m, b, fm, frm, fb, right, tol / two, depth - 1);
    (l + r, okl && okr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_transcendental() {
        let v = adaptive_simpson(|x: f64| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-13);
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn near_singular_log_integrand() {
        let eps = 1e-12;
        let v = adaptive_simpson(|x: f64| 1.0 / (x + eps), 0.0, 1.0, 1e-10).unwrap();
        let exact = ((1.0 + eps) / eps).ln();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }
}
