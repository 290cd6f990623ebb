//! Scalar abstraction shared by the closed-form and residual code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point types the geometry and torus code can run on.
///
/// Tolerances in this crate are calibrated for `f64`; `f32` works for the
/// closed forms but most verdict thresholds are then out of reach.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of)
    /// every finite `f64`, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln |e^x - 1|` for `x != 0`, without overflow for large `|x|`.
pub(crate) fn ln_abs_expm1<T: Real>(x: T) -> T {
    if x > T::lit(30.0) {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().abs().ln()
    }
}

/// `ln |tanh(x / 2)|` for `x != 0`, accurate when the result is tiny.
pub(crate) fn ln_abs_tanh_half<T: Real>(x: T) -> T {
    let a = x.abs();
    let e = (-a).exp();
    let head = if a < T::one() {
        (-(-a).exp_m1()).ln()
    } else {
        (-e).ln_1p()
    };
    head - e.ln_1p()
}

/// `ln |sinh(x)|` for `x != 0`, without overflow for large `|x|`.
pub(crate) fn ln_abs_sinh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-(T::lit(-2.0) * a).exp_m1()).ln() - T::LN_2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_match_naive_forms_in_safe_range() {
        for &x in &[-3.0f64, -0.4, 0.01, 0.7, 2.5, 12.0] {
            assert!((ln_abs_expm1(x) - (x.exp() - 1.0).abs().ln()).abs() < 1e-12);
            assert!((ln_abs_tanh_half(x) - (x / 2.0).tanh().abs().ln()).abs() < 1e-12);
            assert!((ln_abs_sinh(x) - x.sinh().abs().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn helpers_stay_finite_far_out() {
        assert!((ln_abs_expm1(800.0f64) - 800.0).abs() < 1e-12);
        assert!((ln_abs_sinh(-900.0f64) - (900.0 - std::f64::consts::LN_2)).abs() < 1e-9);
        let t = ln_abs_tanh_half(60.0f64);
        assert!(t < 0.0 && t > -1e-25);
    }
}
