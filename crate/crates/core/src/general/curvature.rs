use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;

use crate::geometry::SpaceData;
use crate::scalar::Real;

/// Log-coefficients are clamped to `[−Y_LIMIT, Y_LIMIT]` before
/// exponentiation.
pub const Y_LIMIT: f64 = 50.0;

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

fn exp_clamped<T: Real>(y: &[T]) -> Vec<T> {
    let limit = T::lit(Y_LIMIT);
    y.iter()
        .map(|&v| {
            if v.abs() > limit && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                warn!("log-coefficient {v} clamped to +-{Y_LIMIT}");
            }
            v.max(-limit).min(limit).exp()
        })
        .collect()
}

/// `R̃_i(y)`: the algebraic part of the tangential Ricci coefficients at
/// `f = e^y`.
pub fn r_tilde<T: Real>(space: &SpaceData<T>, y: &[T]) -> Vec<T> {
    let f = exp_clamped(y);
    (0..space.n()).map(|i| space.curvature_term(i, &f).0).collect()
}

/// `S̃(y) = Σ d_i R̃_i(y)`.
pub fn s_tilde<T: Real>(space: &SpaceData<T>, y: &[T]) -> T {
    r_tilde(space, y)
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &r)| acc + space.dim(i) * r)
}
