//! Numerical solver for general monotypic spaces.
//!
//! [`continuation_solve`] follows the homotopy `t: 0 → 1` of a discretised
//! fixed-point map built from the Green's function of `y'' = 0`, in the
//! variables `y_i = ln f_i`. [`shooting_solve`] is an independent engine on
//! the reduced initial value problem; it cross-checks continuation results
//! and polishes them to integrator accuracy.

mod continuation;
mod curvature;
mod discrete;
pub mod ode;
mod shooting;

pub use continuation::{continuation_solve, ContinuationOptions, GeneralSolution, StepRecord};
pub use curvature::{r_tilde, s_tilde, Y_LIMIT};
pub use discrete::{apply_h, DiscreteMap, HomotopyState, MIN_INTERVALS};
pub use shooting::{shoot, shooting_solve, shooting_solve_all, ShootingOptions};

/// Homotopy schedule `p_i(t)`, `i = 1..=4`: zero up to `(i−1)/4`, linear up
/// to `i/4`, then one.
///
/// # Panics
///
/// If `i` is not in `1..=4`.
pub fn p_schedule(i: usize, t: f64) -> f64 {
    assert!((1..=4).contains(&i), "schedule index {i} not in 1..=4");
    let k = (i - 1) as f64;
    if t <= k / 4.0 {
        0.0
    } else if t <= (k + 1.0) / 4.0 {
        4.0 * t - k
    } else {
        1.0
    }
}

/// Green's function of `y'' = 0` on `[0, 1]` with homogeneous Dirichlet data.
pub fn green_kernel(x: f64, r: f64) -> f64 {
    if x <= r {
        x * (r - 1.0)
    } else {
        (x - 1.0) * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert_eq!(p_schedule(2, 0.375), 0.5);
        assert_eq!(p_schedule(1, 0.0), 0.0);
        assert_eq!(p_schedule(4, 1.0), 1.0);
        assert_eq!(p_schedule(3, 0.8), 1.0);
        assert_eq!(p_schedule(3, 0.5), 0.0);
        assert_eq!(p_schedule(4, 0.875), 0.5);
    }

    #[test]
    fn green_values() {
        assert_eq!(green_kernel(0.25, 0.5), -0.125);
        assert_eq!(green_kernel(0.5, 0.25), -0.125);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(green_kernel(x, 0.0), 0.0);
            assert_eq!(green_kernel(x, 1.0), 0.0);
        }
    }
}
