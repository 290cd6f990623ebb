//! Exact solver for flat fibres (`G/H = T^d`).
//!
//! The Einstein constant is the unique root of the monotone function `m`
//! (see [`m_eval`]) against a target fixed by the boundary data; the metric
//! then follows from a closed-form branch of the trace system.

mod branch;

pub use branch::{build_branch, BranchTag, TraceBranch, BRANCH_TOLERANCE};

use log::debug;

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, MetricPath, SpaceData};
use crate::scalar::Real;

use branch::{neg_kernel_integral, neg_log_kappa_sq, pos_angles, pos_log_span};

/// Relative tolerance on the endpoint values produced by [`reconstruct`].
pub const ENDPOINT_TOLERANCE: f64 = 1e-8;

/// `[λ_min, λ_max)` for total log-ratio `total` on a `d`-torus.
pub fn lambda_interval<T: Real>(total: T, d: usize) -> (T, T) {
    let dd = T::from_usize_lossy(d);
    (-total * total / dd, T::PI() * T::PI() / dd)
}

/// The function `m(λ)` whose level set at [`target`] determines `λ`.
///
/// It vanishes at `λ = −D²/d`, equals `|D|` at `λ = 0` and diverges as
/// `λ → π²/d`.
pub fn m_eval<T: Real>(lambda: T, total: T, d: usize) -> Result<T> {
    if d < 2 {
        return Err(Error::domain("torus dimension must be at least 2"));
    }
    let (lo, hi) = lambda_interval(total, d);
    let slack = T::lit(4.0) * T::epsilon() * lo.abs();
    if !lambda.is_finite() || lambda < lo - slack || lambda >= hi {
        return Err(Error::domain(format!("lambda = {lambda} outside [{lo}, {hi})")));
    }
    let dd = T::from_usize_lossy(d);
    if lambda.abs() <= T::lit(BRANCH_TOLERANCE) {
        return Ok(total.abs());
    }
    if lambda < T::zero() {
        let s = (-dd * lambda).sqrt();
        // Rounding in `−D²/d` can leave `s` an ulp or two short of `|D|`,
        // where the square-root profile would otherwise turn it into ~1e-8.
        if s >= total.abs() * (T::one() - T::lit(4.0) * T::epsilon()) {
            return Ok(T::zero());
        }
        let theta = neg_log_kappa_sq(s, total) / (T::lit(2.0) * s);
        Ok(neg_kernel_integral(s, theta).abs())
    } else {
        let w = (dd * lambda).sqrt();
        let (phi, psi) = pos_angles(w, total);
        Ok(pos_log_span(phi, psi).abs())
    }
}

/// `√(d/(d−1) · Σ (D_i − D/d)²)`.
pub fn target<T: Real>(boundary: &BoundarySpec<T>) -> T {
    let d = T::from_usize_lossy(boundary.n());
    let mean = boundary.total_log_ratio() / d;
    let sq = boundary
        .log_ratio()
        .iter()
        .fold(T::zero(), |acc, &di| acc + (di - mean) * (di - mean));
    (d / (d - T::one()) * sq).sqrt()
}

fn check_torus<T: Real>(boundary: &BoundarySpec<T>, space: &SpaceData<T>) -> Result<usize> {
    if !space.is_torus() {
        return Err(Error::domain(
            "the torus solver needs a flat space (all d_i = 1, beta = gamma = 0)",
        ));
    }
    boundary.check_against(space)?;
    Ok(space.total_dim())
}

/// Solves `m(λ) = target` on the full admissible interval.
pub fn solve_lambda<T: Real>(boundary: &BoundarySpec<T>, space: &SpaceData<T>) -> Result<T> {
    let d = check_torus(boundary, space)?;
    let total = boundary.total_log_ratio();
    let (lo, _) = lambda_interval(total, d);
    let t = target(boundary);
    if t <= T::lit(1e-14) * (T::one() + total.abs()) {
        return Ok(lo);
    }
    let hi = if total.abs() >= t {
        T::zero()
    } else {
        upper_bracket(total, d, t)?
    };
    root_in(total, d, t, lo, hi)
}

/// Solves `m(λ) = target` starting from the bracket `[lo, hi]`, widening it
/// towards the ends of the admissible interval if it does not straddle the
/// root.
pub fn solve_lambda_from<T: Real>(boundary: &BoundarySpec<T>, space: &SpaceData<T>, bracket: (T, T)) -> Result<T> {
    let d = check_torus(boundary, space)?;
    let total = boundary.total_log_ratio();
    let (lmin, lmax) = lambda_interval(total, d);
    let t = target(boundary);
    if t <= T::lit(1e-14) * (T::one() + total.abs()) {
        return Ok(lmin);
    }
    let (mut lo, mut hi) = bracket;
    if !(lo <= hi) || lo < lmin || hi >= lmax {
        return Err(Error::domain(format!(
            "bracket [{lo}, {hi}] not inside [{lmin}, {lmax})"
        )));
    }
    let half = T::lit(0.5);
    for _ in 0..200 {
        if m_eval(lo, total, d)? <= t {
            break;
        }
        hi = lo;
        lo = if lo - lmin <= T::lit(1e-12) * (T::one() + lmin.abs()) {
            lmin
        } else {
            half * (lo + lmin)
        };
    }
    for _ in 0..200 {
        if m_eval(hi, total, d)? >= t {
            break;
        }
        lo = hi;
        hi = half * (hi + lmax);
    }
    let (mlo, mhi) = (m_eval(lo, total, d)?, m_eval(hi, total, d)?);
    if mlo > t || mhi < t {
        return Err(Error::internal(format!(
            "could not bracket m(lambda) = {t}: m({lo}) = {mlo}, m({hi}) = {mhi}"
        )));
    }
    root_in(total, d, t, lo, hi)
}

fn upper_bracket<T: Real>(total: T, d: usize, t: T) -> Result<T> {
    let (_, lmax) = lambda_interval(total, d);
    let mut gap = T::one();
    for _ in 0..120 {
        gap = gap * T::lit(0.5);
        let hi = lmax * (T::one() - gap);
        if hi >= lmax {
            break;
        }
        if m_eval(hi, total, d)? >= t {
            return Ok(hi);
        }
    }
    Err(Error::internal(format!(
        "m(lambda) stayed below target {t} up to the end of the admissible interval"
    )))
}

fn root_in<T: Real>(total: T, d: usize, t: T, mut lo: T, mut hi: T) -> Result<T> {
    let half = T::lit(0.5);
    let mut mlo = m_eval(lo, total, d)? - t;
    let mut mhi = m_eval(hi, total, d)? - t;
    // Bisect down to adjacent floats: near the bottom of the interval m has a
    // square-root profile and a bracket of a few ulps can still be too coarse.
    let mut exhausted = false;
    for _ in 0..2200 {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            exhausted = true;
            break;
        }
        let mm = m_eval(mid, total, d)? - t;
        if mm >= T::zero() {
            hi = mid;
            mhi = mm;
        } else {
            lo = mid;
            mlo = mm;
        }
    }
    let tol = T::lit(1e-12) * (T::one() + t);
    let (mut best, mut best_res) = if mlo.abs() <= mhi.abs() { (lo, mlo) } else { (hi, mhi) };
    // Secant steps kept inside the final bracket.
    let (mut x0, mut r0, mut x1, mut r1) = (lo, mlo, hi, mhi);
    for _ in 0..3 {
        if best_res.abs() <= tol || r1 == r0 {
            break;
        }
        let x = x1 - r1 * (x1 - x0) / (r1 - r0);
        if !(x >= lo && x <= hi) {
            break;
        }
        let r = m_eval(x, total, d)? - t;
        if r.abs() < best_res.abs() {
            best = x;
            best_res = r;
        }
        x0 = x1;
        r0 = r1;
        x1 = x;
        r1 = r;
    }
    debug!("torus lambda = {best}, |m - target| = {}", best_res.abs());
    if best_res.abs() > tol && !exhausted {
        return Err(Error::internal(format!(
            "root residual {} above {tol} at lambda = {best} (target {t})",
            best_res.abs()
        )));
    }
    Ok(best)
}

/// The Einstein constant together with the closed-form trace branch.
#[derive(Debug, Clone)]
pub struct TorusSolution<T = f64> {
    lambda: T,
    branch: TraceBranch<T>,
    boundary: BoundarySpec<T>,
}

impl<T: Real> TorusSolution<T> {
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn branch(&self) -> &TraceBranch<T> {
        &self.branch
    }

    pub fn boundary(&self) -> &BoundarySpec<T> {
        &self.boundary
    }
}

/// Solves the torus problem for `boundary`.
pub fn solve_torus<T: Real>(boundary: &BoundarySpec<T>, space: &SpaceData<T>) -> Result<TorusSolution<T>> {
    let lambda = solve_lambda(boundary, space)?;
    let branch = build_branch(lambda, boundary, space.total_dim())?;
    Ok(TorusSolution {
        lambda,
        branch,
        boundary: boundary.clone(),
    })
}

/// Samples `f_i = a_i exp(∫_0^r L_i)` and its first two derivatives on
/// `grid` (which must run from 0 to 1).
pub fn reconstruct<T: Real>(solution: &TorusSolution<T>, grid: &[T]) -> Result<MetricPath<T>> {
    let br = &solution.branch;
    let a = solution.boundary.a();
    let b = solution.boundary.b();
    let n = a.len();
    let mut f = vec![Vec::with_capacity(grid.len()); n];
    let mut f1 = vec![Vec::with_capacity(grid.len()); n];
    let mut f2 = vec![Vec::with_capacity(grid.len()); n];
    for &r in grid {
        for i in 0..n {
            let l = br.eval_l(i, r)?;
            let dl = br.dl_unchecked(i, r);
            let fi = a[i] * br.int_unchecked(i, r).exp();
            f[i].push(fi);
            f1[i].push(l * fi);
            f2[i].push((dl + l * l) * fi);
        }
    }
    for i in 0..n {
        let end = a[i] * br.int_unchecked(i, T::one()).exp();
        if (end - b[i]).abs() > T::lit(ENDPOINT_TOLERANCE) * b[i] {
            return Err(Error::internal(format!(
                "component {i} ends at {end}, expected {}",
                b[i]
            )));
        }
    }
    MetricPath::new(solution.lambda, T::one(), grid.to_vec(), f, f1, f2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(logs: &[f64]) -> (BoundarySpec, SpaceData) {
        let b = BoundarySpec::new(vec![1.0; logs.len()], logs.iter().map(|x| x.exp()).collect()).unwrap();
        (b, SpaceData::torus(logs.len()).unwrap())
    }

    #[test]
    fn m_special_values() {
        assert!((m_eval(0.0f64, 0.5, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m_eval(-0.125, 0.5, 2).unwrap(), 0.0);
        // Divergence at the top of the interval is logarithmic.
        let top = std::f64::consts::PI.powi(2) / 2.0;
        let mut prev = 0.0;
        for k in 2..12 {
            let lambda = top - 10f64.powi(-k);
            let m = m_eval(lambda, 0.0, 2).unwrap();
            let gap = std::f64::consts::PI - (2.0 * lambda).sqrt();
            assert!(m > prev);
            assert!((m + 2.0 * (gap / 4.0).tan().ln()).abs() < 1e-3);
            prev = m;
        }
        assert!(prev > 50.0);
        assert!(matches!(m_eval(5.0, 0.0, 2), Err(Error::Domain(_))));
        assert!(matches!(m_eval(-0.2, 0.5, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn trivial_boundaries() {
        let (b, s) = setup(&[0.0, 0.0]);
        assert_eq!(solve_lambda(&b, &s).unwrap(), 0.0);
        let (b, s) = setup(&[0.5, 0.5]);
        assert!((solve_lambda(&b, &s).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn positive_lambda_when_target_exceeds_total() {
        let (b, s) = setup(&[1.0, -0.5]);
        assert!((target(&b) - 1.5).abs() < 1e-14);
        let lambda = solve_lambda(&b, &s).unwrap();
        assert!(lambda > 0.0);
        assert!((m_eval(lambda, 0.5, 2).unwrap() - 1.5).abs() < 1e-12 * 2.5);
    }

    #[test]
    fn reconstruct_constant_offsets() {
        let b = BoundarySpec::new(vec![1.0, 1.0], vec![1f64.exp(), 1f64.exp()]).unwrap();
        let s = SpaceData::torus(2).unwrap();
        let sol = solve_torus(&b, &s).unwrap();
        assert!((sol.lambda() + 2.0).abs() < 1e-14);
        let path: MetricPath = reconstruct(&sol, &[0.0, 0.5, 1.0]).unwrap();
        assert!((path.values(0)[1] - 0.5f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn reconstruct_equal_ends() {
        let b = BoundarySpec::new(vec![2.0, 0.5], vec![2.0, 0.5]).unwrap();
        let s = SpaceData::torus(2).unwrap();
        let sol = solve_torus(&b, &s).unwrap();
        assert_eq!(sol.lambda(), 0.0);
        let path: MetricPath = reconstruct(&sol, &[0.0, 0.5, 1.0]).unwrap();
        assert!(path.values(1).iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_non_torus() {
        let b = BoundarySpec::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
        let s = SpaceData::without_gamma(vec![1, 2], vec![0.0, 1.0]).unwrap();
        assert!(matches!(solve_lambda(&b, &s), Err(Error::Domain(_))));
    }
}
