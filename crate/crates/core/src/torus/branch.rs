//! Closed-form solutions `L_i(r) = f_i'/f_i` of the trace system for a given
//! Einstein constant.
//!
//! Internally the negative branch is written with a pole parameter `θ ∉ [0,1]`
//! (`C_− = −e^{2√(dμ)θ}`), giving `tr L = s·coth(s(r−θ))`, and the positive
//! branch with the angles `φ = C_+ + π/2` and `ψ = π − φ − √(dλ)`. Both forms
//! are algebraically the textbook constants but never form `e^{2√(dμ)}` or
//! `tan(C_+)` near their poles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BoundarySpec;
use crate::quadrature::adaptive_simpson;
use crate::scalar::{ln_abs_expm1, ln_abs_sinh, ln_abs_tanh_half, Real};

/// Absolute tolerance used to classify the degenerate branches.
pub const BRANCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchTag {
    NegLambdaGeneric,
    NegLambdaStationary,
    ZeroLambdaNonzeroD,
    ZeroLambdaZeroD,
    PosLambda,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape<T> {
    /// `λ < 0`, `C_− < 0`: pole at `θ`, coefficients of `s / sinh(s(r−θ))`.
    NegPole {
        s: T,
        theta: T,
        coef: Vec<T>,
    },
    /// `λ = −D²/d` with `D > 0`, i.e. `C_− = 0`: coefficients of `s e^{−sr}`.
    NegFlat {
        s: T,
        coef: Vec<T>,
    },
    /// `√(dμ) = −D`: coefficients of `s e^{sr}`.
    Stationary {
        s: T,
        coef: Vec<T>,
    },
    ZeroNonzeroD {
        c0: T,
        coef: Vec<T>,
    },
    ZeroZeroD {
        log_ratio: Vec<T>,
    },
    /// `0 < dλ < π²`: `u(r) = φ + w r ∈ (0, π)`, coefficients of `1 / sin u`.
    Pos {
        w: T,
        phi: T,
        psi: T,
        coef: Vec<T>,
    },
}

/// One closed-form branch of the trace system together with its constants.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBranch<T = f64> {
    lambda: T,
    dim: usize,
    shape: Shape<T>,
}

impl<T: Real> TraceBranch<T> {
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> BranchTag {
        match self.shape {
            Shape::NegPole { .. } | Shape::NegFlat { .. } => BranchTag::NegLambdaGeneric,
            Shape::Stationary { .. } => BranchTag::NegLambdaStationary,
            Shape::ZeroNonzeroD { .. } => BranchTag::ZeroLambdaNonzeroD,
            Shape::ZeroZeroD { .. } => BranchTag::ZeroLambdaZeroD,
            Shape::Pos { .. } => BranchTag::PosLambda,
        }
    }

    /// `μ = −λ` on the negative branches.
    pub fn mu(&self) -> Option<T> {
        match self.shape {
            Shape::NegPole { .. } | Shape::NegFlat { .. } | Shape::Stationary { .. } => Some(-self.lambda),
            _ => None,
        }
    }

    /// `C_−`; may be `−∞` when the pole sits far to the right of the interval.
    pub fn c_minus(&self) -> Option<T> {
        match self.shape {
            Shape::NegPole { s, theta, .. } => Some(-(T::lit(2.0) * s * theta).exp()),
            Shape::NegFlat { .. } => Some(T::zero()),
            _ => None,
        }
    }

    pub fn c_zero(&self) -> Option<T> {
        match self.shape {
            Shape::ZeroNonzeroD { c0, .. } => Some(c0),
            _ => None,
        }
    }

    pub fn c_plus(&self) -> Option<T> {
        match self.shape {
            Shape::Pos { phi, .. } => Some(phi - T::FRAC_PI_2()),
            _ => None,
        }
    }

    /// Per-component constants in the textbook normalisation (`c_{−i}`,
    /// `c̃_{−i}`, `c_{0i}` or `c_{+i}`); empty on the `λ = 0, D = 0` branch.
    pub fn constants(&self) -> Vec<T> {
        match &self.shape {
            Shape::NegPole { s, theta, coef } => {
                let scale = T::lit(2.0) * (*s * *theta).exp();
                coef.iter().map(|&c| c * scale).collect()
            }
            Shape::NegFlat { coef, .. }
            | Shape::Stationary { coef, .. }
            | Shape::ZeroNonzeroD { coef, .. }
            | Shape::Pos { coef, .. } => coef.clone(),
            Shape::ZeroZeroD { .. } => Vec::new(),
        }
    }

    fn n(&self) -> usize {
        match &self.shape {
            Shape::NegPole { coef, .. }
            | Shape::NegFlat { coef, .. }
            | Shape::Stationary { coef, .. }
            | Shape::ZeroNonzeroD { coef, .. }
            | Shape::Pos { coef, .. } => coef.len(),
            Shape::ZeroZeroD { log_ratio } => log_ratio.len(),
        }
    }

    fn check(&self, i: usize, r: T) -> Result<()> {
        if i >= self.n() {
            return Err(Error::domain(format!("component index {i} out of range")));
        }
        if !(r >= T::zero() && r <= T::one()) {
            return Err(Error::domain(format!("r = {r} outside [0, 1]")));
        }
        Ok(())
    }

    /// `L_i(r)`.
    pub fn eval_l(&self, i: usize, r: T) -> Result<T> {
        self.check(i, r)?;
        Ok(self.l_unchecked(i, r))
    }

    /// `L_i'(r)` from the closed form.
    pub fn eval_dl(&self, i: usize, r: T) -> Result<T> {
        self.check(i, r)?;
        Ok(self.dl_unchecked(i, r))
    }

    /// `∫_0^r L_i` from the closed-form antiderivative.
    pub fn integral_l(&self, i: usize, r: T) -> Result<T> {
        self.check(i, r)?;
        Ok(self.int_unchecked(i, r))
    }

    /// `tr L(r)`.
    pub fn trace(&self, r: T) -> T {
        match &self.shape {
            Shape::NegPole { s, theta, .. } => *s / (*s * (r - *theta)).tanh(),
            Shape::NegFlat { s, .. } => *s,
            Shape::Stationary { s, .. } => -*s,
            Shape::ZeroNonzeroD { c0, .. } => T::one() / (*c0 + r),
            Shape::ZeroZeroD { log_ratio } => log_ratio.iter().fold(T::zero(), |a, &b| a + b),
            Shape::Pos { w, phi, psi, .. } => {
                let (sin_u, cos_u) = angle(*w, *phi, *psi, r);
                *w * cos_u / sin_u
            }
        }
    }

    pub(crate) fn l_unchecked(&self, i: usize, r: T) -> T {
        let d = T::from_usize_lossy(self.dim);
        match &self.shape {
            Shape::NegPole { s, theta, coef } => {
                let x = *s * (r - *theta);
                *s / x.tanh() / d + coef[i] * *s / x.sinh()
            }
            Shape::NegFlat { s, coef } => *s / d + coef[i] * *s * (-*s * r).exp(),
            Shape::Stationary { s, coef } => -*s / d + coef[i] * *s * (*s * r).exp(),
            Shape::ZeroNonzeroD { c0, coef } => (T::one() / d + coef[i]) / (*c0 + r),
            Shape::ZeroZeroD { log_ratio } => log_ratio[i],
            Shape::Pos { w, phi, psi, coef } => {
                let (sin_u, cos_u) = angle(*w, *phi, *psi, r);
                coef[i] / sin_u + *w * cos_u / sin_u / d
            }
        }
    }

    pub(crate) fn dl_unchecked(&self, i: usize, r: T) -> T {
        let d = T::from_usize_lossy(self.dim);
        match &self.shape {
            Shape::NegPole { s, theta, coef } => {
                let x = *s * (r - *theta);
                let k = *s / x.sinh();
                let tr = *s / x.tanh();
                -k * k / d - coef[i] * k * tr
            }
            Shape::NegFlat { s, coef } => -coef[i] * *s * *s * (-*s * r).exp(),
            Shape::Stationary { s, coef } => coef[i] * *s * *s * (*s * r).exp(),
            Shape::ZeroNonzeroD { c0, coef } => {
                let x = *c0 + r;
                -(T::one() / d + coef[i]) / (x * x)
            }
            Shape::ZeroZeroD { .. } => T::zero(),
            Shape::Pos { w, phi, psi, coef } => {
                let (sin_u, cos_u) = angle(*w, *phi, *psi, r);
                let k = T::one() / sin_u;
                let tr = *w * cos_u / sin_u;
                -(*w * k) * (*w * k) / d - coef[i] * k * tr
            }
        }
    }

    pub(crate) fn int_unchecked(&self, i: usize, r: T) -> T {
        let d = T::from_usize_lossy(self.dim);
        match &self.shape {
            Shape::NegPole { s, theta, coef } => {
                let x = *s * (r - *theta);
                let x0 = -*s * *theta;
                (ln_abs_sinh(x) - ln_abs_sinh(x0)) / d + coef[i] * (ln_abs_tanh_half(x) - ln_abs_tanh_half(x0))
            }
            Shape::NegFlat { s, coef } => *s * r / d - coef[i] * (-*s * r).exp_m1(),
            Shape::Stationary { s, coef } => -*s * r / d + coef[i] * (*s * r).exp_m1(),
            Shape::ZeroNonzeroD { c0, coef } => (T::one() / d + coef[i]) * (r / *c0).ln_1p(),
            Shape::ZeroZeroD { log_ratio } => log_ratio[i] * r,
            Shape::Pos { w, phi, psi, coef } => {
                let two = T::lit(2.0);
                let a = *phi + *w * r;
                let b = *psi + *w * (T::one() - r);
                let (ln_sin, ln_tan_half) = if a <= b {
                    (a.sin().ln(), (a / two).tan().ln())
                } else {
                    (b.sin().ln(), -(b / two).tan().ln())
                };
                (ln_sin - phi.sin().ln()) / d + coef[i] / *w * (ln_tan_half - (*phi / two).tan().ln())
            }
        }
    }
}

/// `(sin u, cos u)` for `u = φ + w r`, evaluated from whichever end of
/// `(0, π)` is closer so that small angles keep full relative precision.
fn angle<T: Real>(w: T, phi: T, psi: T, r: T) -> (T, T) {
    let a = phi + w * r;
    let b = psi + w * (T::one() - r);
    if a <= b {
        (a.sin(), a.cos())
    } else {
        (b.sin(), -b.cos())
    }
}

/// `ln κ² = 2sθ` where `C_− = −κ²`, from the textbook `C_−` rewritten with
/// `expm1`.
pub(crate) fn neg_log_kappa_sq<T: Real>(s: T, total: T) -> T {
    T::lit(2.0) * s + ln_abs_expm1(total - s) - ln_abs_expm1(total + s)
}

/// `∫_0^1 s / sinh(s(r − θ)) dr`.
pub(crate) fn neg_kernel_integral<T: Real>(s: T, theta: T) -> T {
    ln_abs_tanh_half(s * (T::one() - theta)) - ln_abs_tanh_half(-s * theta)
}

/// `φ = C_+ + π/2` and its mirror `ψ = π − φ − w`.
pub(crate) fn pos_angles<T: Real>(w: T, total: T) -> (T, T) {
    let (sw, cw) = (w.sin(), w.cos());
    let phi = sw.atan2(total.exp() - cw);
    let psi = sw.atan2((-total).exp() - cw);
    (phi, psi)
}

/// `[ln(tan + sec)(C_+ + w r)]_{r=0}^{r=1}` expressed through `φ, ψ`.
pub(crate) fn pos_log_span<T: Real>(phi: T, psi: T) -> T {
    let two = T::lit(2.0);
    -(psi / two).tan().ln() - (phi / two).tan().ln()
}

/// Selects and builds the branch of the trace system for `lambda`.
pub fn build_branch<T: Real>(lambda: T, boundary: &BoundarySpec<T>, d: usize) -> Result<TraceBranch<T>> {
    if boundary.n() != d {
        return Err(Error::malformed(format!(
            "torus of dimension {d} needs {d} boundary components, got {}",
            boundary.n()
        )));
    }
    if d < 2 {
        return Err(Error::domain("torus dimension must be at least 2"));
    }
    let tol = T::lit(BRANCH_TOLERANCE);
    let dd = T::from_usize_lossy(d);
    let total = boundary.total_log_ratio();
    let pi = T::PI();
    let lo = -total * total / dd;
    let hi = pi * pi / dd;
    if !lambda.is_finite() || lambda >= hi || lambda < lo - tol {
        return Err(Error::domain(format!("lambda = {lambda} outside [{lo}, {hi})")));
    }
    let branch = build_raw(lambda, boundary, d)?;
    // Near a classification boundary the neighbouring closed form must agree.
    let near_zero = lambda != T::zero() && lambda.abs() <= tol;
    let near_stationary =
        matches!(branch.tag(), BranchTag::NegLambdaStationary) && (-dd * lambda).sqrt() + total != T::zero();
    if near_zero || near_stationary {
        if let Ok(other) = build_forced(lambda, boundary, d) {
            compare_branches(&branch, &other)?;
        }
    }
    Ok(branch)
}

fn deviations<T: Real>(boundary: &BoundarySpec<T>, d: usize) -> Vec<T> {
    let mean = boundary.total_log_ratio() / T::from_usize_lossy(d);
    boundary.log_ratio().iter().map(|&di| di - mean).collect()
}

fn build_raw<T: Real>(lambda: T, boundary: &BoundarySpec<T>, d: usize) -> Result<TraceBranch<T>> {
    let tol = T::lit(BRANCH_TOLERANCE);
    let dd = T::from_usize_lossy(d);
    let total = boundary.total_log_ratio();
    let dev = deviations(boundary, d);
    let shape = if lambda.abs() <= tol {
        if total.abs() <= tol {
            Shape::ZeroZeroD {
                log_ratio: boundary.log_ratio().to_vec(),
            }
        } else {
            zero_nonzero(total, &dev)
        }
    } else if lambda < T::zero() {
        let s = (-dd * lambda).sqrt();
        if (s + total).abs() <= tol {
            stationary(s, &dev)
        } else if total > T::zero() && s >= total - tol {
            neg_flat(s, &dev)
        } else {
            neg_pole(s, total, &dev)?
        }
    } else {
        pos(lambda, dd, total, &dev)?
    };
    Ok(TraceBranch { lambda, dim: d, shape })
}

/// The generic closed form for the sign of `lambda`, ignoring the
/// degenerate-case classification.
fn build_forced<T: Real>(lambda: T, boundary: &BoundarySpec<T>, d: usize) -> Result<TraceBranch<T>> {
    let dd = T::from_usize_lossy(d);
    let total = boundary.total_log_ratio();
    let dev = deviations(boundary, d);
    let shape = if lambda < T::zero() {
        neg_pole((-dd * lambda).sqrt(), total, &dev)?
    } else if lambda > T::zero() {
        pos(lambda, dd, total, &dev)?
    } else {
        return Err(Error::internal("no neighbouring branch at lambda = 0"));
    };
    Ok(TraceBranch { lambda, dim: d, shape })
}

fn compare_branches<T: Real>(a: &TraceBranch<T>, b: &TraceBranch<T>) -> Result<()> {
    let tol = T::lit(1e-6);
    for i in 0..a.n() {
        for r in [T::zero(), T::lit(0.5), T::one()] {
            let (x, y) = (a.l_unchecked(i, r), b.l_unchecked(i, r));
            if !y.is_finite() {
                continue;
            }
            if (x - y).abs() > tol * (T::one() + x.abs()) {
                return Err(Error::internal(format!(
                    "adjacent branches {:?} and {:?} disagree at r = {r}: {x} vs {y}",
                    a.tag(),
                    b.tag()
                )));
            }
        }
    }
    Ok(())
}

fn zero_nonzero<T: Real>(total: T, dev: &[T]) -> Shape<T> {
    let c0 = T::one() / total.exp_m1();
    Shape::ZeroNonzeroD {
        c0,
        coef: dev.iter().map(|&v| v / total).collect(),
    }
}

fn stationary<T: Real>(s: T, dev: &[T]) -> Shape<T> {
    let denom = s.exp_m1();
    Shape::Stationary {
        s,
        coef: dev.iter().map(|&v| v / denom).collect(),
    }
}

fn neg_flat<T: Real>(s: T, dev: &[T]) -> Shape<T> {
    let denom = -(-s).exp_m1();
    Shape::NegFlat {
        s,
        coef: dev.iter().map(|&v| v / denom).collect(),
    }
}

fn neg_pole<T: Real>(s: T, total: T, dev: &[T]) -> Result<Shape<T>> {
    let theta = neg_log_kappa_sq(s, total) / (T::lit(2.0) * s);
    if !theta.is_finite() || (theta >= T::zero() && theta <= T::one()) {
        return Err(Error::internal(format!(
            "C_- lies in the forbidden interval (pole parameter theta = {theta})"
        )));
    }
    let j = neg_kernel_integral(s, theta);
    cross_check_kernel(s, theta, j)?;
    Ok(Shape::NegPole {
        s,
        theta,
        coef: dev.iter().map(|&v| v / j).collect(),
    })
}

/// Confirms the `ln|tanh|` closed form of the kernel integral by quadrature.
fn cross_check_kernel<T: Real>(s: T, theta: T, closed: T) -> Result<()> {
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    let quad = adaptive_simpson(
        |r: T| s / (s * (r - theta)).sinh(),
        T::zero(),
        T::one(),
        tol * T::lit(0.1),
    )?;
    if (quad - closed).abs() > tol * (T::one() + closed.abs()) {
        return Err(Error::internal(format!(
            "kernel integral closed form {closed} disagrees with quadrature {quad}"
        )));
    }
    Ok(())
}

fn pos<T: Real>(lambda: T, dd: T, total: T, dev: &[T]) -> Result<Shape<T>> {
    let w = (dd * lambda).sqrt();
    if !(w < T::PI()) {
        return Err(Error::domain(format!("d*lambda = {} must be below pi^2", w * w)));
    }
    let (phi, psi) = pos_angles(w, total);
    if !(phi >= T::zero() && phi <= T::PI()) {
        return Err(Error::internal(format!(
            "C_+ = {} outside [-pi/2, pi/2]",
            phi - T::FRAC_PI_2()
        )));
    }
    let span = pos_log_span(phi, psi);
    Ok(Shape::Pos {
        w,
        phi,
        psi,
        coef: dev.iter().map(|&v| w * v / span).collect(),
    })
}
