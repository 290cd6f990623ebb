//! Structure data of the homogeneous fibre, boundary metrics, sampled metric
//! paths and the Ricci/Einstein residuals evaluated on them.
//!
//! A metric on `G/H × [0,1]` is `h² dr² + Σ f_i(r)² Q|m_i` with constant lapse
//! `h`. Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stencil::derivative_samples;

/// Default pass/fail threshold for residual verdicts.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Structure constants of a monotypic homogeneous space: module dimensions
/// `d_i`, the constants `β_i` and `γ^l_{ik}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceData<T = f64> {
    dims: Vec<usize>,
    beta: Vec<T>,
    /// Row-major `γ^l_{ik}` at `(i * n + k) * n + l`.
    gamma: Vec<T>,
    total_dim: usize,
}

impl<T: Real> SpaceData<T> {
    /// `gamma[i][k][l]` is `γ^l_{ik}` (all indices zero-based).
    pub fn new(dims: Vec<usize>, beta: Vec<T>, gamma: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let n = dims.len();
        if gamma.len() != n
            || gamma
                .iter()
                .any(|row| row.len() != n || row.iter().any(|col| col.len() != n))
        {
            return Err(Error::malformed(format!("gamma must be an {n}×{n}×{n} array")));
        }
        let flat = gamma.into_iter().flatten().flatten().collect();
        Self::from_flat(dims, beta, flat)
    }

    /// Space with `γ ≡ 0`.
    pub fn without_gamma(dims: Vec<usize>, beta: Vec<T>) -> Result<Self> {
        let n = dims.len();
        Self::from_flat(dims, beta, vec![T::zero(); n * n * n])
    }

    /// The flat torus `T^d`: `d` one-dimensional summands, `β = γ = 0`.
    pub fn torus(d: usize) -> Result<Self> {
        Self::without_gamma(vec![1; d], vec![T::zero(); d])
    }

    /// Builds `γ^l_{ik} = [ikl] / d_i` from fully symmetric bracket constants.
    /// Each entry `(i, k, l, v)` is applied to every permutation of `(i, k, l)`.
    pub fn from_brackets(dims: Vec<usize>, beta: Vec<T>, brackets: &[(usize, usize, usize, T)]) -> Result<Self> {
        let n = dims.len();
        let mut sym = vec![T::zero(); n * n * n];
        for &(i, k, l, v) in brackets {
            if i >= n || k >= n || l >= n {
                return Err(Error::malformed(format!("bracket index ({i},{k},{l}) out of range")));
            }
            let mut perms = vec![(i, k, l), (i, l, k), (k, i, l), (k, l, i), (l, i, k), (l, k, i)];
            perms.sort_unstable();
            perms.dedup();
            for (a, b, c) in perms {
                sym[(a * n + b) * n + c] = v;
            }
        }
        let mut gamma = sym;
        for i in 0..n {
            let di = T::from_usize_lossy(dims.get(i).copied().unwrap_or(1).max(1));
            for kl in 0..n * n {
                gamma[i * n * n + kl] = gamma[i * n * n + kl] / di;
            }
        }
        Self::from_flat(dims, beta, gamma)
    }

    fn from_flat(dims: Vec<usize>, beta: Vec<T>, gamma: Vec<T>) -> Result<Self> {
        let n = dims.len();
        if n == 0 {
            return Err(Error::malformed("at least one summand is required"));
        }
        if beta.len() != n {
            return Err(Error::malformed(format!(
                "beta has {} entries, expected {n}",
                beta.len()
            )));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::malformed(format!("module dimension d_{} must be >= 1", i + 1)));
        }
        let total_dim: usize = dims.iter().sum();
        if total_dim <= 1 {
            return Err(Error::malformed(
                "total dimension of the fibre must be strictly greater than 1",
            ));
        }
        if beta.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::malformed("structure constants must be finite"));
        }
        Ok(Self {
            dims,
            beta,
            gamma,
            total_dim,
        })
    }

    /// Checks `γ^l_{ik} = γ^k_{il}` to absolute tolerance `tol`.
    pub fn check_gamma_symmetry(&self, tol: T) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let (a, b) = (self.gamma(i, k, l), self.gamma(i, l, k));
                    if (a - b).abs() > tol {
                        return Err(Error::malformed(format!(
                            "gamma^{l}_{{{i}{k}}} = {a} differs from gamma^{k}_{{{i}{l}}} = {b}",
                            l = l + 1,
                            i = i + 1,
                            k = k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> T {
        T::from_usize_lossy(self.dims[i])
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    /// `γ^l_{ik}`.
    pub fn gamma(&self, i: usize, k: usize, l: usize) -> T {
        let n = self.n();
        self.gamma[(i * n + k) * n + l]
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma.iter().any(|g| !g.is_zero())
    }

    /// True for flat torus data: all `β`, all `γ` zero and all `d_i = 1`.
    pub fn is_torus(&self) -> bool {
        self.dims.iter().all(|&d| d == 1) && self.beta.iter().all(|b| b.is_zero()) && !self.has_gamma()
    }

    /// The algebraic (derivative-free) part of the tangential Ricci
    /// coefficient of summand `i`, together with the largest magnitude among
    /// its terms.
    pub(crate) fn curvature_term(&self, i: usize, f: &[T]) -> (T, T) {
        let n = self.n();
        let two = T::lit(2.0);
        let fi2 = f[i] * f[i];
        let beta_term = self.beta[i] / (two * fi2);
        let mut value = beta_term;
        let mut scale = beta_term.abs();
        let fi4 = fi2 * fi2;
        for k in 0..n {
            let fk2 = f[k] * f[k];
            let num = fi4 - two * fk2 * fk2;
            for l in 0..n {
                let g = self.gamma(i, k, l);
                if g.is_zero() {
                    continue;
                }
                let fl2 = f[l] * f[l];
                let term = g * num / (T::lit(4.0) * fi2 * fk2 * fl2);
                value = value + term;
                scale = scale.max(term.abs());
            }
        }
        (value, scale)
    }
}

/// The two boundary metrics `ĝ_0 = Σ a_i² Q|m_i`, `ĝ_1 = Σ b_i² Q|m_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySpec<T = f64> {
    a: Vec<T>,
    b: Vec<T>,
    log_ratio: Vec<T>,
    total_log_ratio: T,
}

impl<T: Real> BoundarySpec<T> {
    pub fn new(a: Vec<T>, b: Vec<T>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::malformed(
                "boundary arrays must be non-empty and of equal length",
            ));
        }
        if a.iter().chain(b.iter()).any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::domain("boundary coefficients must be positive"));
        }
        let log_ratio: Vec<T> = a.iter().zip(&b).map(|(&ai, &bi)| bi.ln() - ai.ln()).collect();
        let total_log_ratio = log_ratio.iter().fold(T::zero(), |s, &v| s + v);
        Ok(Self {
            a,
            b,
            log_ratio,
            total_log_ratio,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    /// `D_i = ln b_i − ln a_i`.
    pub fn log_ratio(&self) -> &[T] {
        &self.log_ratio
    }

    /// `D = Σ D_i`.
    pub fn total_log_ratio(&self) -> T {
        self.total_log_ratio
    }

    pub(crate) fn check_against(&self, space: &SpaceData<T>) -> Result<()> {
        if self.n() != space.n() {
            return Err(Error::malformed(format!(
                "boundary has {} components but the space has {} summands",
                self.n(),
                space.n()
            )));
        }
        Ok(())
    }
}

/// A sampled candidate metric: Einstein constant, lapse and the coefficient
/// functions with their first and second `r`-derivatives on a grid spanning
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricPath<T = f64> {
    lambda: T,
    lapse: T,
    grid: Vec<T>,
    f: Vec<Vec<T>>,
    f1: Vec<Vec<T>>,
    f2: Vec<Vec<T>>,
}

impl<T: Real> MetricPath<T> {
    /// `f[i][j]` is `f_i(grid[j])`; likewise for the derivative arrays.
    pub fn new(lambda: T, lapse: T, grid: Vec<T>, f: Vec<Vec<T>>, f1: Vec<Vec<T>>, f2: Vec<Vec<T>>) -> Result<Self> {
        if !(lapse > T::zero()) || !lapse.is_finite() {
            return Err(Error::domain(format!("lapse must be positive, got {lapse}")));
        }
        if !lambda.is_finite() {
            return Err(Error::domain("Einstein constant must be finite"));
        }
        if grid.len() < 2 {
            return Err(Error::malformed("grid needs at least two points"));
        }
        let tol = T::lit(1e-12);
        if grid[0].abs() > tol || (grid[grid.len() - 1] - T::one()).abs() > tol {
            return Err(Error::malformed("grid must start at 0 and end at 1"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::malformed("grid must be strictly increasing"));
        }
        let n = f.len();
        if n == 0 || f1.len() != n || f2.len() != n {
            return Err(Error::malformed("value and derivative arrays must have the same rows"));
        }
        let len = grid.len();
        for rows in [&f, &f1, &f2] {
            if rows.iter().any(|r| r.len() != len) {
                return Err(Error::malformed("every sample row must match the grid length"));
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::domain("samples must be finite"));
            }
        }
        if f.iter().flatten().any(|v| !(*v > T::zero())) {
            return Err(Error::domain("metric coefficients must be positive"));
        }
        Ok(Self {
            lambda,
            lapse,
            grid,
            f,
            f1,
            f2,
        })
    }

    /// Builds a path from values only; derivatives come from fourth-order
    /// finite differences.
    pub fn from_values(lambda: T, lapse: T, grid: Vec<T>, f: Vec<Vec<T>>) -> Result<Self> {
        let mut f1 = Vec::with_capacity(f.len());
        let mut f2 = Vec::with_capacity(f.len());
        for row in &f {
            let (d1, d2) = derivative_samples(&grid, row)?;
            f1.push(d1);
            f2.push(d2);
        }
        Self::new(lambda, lapse, grid, f, f1, f2)
    }

    /// Builds a path from values and first derivatives; second derivatives
    /// are finite differences of the first.
    pub fn from_values_and_slopes(lambda: T, lapse: T, grid: Vec<T>, f: Vec<Vec<T>>, f1: Vec<Vec<T>>) -> Result<Self> {
        let mut f2 = Vec::with_capacity(f1.len());
        for row in &f1 {
            let (d1, _) = derivative_samples(&grid, row)?;
            f2.push(d1);
        }
        Self::new(lambda, lapse, grid, f, f1, f2)
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn lapse(&self) -> T {
        self.lapse
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn values(&self, i: usize) -> &[T] {
        &self.f[i]
    }

    pub fn first_derivatives(&self, i: usize) -> &[T] {
        &self.f1[i]
    }

    pub fn second_derivatives(&self, i: usize) -> &[T] {
        &self.f2[i]
    }

    /// `(f, f', f'')` at grid index `j`, one entry per summand.
    pub fn sample(&self, j: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
        (
            self.f.iter().map(|r| r[j]).collect(),
            self.f1.iter().map(|r| r[j]).collect(),
            self.f2.iter().map(|r| r[j]).collect(),
        )
    }

    /// Largest relative endpoint mismatch `|f_i(0) − a_i| / a_i`, `|f_i(1) − b_i| / b_i`.
    pub fn endpoint_mismatch(&self, boundary: &BoundarySpec<T>) -> T {
        let last = self.len() - 1;
        (0..self.n().min(boundary.n())).fold(T::zero(), |m, i| {
            let e0 = (self.f[i][0] - boundary.a()[i]).abs() / boundary.a()[i];
            let e1 = (self.f[i][last] - boundary.b()[i]).abs() / boundary.b()[i];
            m.max(e0).max(e1)
        })
    }

    pub(crate) fn with_lambda_and_lapse(mut self, lambda: T, lapse: T) -> Self {
        self.lambda = lambda;
        self.lapse = lapse;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Residuals of a metric path against the reduced Einstein system.
///
/// Norms are scaled: each pointwise residual is divided by
/// `max(1, |λ|, largest term magnitude)` at that point, so they are absolute
/// for moderate metrics and relative where the curvature terms are large.
/// The unscaled sup-norms are kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport<T = f64> {
    /// Scaled sup-norm of the tangential equation residual, per summand.
    pub em2_norm: Vec<T>,
    /// Unscaled sup-norm of the tangential residual, per summand.
    pub em2_abs: Vec<T>,
    /// Scaled residual of the trace constraint at `r = 0`.
    pub em3_residual: T,
    /// `Ric(∂r, ∂r)/h² − λ` at each grid point (unscaled).
    pub bianchi_drift: Vec<T>,
    /// Scaled sup-norm of the drift profile.
    pub max_drift: T,
    pub tolerance: T,
    pub verdict: Verdict,
}

impl<T: Real> ResidualReport<T> {
    pub fn max_em2(&self) -> T {
        self.em2_norm.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    /// Largest of all recorded scaled norms.
    pub fn max_residual(&self) -> T {
        self.max_em2().max(self.em3_residual).max(self.max_drift)
    }
}

fn check_point<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T], f2: &[T], h: T) -> Result<()> {
    let n = space.n();
    if f.len() != n || f1.len() != n || f2.len() != n {
        return Err(Error::malformed(format!("expected {n} coefficients per sample")));
    }
    if let Some(k) = f.iter().position(|v| !(*v > T::zero())) {
        return Err(Error::domain(format!("f_{} must be positive, got {}", k + 1, f[k])));
    }
    if !(h > T::zero()) {
        return Err(Error::domain(format!("lapse must be positive, got {h}")));
    }
    Ok(())
}

/// `Σ_k d_k f_k'/f_k`.
fn log_trace<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T]) -> T {
    (0..space.n()).fold(T::zero(), |s, k| s + space.dim(k) * f1[k] / f[k])
}

/// Value and term scale of the tangential Ricci coefficient.
fn tangential_terms<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T], f2: &[T], h: T, i: usize) -> (T, T) {
    let h2 = h * h;
    let (curv, mut scale) = space.curvature_term(i, f);
    let li = f1[i] / f[i];
    let cross = -li * log_trace(space, f, f1) / h2;
    let square = li * li / h2;
    let second = -f2[i] / (f[i] * h2);
    for t in [cross, square, second] {
        scale = scale.max(t.abs());
    }
    (curv + cross + square + second, scale)
}

/// Ricci coefficient of summand `i` relative to the metric (constant lapse).
/// The index is zero-based.
pub fn tangential_ricci_coeff<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T], f2: &[T], h: T, i: usize) -> Result<T> {
    check_point(space, f, f1, f2, h)?;
    if i >= space.n() {
        return Err(Error::domain(format!("summand index {i} out of range")));
    }
    Ok(tangential_terms(space, f, f1, f2, h, i).0)
}

fn rr_terms<T: Real>(space: &SpaceData<T>, f: &[T], f2: &[T], h: T) -> (T, T) {
    let h2 = h * h;
    (0..space.n()).fold((T::zero(), T::zero()), |(v, s), k| {
        let t = -space.dim(k) * f2[k] / (f[k] * h2);
        (v + t, s.max(t.abs()))
    })
}

/// `Ric(∂r, ∂r) / h²` for constant lapse.
pub fn rr_ricci_coeff<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T], f2: &[T], h: T) -> Result<T> {
    check_point(space, f, f1, f2, h)?;
    Ok(rr_terms(space, f, f2, h).0)
}

fn em3_terms<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T], h: T) -> (T, T) {
    let h2 = h * h;
    let tr = log_trace(space, f, f1);
    let dm1 = T::from_usize_lossy(space.total_dim() - 1);
    let mut sum = T::zero();
    let mut scale = T::zero();
    for i in 0..space.n() {
        let (curv, s) = space.curvature_term(i, f);
        let li = f1[i] / f[i];
        let deriv = (-li * tr + li * li) / h2;
        let di = space.dim(i);
        sum = sum + di * (curv + deriv);
        scale = scale
            .max(di * s / dm1)
            .max((di * li * tr / h2 / dm1).abs())
            .max(di * li * li / h2 / dm1);
    }
    (sum / dm1, scale)
}

/// Einstein constant forced by the trace constraint at `r = 0` (unit lapse).
pub fn em3_lambda<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T]) -> Result<T> {
    let zeros = vec![T::zero(); space.n()];
    check_point(space, f, f1, &zeros, T::one())?;
    Ok(em3_terms(space, f, f1, T::one()).0)
}

/// Einstein constant forced by the trace constraint at `r = 0` for lapse `h`.
pub fn em3_lambda_with_lapse<T: Real>(space: &SpaceData<T>, f: &[T], f1: &[T], h: T) -> Result<T> {
    let zeros = vec![T::zero(); space.n()];
    check_point(space, f, f1, &zeros, h)?;
    Ok(em3_terms(space, f, f1, h).0)
}

/// Evaluates every residual of the reduced system on `path`.
pub fn residual_report<T: Real>(space: &SpaceData<T>, path: &MetricPath<T>, tol: T) -> Result<ResidualReport<T>> {
    if path.len() < 3 {
        return Err(Error::malformed(format!(
            "residual report needs at least 3 grid points, got {}",
            path.len()
        )));
    }
    if path.n() != space.n() {
        return Err(Error::malformed(format!(
            "path has {} coefficient functions but the space has {} summands",
            path.n(),
            space.n()
        )));
    }
    let n = space.n();
    let lambda = path.lambda();
    let h = path.lapse();
    let one = T::one();
    let mut em2_norm = vec![T::zero(); n];
    let mut em2_abs = vec![T::zero(); n];
    let mut drift = Vec::with_capacity(path.len());
    let mut max_drift = T::zero();
    let mut em3_residual = T::zero();
    for j in 0..path.len() {
        let (f, f1, f2) = path.sample(j);
        check_point(space, &f, &f1, &f2, h)?;
        for i in 0..n {
            let (value, scale) = tangential_terms(space, &f, &f1, &f2, h, i);
            let r = (value - lambda).abs();
            em2_abs[i] = em2_abs[i].max(r);
            em2_norm[i] = em2_norm[i].max(r / one.max(scale).max(lambda.abs()));
        }
        let (rr, rr_scale) = rr_terms(space, &f, &f2, h);
        let dr = rr - lambda;
        drift.push(dr);
        max_drift = max_drift.max(dr.abs() / one.max(rr_scale).max(lambda.abs()));
        if j == 0 {
            let (lam0, scale) = em3_terms(space, &f, &f1, h);
            em3_residual = (lam0 - lambda).abs() / one.max(scale).max(lambda.abs());
        }
    }
    let mut report = ResidualReport {
        em2_norm,
        em2_abs,
        em3_residual,
        bianchi_drift: drift,
        max_drift,
        tolerance: tol,
        verdict: Verdict::Fail,
    };
    let worst = report.max_residual();
    if worst <= tol && worst.is_finite() {
        report.verdict = Verdict::Pass;
    }
    Ok(report)
}
