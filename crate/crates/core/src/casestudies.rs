//! Two concrete regimes as executable cases: the scaling symmetry of torus
//! solutions, and the `S¹ × S²` example where the interval length cannot be
//! prescribed.
//!
//! `S¹ × S²` is encoded with two summands of dimensions `(1, 2)`, `β = (0, 2μ_Q)`
//! and no `γ`. With `f_2(0) = f_2(1)` the first tangential equation forces
//! `f_2 ≡ f̄_2`; the remaining equations reduce to
//! `f_1'' + (μ_Q/f̄_2²) f_1 = 0` with `λ = μ_Q/f̄_2²`, and the trace constraint
//! then holds identically.

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, MetricPath, SpaceData};
use crate::scalar::Real;

/// Boundary data for the `S¹ × S²` example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S1S2Config<T = f64> {
    pub mu_q: T,
    /// Common boundary value `f_2(0) = f_2(1)`.
    pub f2_bar: T,
    pub f1_ends: (T, T),
    pub length: T,
}

impl<T: Real> S1S2Config<T> {
    pub fn new(mu_q: T, f2_bar: T, f1_ends: (T, T), length: T) -> Result<Self> {
        let cfg = Self {
            mu_q,
            f2_bar,
            f1_ends,
            length,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("mu_q", self.mu_q),
            ("f2_bar", self.f2_bar),
            ("f1_ends.0", self.f1_ends.0),
            ("f1_ends.1", self.f1_ends.1),
            ("length", self.length),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `k ℓ = ℓ √μ_Q / f̄_2`; a positive solution exists iff this is below `π`.
    pub fn phase(&self) -> T {
        self.length * self.mu_q.sqrt() / self.f2_bar
    }

    pub fn space(&self) -> Result<SpaceData<T>> {
        s1s2_space(self.mu_q)
    }

    pub fn boundary(&self) -> Result<BoundarySpec<T>> {
        BoundarySpec::new(vec![self.f1_ends.0, self.f2_bar], vec![self.f1_ends.1, self.f2_bar])
    }
}

/// Structure data of `S¹ × S²` with the `S²` factor of Ricci constant `μ_Q`.
pub fn s1s2_space<T: Real>(mu_q: T) -> Result<SpaceData<T>> {
    if !(mu_q > T::zero()) {
        return Err(Error::domain(format!("mu_q must be positive, got {mu_q}")));
    }
    SpaceData::without_gamma(vec![1, 2], vec![T::zero(), T::lit(2.0) * mu_q])
}

#[derive(Debug, Clone, PartialEq)]
pub enum S1S2Outcome<T = f64> {
    Solution(MetricPath<T>),
    /// No positive `f_1` joins the endpoints; `phase = k ℓ ≥ π`.
    NonExistence {
        phase: T,
    },
}

impl<T> S1S2Outcome<T> {
    pub fn exists(&self) -> bool {
        matches!(self, S1S2Outcome::Solution(_))
    }
}

/// Solves the reduced system explicitly. The path lives on `grid ⊂ [0, 1]`
/// with lapse `h = length`.
pub fn s1s2_solve<T: Real>(config: &S1S2Config<T>, grid: &[T]) -> Result<S1S2Outcome<T>> {
    config.validate()?;
    let phase = config.phase();
    if phase >= T::PI() {
        return Ok(S1S2Outcome::NonExistence { phase });
    }
    let (a, b) = config.f1_ends;
    let sin_p = phase.sin();
    let mut f1 = Vec::with_capacity(grid.len());
    let mut df1 = Vec::with_capacity(grid.len());
    let mut ddf1 = Vec::with_capacity(grid.len());
    for &r in grid {
        // x = ℓ r, k x = phase · r; derivatives taken in r.
        let (u, v) = (phase * (T::one() - r), phase * r);
        let f = (a * u.sin() + b * v.sin()) / sin_p;
        let df = phase * (-a * u.cos() + b * v.cos()) / sin_p;
        f1.push(f);
        df1.push(df);
        ddf1.push(-phase * phase * f);
    }
    let m = grid.len();
    let lambda = config.mu_q / (config.f2_bar * config.f2_bar);
    let path = MetricPath::new(
        lambda,
        config.length,
        grid.to_vec(),
        vec![f1, vec![config.f2_bar; m]],
        vec![df1, vec![T::zero(); m]],
        vec![ddf1, vec![T::zero(); m]],
    )?;
    Ok(S1S2Outcome::Solution(path))
}

/// Critical `f̄_2` below which no solution of length `length` exists
/// (equal `f_1` ends), located by bisection on [`s1s2_solve`] and checked
/// against `length · √μ_Q / π`.
pub fn nonexistence_threshold<T: Real>(mu_q: T, length: T) -> Result<T> {
    let probe = |f2: T| -> Result<bool> {
        let cfg = S1S2Config::new(mu_q, f2, (T::one(), T::one()), length)?;
        let grid = [T::zero(), T::lit(0.5), T::one()];
        Ok(s1s2_solve(&cfg, &grid)?.exists())
    };
    let two = T::lit(2.0);
    let mut hi = T::one();
    while !probe(hi)? {
        hi = hi * two;
    }
    let mut lo = hi;
    while probe(lo)? {
        lo = lo / two;
    }
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let analytic = length * mu_q.sqrt() / T::PI();
    if (hi - analytic).abs() > T::lit(1e-6) * analytic.max(T::one()) {
        return Err(Error::internal(format!(
            "bisected threshold {hi} disagrees with the analytic value {analytic}"
        )));
    }
    Ok(hi)
}

/// The torus symmetry `f̄(x) = f(q x)`, `λ̄ = q² λ`. On the unit parameter
/// interval this keeps every sample and divides the lapse by `q`.
pub fn rescale_solution<T: Real>(path: &MetricPath<T>, q: T) -> Result<MetricPath<T>> {
    if !(q > T::zero()) || !q.is_finite() {
        return Err(Error::domain(format!("scale factor must be positive, got {q}")));
    }
    let lambda = q * q * path.lambda();
    let lapse = path.lapse() / q;
    Ok(path.clone().with_lambda_and_lapse(lambda, lapse))
}
