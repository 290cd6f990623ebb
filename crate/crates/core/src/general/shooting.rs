//! Shooting on the reduced initial value problem.
//!
//! The unknowns are the initial slopes `y'(0)`; `λ` follows from the trace
//! constraint at `x = 0`, and `y'' = R̃(y) − y' Σ d_k y_k' − λ` is integrated
//! over `[0, ℓ]`. By the Bianchi identity the `rr` equation then holds along
//! the whole solution, which is checked rather than assumed.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::curvature::{r_tilde, s_tilde, Y_LIMIT};
use super::discrete::uniform_grid;
use super::ode::Dopri5;
use crate::error::{Error, Result};
use crate::geometry::{residual_report, BoundarySpec, MetricPath, SpaceData};

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Sup-norm tolerance on `y(ℓ) − ln b`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Number of initial guesses tried before giving up.
    pub starts: usize,
    pub seed: u64,
    /// Intervals of the output grid on `[0, 1]`.
    pub intervals: usize,
    /// Tolerance passed to the residual report of the result.
    pub residual_tol: f64,
    /// Largest accepted scaled Bianchi drift.
    pub drift_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            newton_tol: 1e-10,
            max_newton: 40,
            starts: 32,
            seed: 0x00c0_ffee,
            intervals: 256,
            residual_tol: 1e-8,
            drift_tol: 1e-6,
        }
    }
}

/// `λ` from the trace constraint for initial data `(y, v)` at unit lapse.
fn initial_lambda(space: &SpaceData, y: &[f64], v: &[f64]) -> f64 {
    let tr: f64 = (0..space.n()).map(|k| space.dim(k) * v[k]).sum();
    let deriv: f64 = (0..space.n()).map(|i| space.dim(i) * (-v[i] * tr + v[i] * v[i])).sum();
    (deriv + s_tilde(space, y)) / (space.total_dim() - 1) as f64
}

fn rhs(space: &SpaceData, lambda: f64, state: &[f64], out: &mut [f64]) {
    let n = space.n();
    let (y, v) = state.split_at(n);
    let tr: f64 = (0..n).map(|k| space.dim(k) * v[k]).sum();
    let rt = r_tilde(space, y);
    for i in 0..n {
        out[i] = v[i];
        out[n + i] = rt[i] - v[i] * tr - lambda;
    }
}

/// Integrates from `y(0) = y0`, `y'(0) = v0` and returns `(λ, states)` with
/// the state `(y, y')` at each of `stops`.
///
/// Fails with [`Error::BlowUp`] if some `|y_i|` exceeds 50 first.
pub fn shoot(
    space: &SpaceData,
    y0: &[f64],
    v0: &[f64],
    stops: &[f64],
    opts: &ShootingOptions,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = space.n();
    if y0.len() != n || v0.len() != n {
        return Err(Error::malformed(format!("initial data needs {n} components")));
    }
    let lambda = initial_lambda(space, y0, v0);
    if !lambda.is_finite() {
        return Err(Error::BlowUp { at: 0.0 });
    }
    let mut start = y0.to_vec();
    start.extend_from_slice(v0);
    let ode = Dopri5::new(opts.rtol, opts.atol);
    let states = ode.integrate(
        |_, s, ds| rhs(space, lambda, s, ds),
        0.0,
        &start,
        stops,
        Some((n, Y_LIMIT)),
    )?;
    Ok((lambda, states))
}

struct Problem<'a> {
    space: &'a SpaceData,
    c0: Vec<f64>,
    c1: Vec<f64>,
    length: f64,
    opts: &'a ShootingOptions,
}

impl Problem<'_> {
    fn mismatch(&self, v0: &[f64]) -> Option<Vec<f64>> {
        let (_, states) = shoot(self.space, &self.c0, v0, &[self.length], self.opts).ok()?;
        let end = &states[0];
        let g: Vec<f64> = (0..self.c1.len()).map(|i| end[i] - self.c1[i]).collect();
        g.iter().all(|v| v.is_finite()).then_some(g)
    }

    fn newton(&self, guess: &[f64]) -> Option<Vec<f64>> {
        let n = guess.len();
        let mut s = guess.to_vec();
        let mut g = self.mismatch(&s)?;
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..self.opts.max_newton {
            if norm(&g) <= self.opts.newton_tol {
                return Some(s);
            }
            let mut jac = DMatrix::zeros(n, n);
            for k in 0..n {
                let step = 1e-7 * (1.0 + s[k].abs());
                let mut sp = s.clone();
                sp[k] += step;
                let gp = self.mismatch(&sp)?;
                for i in 0..n {
                    jac[(i, k)] = (gp[i] - g[i]) / step;
                }
            }
            let dir = jac.lu().solve(&DVector::from_iterator(n, g.iter().map(|v| -v)))?;
            let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let base = l2(&g);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..20 {
                let trial: Vec<f64> = (0..n).map(|k| s[k] + alpha * dir[k]).collect();
                if let Some(gt) = self.mismatch(&trial) {
                    if l2(&gt) <= (1.0 - 1e-4 * alpha) * base {
                        accepted = Some((trial, gt));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let (trial, gt) = accepted?;
            s = trial;
            g = gt;
        }
        (norm(&g) <= self.opts.newton_tol).then_some(s)
    }

    fn guesses(&self, initial: &[f64]) -> Vec<Vec<f64>> {
        let n = initial.len();
        let linear: Vec<f64> = (0..n).map(|i| (self.c1[i] - self.c0[i]) / self.length).collect();
        let mut out = vec![initial.to_vec(), linear.clone()];
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let scales = [0.5, 1.0, 2.0, 4.0, 8.0];
        let mut k = 0;
        while out.len() < self.opts.starts.max(1) {
            let scale = scales[k % scales.len()] / self.length;
            let g = (0..n).map(|i| linear[i] + scale * rng.gen_range(-1.0..=1.0)).collect();
            out.push(g);
            k += 1;
        }
        out.truncate(self.opts.starts.max(1));
        out
    }

    fn build_path(&self, v0: &[f64]) -> Result<MetricPath> {
        let n = self.c0.len();
        let grid = uniform_grid(self.opts.intervals);
        let stops: Vec<f64> = grid.iter().map(|r| r * self.length).collect();
        let (lambda, states) = shoot(self.space, &self.c0, v0, &stops, self.opts)?;
        let l = self.length;
        let mut f = vec![Vec::with_capacity(grid.len()); n];
        let mut f1 = vec![Vec::with_capacity(grid.len()); n];
        let mut f2 = vec![Vec::with_capacity(grid.len()); n];
        let mut acc = vec![0.0; 2 * n];
        for st in &states {
            rhs(self.space, lambda, st, &mut acc);
            for i in 0..n {
                let fi = st[i].exp();
                let v = st[n + i];
                f[i].push(fi);
                f1[i].push(l * v * fi);
                f2[i].push(l * l * (acc[n + i] + v * v) * fi);
            }
        }
        MetricPath::new(lambda, l, grid, f, f1, f2)
    }

    fn finish(&self, v0: &[f64]) -> Result<MetricPath> {
        let path = self.build_path(v0)?;
        let report = residual_report(self.space, &path, self.opts.residual_tol)?;
        if !(report.max_drift <= self.opts.drift_tol) {
            return Err(Error::ResidualCheck(format!(
                "Bianchi drift {} above {} at length {}",
                report.max_drift, self.opts.drift_tol, self.length
            )));
        }
        Ok(path)
    }
}

fn problem<'a>(
    space: &'a SpaceData,
    boundary: &BoundarySpec,
    length: f64,
    initial_guess: &[f64],
    opts: &'a ShootingOptions,
) -> Result<Problem<'a>> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::domain(format!("length must be positive, got {length}")));
    }
    boundary.check_against(space)?;
    if initial_guess.len() != space.n() {
        return Err(Error::malformed(format!("initial guess needs {} slopes", space.n())));
    }
    Ok(Problem {
        space,
        c0: boundary.a().iter().map(|v| v.ln()).collect(),
        c1: boundary.b().iter().map(|v| v.ln()).collect(),
        length,
        opts,
    })
}

/// Solves the Dirichlet problem on `[0, length]` by shooting. The returned
/// path lives on `[0, 1]` with lapse `h = length`.
pub fn shooting_solve(
    space: &SpaceData,
    boundary: &BoundarySpec,
    length: f64,
    initial_guess: &[f64],
    opts: &ShootingOptions,
) -> Result<MetricPath> {
    let prob = problem(space, boundary, length, initial_guess, opts)?;
    let guesses = prob.guesses(initial_guess);
    let starts = guesses.len();
    for (k, g) in guesses.iter().enumerate() {
        if let Some(v0) = prob.newton(g) {
            match prob.finish(&v0) {
                Ok(path) => {
                    debug!("shooting converged from start {k} at length {length}");
                    return Ok(path);
                }
                Err(e) => debug!("start {k} converged but was rejected: {e}"),
            }
        }
    }
    Err(Error::NoSolutionAtLength { length, starts })
}

/// Runs every start and returns all distinct solutions found, sorted by `λ`.
pub fn shooting_solve_all(
    space: &SpaceData,
    boundary: &BoundarySpec,
    length: f64,
    initial_guess: &[f64],
    opts: &ShootingOptions,
) -> Result<Vec<MetricPath>> {
    let prob = problem(space, boundary, length, initial_guess, opts)?;
    let guesses = prob.guesses(initial_guess);
    let starts = guesses.len();
    let mut found: Vec<(Vec<f64>, MetricPath)> = Vec::new();
    for g in &guesses {
        let Some(v0) = prob.newton(g) else { continue };
        let dup = found
            .iter()
            .any(|(s, _)| s.iter().zip(&v0).all(|(a, b)| (a - b).abs() <= 1e-6 * (1.0 + a.abs())));
        if dup {
            continue;
        }
        if let Ok(path) = prob.finish(&v0) {
            found.push((v0, path));
        }
    }
    if found.is_empty() {
        return Err(Error::NoSolutionAtLength { length, starts });
    }
    let mut paths: Vec<MetricPath> = found.into_iter().map(|(_, p)| p).collect();
    paths.sort_by(|a, b| a.lambda().total_cmp(&b.lambda()));
    Ok(paths)
}
