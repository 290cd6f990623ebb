use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::curvature::Y_LIMIT;
use super::discrete::{DiscreteMap, HomotopyState};
use super::p_schedule;
use super::shooting::{shooting_solve, ShootingOptions};
use crate::error::{Error, Result};
use crate::geometry::{residual_report, BoundarySpec, MetricPath, ResidualReport, SpaceData};

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    /// Number of grid intervals `N`.
    pub intervals: usize,
    /// Newton stops once `‖z − H(z)‖∞ ≤ newton_tol · (1 + ‖z‖∞)`, or once a
    /// full step is that small while the residual is within `10³` of it.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Iterations a factorised Jacobian may be reused for.
    pub jacobian_reuse: usize,
    pub max_backtracks: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Bound on `|y_i|` for Newton iterates.
    pub trust_radius: f64,
    /// Re-solve the final state with the shooting engine, which lifts the
    /// result from grid accuracy to integrator accuracy.
    pub polish: bool,
    /// Width to which the largest solvable `q` is bracketed after a stall.
    pub q_resolution: f64,
    /// Shooting starts per bisection probe when refining `q`; zero keeps
    /// the stall value.
    pub refine_starts: usize,
    /// Tolerance of the final residual report.
    pub residual_tol: f64,
    pub shooting: ShootingOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            intervals: 256,
            newton_tol: 1e-12,
            max_newton: 15,
            jacobian_reuse: 5,
            max_backtracks: 20,
            initial_step: 1.0 / 32.0,
            max_step: 1.0 / 32.0,
            min_step: 1e-4,
            trust_radius: Y_LIMIT,
            polish: true,
            q_resolution: 1e-3,
            refine_starts: 4,
            residual_tol: 1e-8,
            shooting: ShootingOptions::default(),
        }
    }
}

/// One accepted continuation step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub lambda: f64,
    pub newton_iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct GeneralSolution {
    /// Einstein constant of `path`.
    pub lambda: f64,
    /// Interval factor; the metric has lapse `√q` on `[0, 1]`.
    pub q: f64,
    pub path: MetricPath,
    pub report: ResidualReport,
    /// `λ` of the discrete fixed point (rescaled to lapse `√q`) before any
    /// polishing.
    pub discrete_lambda: f64,
    /// Whether `path` comes from the shooting polish.
    pub polished: bool,
    pub diagnostics: Vec<StepRecord>,
}

struct Newton<'m, 'a> {
    map: &'m DiscreteMap<'a>,
    opts: &'m ContinuationOptions,
}

impl Newton<'_, '_> {
    fn inf(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn l2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn inside(&self, z: &[f64]) -> bool {
        z[1..].iter().all(|v| v.abs() <= self.opts.trust_radius) && z.iter().all(|v| v.is_finite())
    }

    /// Returns the converged unknowns, the iteration count and the final
    /// residual.
    fn solve(&self, t: f64, mut z: Vec<f64>) -> Option<(Vec<f64>, usize, f64)> {
        if !self.inside(&z) {
            return None;
        }
        let mut r = self.map.residual(t, &z);
        let mut lu = None;
        let mut age = usize::MAX;
        for it in 0..=self.opts.max_newton {
            let norm = Self::inf(&r);
            if norm <= self.opts.newton_tol * (1.0 + Self::inf(&z)) {
                return Some((z, it, norm));
            }
            if it == self.opts.max_newton {
                break;
            }
            let mut fresh = false;
            if lu.is_none() || age >= self.opts.jacobian_reuse {
                lu = Some(DMatrix::lu(self.map.jacobian(t, &z)));
                age = 0;
                fresh = true;
            }
            loop {
                let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
                let dz = lu.as_ref()?.solve(&rhs)?;
                let base = Self::l2(&r);
                let mut alpha = 1.0;
                let mut step = None;
                for _ in 0..=self.opts.max_backtracks {
                    let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a + alpha * b).collect();
                    if self.inside(&trial) {
                        let rt = self.map.residual(t, &trial);
                        if Self::l2(&rt) <= (1.0 - 1e-4 * alpha) * base {
                            step = Some((trial, rt, alpha));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                match step {
                    Some((trial, rt, alpha)) => {
                        let contraction = Self::l2(&rt) / base.max(f64::MIN_POSITIVE);
                        let moved = alpha * Self::inf(dz.as_slice());
                        z = trial;
                        r = rt;
                        // Near the rounding floor of the residual the step
                        // size is the reliable convergence signal.
                        let scale = self.opts.newton_tol * (1.0 + Self::inf(&z));
                        if alpha == 1.0 && moved <= scale && Self::inf(&r) <= 1e3 * scale {
                            return Some((z, it + 1, Self::inf(&r)));
                        }
                        age += 1;
                        if alpha < 1.0 || contraction > 0.5 {
                            age = usize::MAX;
                        }
                        break;
                    }
                    None if fresh => return None,
                    None => {
                        lu = Some(DMatrix::lu(self.map.jacobian(t, &z)));
                        age = 0;
                        fresh = true;
                    }
                }
            }
        }
        None
    }
}

fn next_breakpoint(t: f64) -> f64 {
    ((t * 4.0 + 1e-12).floor() + 1.0) / 4.0
}

/// Discrete path of the state at `t` with `q = p_4(t)`.
fn discrete_path(map: &DiscreteMap, state: &HomotopyState, q: f64) -> Result<MetricPath> {
    let dy = map.slopes(&state.y);
    let d2 = map.second_derivatives(state);
    let n = state.y.len();
    let mut f = vec![Vec::new(); n];
    let mut f1 = vec![Vec::new(); n];
    let mut f2 = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..state.grid().len() {
            let e = state.y[i][j].exp();
            f[i].push(e);
            f1[i].push(dy[i][j] * e);
            f2[i].push((d2[i][j] + dy[i][j] * dy[i][j]) * e);
        }
    }
    MetricPath::new(state.lambda / q, q.sqrt(), state.grid().to_vec(), f, f1, f2)
}

fn initial_slopes(map: &DiscreteMap, state: &HomotopyState, q: f64) -> Vec<f64> {
    map.slopes(&state.y).iter().map(|row| row[0] / q.sqrt()).collect()
}

/// Follows the homotopy from the trivial fixed point at `t = 0` towards
/// `t = 1`. A stall beyond `t = 3/4` yields a solution with `q = p_4(t)`.
pub fn continuation_solve(
    space: &SpaceData,
    boundary: &BoundarySpec,
    opts: &ContinuationOptions,
) -> Result<GeneralSolution> {
    let map = DiscreteMap::new(space, boundary, opts.intervals)?;
    let newton = Newton { map: &map, opts };
    let mut z = vec![0.0; map.unknowns()];
    let mut t = 0.0;
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut step = opts.initial_step.min(opts.max_step);
    let mut records = Vec::new();
    let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
    // The step only grows after two successes in a row.
    let mut calm = true;
    while t < 1.0 {
        let t_next = (t + step).min(next_breakpoint(t)).min(1.0);
        let predicted: Option<Vec<f64>> = match &prev {
            Some((tp, zp)) if t > *tp => {
                let s = (t_next - t) / (t - tp);
                Some(z.iter().zip(zp).map(|(a, b)| a + s * (a - b)).collect())
            }
            _ => None,
        };
        let attempt = match predicted {
            Some(p) => newton.solve(t_next, p).or_else(|| newton.solve(t_next, z.clone())),
            None => newton.solve(t_next, z.clone()),
        };
        match attempt {
            Some((zn, iters, res)) => {
                debug!("t = {t_next}: lambda = {}, {iters} Newton iterations", zn[0]);
                records.push(StepRecord {
                    t: t_next,
                    lambda: zn[0],
                    newton_iterations: iters,
                    residual: res,
                });
                prev = Some((t, std::mem::replace(&mut z, zn)));
                t = t_next;
                if t > 0.75 {
                    history.push((t, z.clone()));
                }
                if calm {
                    step = (step * 2.0).min(opts.max_step);
                }
                calm = true;
            }
            None => {
                calm = false;
                step *= 0.5;
                if step < opts.min_step {
                    break;
                }
            }
        }
    }
    if t <= 0.75 {
        return Err(Error::SolverFailure {
            t,
            step,
            reason: "continuation stalled before the curvature terms were switched on".into(),
        });
    }
    let q = p_schedule(4, t);
    if t < 1.0 {
        info!("continuation stalled at t = {t}; interval factor q = {q}");
    }
    let state = map.state(t, &z);
    let discrete = discrete_path(&map, &state, q)?;
    let discrete_lambda = discrete.lambda();

    let (path, q, polished) = if opts.polish {
        polish(space, boundary, &map, &history, opts)
            .map(|(p, q)| (p, q, true))
            .unwrap_or_else(|| {
                warn!("shooting polish failed; keeping the grid solution");
                (discrete, q, false)
            })
    } else {
        (discrete, q, false)
    };
    let report = residual_report(space, &path, opts.residual_tol)?;
    if !report.verdict.passed() {
        return Err(Error::ResidualCheck(format!(
            "solution at q = {q} fails the residual check: em2 {:e}, em3 {:e}, drift {:e} (tolerance {:e})",
            report.max_em2(),
            report.em3_residual,
            report.max_drift,
            opts.residual_tol
        )));
    }
    Ok(GeneralSolution {
        lambda: path.lambda(),
        q,
        path,
        report,
        discrete_lambda,
        polished,
        diagnostics: records,
    })
}

/// Shoots at length `√q` from the discrete slopes, walking back through the
/// accepted states if the final one fails. Below `q = 1` the largest
/// solvable `q` is then bracketed by bisection with warm-started shooting.
fn polish(
    space: &SpaceData,
    boundary: &BoundarySpec,
    map: &DiscreteMap,
    history: &[(f64, Vec<f64>)],
    opts: &ContinuationOptions,
) -> Option<(MetricPath, f64)> {
    let mut failed_q: Option<f64> = None;
    let mut ok: Option<(MetricPath, f64)> = None;
    for (t, z) in history.iter().rev() {
        let q = p_schedule(4, *t);
        let state = map.state(*t, z);
        let guess = initial_slopes(map, &state, q);
        if let Ok(path) = shooting_solve(space, boundary, q.sqrt(), &guess, &opts.shooting) {
            ok = Some((path, q));
            break;
        }
        failed_q.get_or_insert(q);
    }
    let (mut best, mut q_lo) = ok?;
    if q_lo >= 1.0 || opts.refine_starts == 0 {
        return Some((best, q_lo));
    }
    let refine = ShootingOptions {
        starts: opts.refine_starts,
        ..opts.shooting.clone()
    };
    let mut q_hi = failed_q.unwrap_or(1.0);
    while q_hi - q_lo > opts.q_resolution {
        let mid = if q_hi == 1.0 && failed_q.is_none() {
            1.0
        } else {
            0.5 * (q_lo + q_hi)
        };
        failed_q = Some(mid);
        let guess: Vec<f64> = (0..best.n())
            .map(|i| best.first_derivatives(i)[0] / best.values(i)[0] / mid.sqrt())
            .collect();
        match shooting_solve(space, boundary, mid.sqrt(), &guess, &refine) {
            Ok(path) => {
                debug!("shooting succeeds at q = {mid}");
                best = path;
                q_lo = mid;
            }
            Err(_) => q_hi = mid,
        }
    }
    Some((best, q_lo))
}
