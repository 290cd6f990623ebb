//! Solver dispatch.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dirichlet_einstein::casestudies::{s1s2_solve, S1S2Outcome};
use dirichlet_einstein::general::{
    continuation_solve, shooting_solve, ContinuationOptions, ShootingOptions, StepRecord,
};
use dirichlet_einstein::torus::{lambda_interval, m_eval, reconstruct, solve_torus};
use dirichlet_einstein::{residual_report, S1S2Config};

use crate::config::{Engine, ProblemConfig};
use crate::error::CliError;
use crate::record::ResultRecord;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "DIRICHLET_EINSTEIN_OUTPUT_DIR";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: ResultRecord,
    /// Continuation steps; empty for the other engines.
    pub diagnostics: Vec<StepRecord>,
}

pub fn uniform_grid(intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|j| j as f64 / intervals as f64).collect()
}

/// Solves a validated problem. A record is returned even when its residual
/// verdict is a failure; callers decide the exit status.
pub fn run(config: &ProblemConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let space = config.space()?;
    let boundary = config.boundary()?;
    let s = &config.solver;
    let (a, b) = (boundary.a(), boundary.b());
    let shooting = ShootingOptions {
        newton_tol: s.shooting_tol,
        starts: s.starts,
        seed: s.seed,
        intervals: s.intervals,
        residual_tol: s.residual_tol,
        ..ShootingOptions::default()
    };
    match s.engine {
        Engine::Torus => {
            let sol = solve_torus(&boundary, &space)?;
            let path = reconstruct(&sol, &uniform_grid(s.intervals))?;
            let report = residual_report(&space, &path, s.residual_tol)?;
            Ok(RunOutput {
                record: ResultRecord::new("torus", 1.0, a, b, &path, &report),
                diagnostics: vec![],
            })
        }
        Engine::Continuation => {
            let opts = ContinuationOptions {
                intervals: s.intervals,
                newton_tol: s.newton_tol,
                polish: s.polish,
                residual_tol: s.residual_tol,
                shooting,
                ..ContinuationOptions::default()
            };
            let sol = continuation_solve(&space, &boundary, &opts)?;
            let record = ResultRecord::new("continuation", sol.q, a, b, &sol.path, &sol.report);
            Ok(RunOutput {
                record,
                diagnostics: sol.diagnostics,
            })
        }
        Engine::Shooting => {
            let guess = s.initial_slopes.clone().unwrap_or_else(|| vec![0.0; space.n()]);
            let path = shooting_solve(&space, &boundary, s.length, &guess, &shooting)?;
            let report = residual_report(&space, &path, s.residual_tol)?;
            let q = s.length * s.length;
            Ok(RunOutput {
                record: ResultRecord::new("shooting", q, a, b, &path, &report),
                diagnostics: vec![],
            })
        }
    }
}

/// Closed-form `S¹ × S²` solution on a uniform grid.
pub fn run_s1s2(config: &S1S2Config, intervals: usize, tol: f64) -> Result<ResultRecord, CliError> {
    match s1s2_solve(config, &uniform_grid(intervals))? {
        S1S2Outcome::NonExistence { phase } => Err(CliError::NonExistence { phase }),
        S1S2Outcome::Solution(path) => {
            let report = residual_report(&config.space()?, &path, tol)?;
            let boundary = config.boundary()?;
            let q = config.length * config.length;
            Ok(ResultRecord::new("s1s2", q, boundary.a(), boundary.b(), &path, &report))
        }
    }
}

/// `samples` equally spaced points of `m` on `[−D²/d, π²/d)`.
pub fn trace_m(total: f64, d: usize, samples: usize) -> Result<Vec<(f64, f64)>, CliError> {
    if samples == 0 {
        return Err(CliError::Usage("need at least one sample".into()));
    }
    let (lo, hi) = lambda_interval(total, d);
    (0..samples)
        .map(|k| {
            let lam = lo + (hi - lo) * k as f64 / samples as f64;
            Ok((lam, m_eval(lam, total, d)?))
        })
        .collect()
}

/// Writes continuation steps as JSON lines.
pub fn write_diagnostics(path: &Path, steps: &[StepRecord]) -> Result<(), CliError> {
    let mut out = BufWriter::new(fs::File::create(path).map_err(|e| CliError::io(path, e))?);
    for s in steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Output directory: explicit flag, then the environment, then the config.
pub fn output_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    configured.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn torus_record_has_unit_q() {
        let cfg = parse_config(
            "[space]\ndims = [1, 1]\n[boundary]\na = [1.0, 1.0]\nb = [2.718281828459045, 1.0]\n[solver]\nengine = \"torus\"\nintervals = 32\n",
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.record.q, 1.0);
        assert_eq!(out.record.samples.len(), 33);
        assert!(out.record.residual.verdict.passed());
        assert!(out.record.samples.iter().all(|s| s.f.iter().all(|&v| v > 0.0)));
    }

    #[test]
    fn trace_covers_interval() {
        let pts = trace_m(2.0, 3, 100).unwrap();
        let (lo, hi) = lambda_interval(2.0, 3);
        assert_eq!(pts[0].0, lo);
        assert!(pts.last().unwrap().0 < hi);
        assert!(pts.windows(2).all(|w| w[1].1 >= w[0].1));
    }
}
