mod common;

use common::{torus_problem, uniform};
use dirichlet_einstein::casestudies::rescale_solution;
use dirichlet_einstein::torus::{reconstruct, solve_torus};
use dirichlet_einstein::{residual_report, rr_ricci_coeff, tangential_ricci_coeff, MetricPath, SpaceData};
use proptest::prelude::*;

/// Direct transcription of the tangential Ricci eigenvalue, written out term
/// by term without the library's helpers.
fn ricci_oracle(space: &SpaceData, f: &[f64], f1: &[f64], f2: &[f64], h: f64, i: usize) -> f64 {
    let n = space.n();
    let mut v = space.beta()[i] / (2.0 * f[i] * f[i]);
    for k in 0..n {
        for l in 0..n {
            let g = space.gamma(i, k, l);
            v += g * (f[i].powi(4) - 2.0 * f[k].powi(4)) / (4.0 * f[i].powi(2) * f[k].powi(2) * f[l].powi(2));
        }
    }
    let tr: f64 = (0..n).map(|k| space.dims()[k] as f64 * f1[k] / f[k]).sum();
    v - f1[i] / (h * h * f[i]) * tr + (f1[i] / f[i]).powi(2) / (h * h) - f2[i] / (h * h * f[i])
}

fn bracket_space() -> SpaceData {
    SpaceData::from_brackets(vec![1, 2, 2], vec![0.5, 2.0, 1.0], &[(0, 1, 2, 0.3)]).unwrap()
}

/// `f_i = exp(c_i sin(k_i r + p_i))` with exact derivatives.
#[derive(Debug)]
struct Analytic {
    c: Vec<f64>,
    k: Vec<f64>,
    p: Vec<f64>,
}

impl Analytic {
    fn eval(&self, i: usize, r: f64) -> (f64, f64, f64) {
        let (c, k) = (self.c[i], self.k[i]);
        let s = k * r + self.p[i];
        let f = (c * s.sin()).exp();
        let u1 = c * k * s.cos();
        let u2 = -c * k * k * s.sin();
        (f, u1 * f, (u2 + u1 * u1) * f)
    }

    fn path(&self, grid: &[f64], lapse: f64, lambda: f64) -> MetricPath {
        let n = self.c.len();
        let (mut f, mut f1, mut f2) = (vec![], vec![], vec![]);
        for i in 0..n {
            let rows: Vec<_> = grid.iter().map(|&r| self.eval(i, r)).collect();
            f.push(rows.iter().map(|v| v.0).collect());
            f1.push(rows.iter().map(|v| v.1).collect());
            f2.push(rows.iter().map(|v| v.2).collect());
        }
        MetricPath::new(lambda, lapse, grid.to_vec(), f, f1, f2).unwrap()
    }
}

fn analytic_strategy() -> impl Strategy<Value = Analytic> {
    (
        prop::collection::vec(-0.8f64..0.8, 3),
        prop::collection::vec(0.5f64..3.0, 3),
        prop::collection::vec(0.0f64..6.0, 3),
    )
        .prop_map(|(c, k, p)| Analytic { c, k, p })
}

/// Sup over the grid of the difference between Ricci values from supplied
/// derivatives and from finite differences of the values alone.
fn fd_gap(space: &SpaceData, a: &Analytic, n: usize, lapse: f64) -> f64 {
    let exact = a.path(&uniform(n), lapse, 0.0);
    let values: Vec<Vec<f64>> = (0..3).map(|i| exact.values(i).to_vec()).collect();
    let fd = MetricPath::from_values(0.0, lapse, uniform(n), values).unwrap();
    let mut gap: f64 = 0.0;
    for j in 0..exact.len() {
        let (f, f1, f2) = exact.sample(j);
        let (_, g1, g2) = fd.sample(j);
        for i in 0..3 {
            let x = tangential_ricci_coeff(space, &f, &f1, &f2, lapse, i).unwrap();
            let y = tangential_ricci_coeff(space, &f, &g1, &g2, lapse, i).unwrap();
            gap = gap.max((x - y).abs());
        }
    }
    gap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ricci_matches_transcribed_formula(a in analytic_strategy(), r in 0.0f64..1.0, h in 0.3f64..3.0) {
        let space = bracket_space();
        let (mut f, mut f1, mut f2) = (vec![], vec![], vec![]);
        for i in 0..3 {
            let (v, d1, d2) = a.eval(i, r);
            f.push(v);
            f1.push(d1);
            f2.push(d2);
        }
        for i in 0..3 {
            let lib = tangential_ricci_coeff(&space, &f, &f1, &f2, h, i).unwrap();
            let oracle = ricci_oracle(&space, &f, &f1, &f2, h, i);
            prop_assert!((lib - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{lib} vs {oracle}");
        }
        let rr = rr_ricci_coeff(&space, &f, &f1, &f2, h).unwrap();
        let rr_oracle: f64 = -(f2[0] / f[0] + 2.0 * f2[1] / f[1] + 2.0 * f2[2] / f[2]) / (h * h);
        prop_assert!((rr - rr_oracle).abs() <= 1e-12 * rr_oracle.abs().max(1.0));
    }

    #[test]
    fn supplied_and_differenced_derivatives_agree(a in analytic_strategy(), h in 0.5f64..2.0) {
        let space = bracket_space();
        let coarse = fd_gap(&space, &a, 64, h);
        let fine = fd_gap(&space, &a, 128, h);
        prop_assert!(coarse < 1e-3, "gap {coarse:e} at N = 64");
        // At least second order on halving the spacing.
        prop_assert!(fine < 1e-13 || coarse / fine >= 3.5, "gaps {coarse:e} -> {fine:e}");
    }
}

#[test]
fn spherical_and_hyperbolic_bands() {
    let grid = uniform(64);
    for d in 2..=6 {
        let space = SpaceData::without_gamma(vec![d], vec![2.0 * (d as f64 - 1.0)]).unwrap();
        let dd = d as f64;
        // f = sin(s) and f = sinh(s) with s = 0.3 + 2r and lapse 2.
        for (shape, lambda) in [(1.0f64, dd), (-1.0, -dd)] {
            let mut f = vec![];
            let mut f1 = vec![];
            let mut f2 = vec![];
            for &r in &grid {
                let s: f64 = 0.3 + 2.0 * r;
                if shape > 0.0 {
                    f.push(s.sin());
                    f1.push(2.0 * s.cos());
                    f2.push(-4.0 * s.sin());
                } else {
                    f.push(s.sinh());
                    f1.push(2.0 * s.cosh());
                    f2.push(4.0 * s.sinh());
                }
            }
            let path = MetricPath::new(lambda, 2.0, grid.clone(), vec![f], vec![f1], vec![f2]).unwrap();
            let rep = residual_report(&space, &path, 1e-12).unwrap();
            assert!(rep.verdict.passed(), "d = {d}, lambda = {lambda}: {rep:?}");
        }
    }
}

/// Exact torus solution with `f_i` multiplied by `1 + δ φ_i`,
/// `φ_i = (i + 1) sin(πr) / n`, derivatives exact.
fn perturbed_torus(logs: &[f64], delta: f64) -> (SpaceData, MetricPath) {
    let (space, boundary) = torus_problem(logs);
    let sol = solve_torus(&boundary, &space).unwrap();
    let grid = uniform(128);
    let exact = reconstruct(&sol, &grid).unwrap();
    let n = logs.len();
    let pi = std::f64::consts::PI;
    let (mut f, mut f1, mut f2) = (vec![], vec![], vec![]);
    for i in 0..n {
        let c = (i + 1) as f64 / n as f64;
        let (mut g, mut g1, mut g2) = (vec![], vec![], vec![]);
        for (j, &r) in grid.iter().enumerate() {
            let (v, d1, d2) = (
                exact.values(i)[j],
                exact.first_derivatives(i)[j],
                exact.second_derivatives(i)[j],
            );
            let p = 1.0 + delta * c * (pi * r).sin();
            let p1 = delta * c * pi * (pi * r).cos();
            let p2 = -delta * c * pi * pi * (pi * r).sin();
            g.push(v * p);
            g1.push(d1 * p + v * p1);
            g2.push(d2 * p + 2.0 * d1 * p1 + v * p2);
        }
        f.push(g);
        f1.push(g1);
        f2.push(g2);
    }
    (space, MetricPath::new(exact.lambda(), 1.0, grid, f, f1, f2).unwrap())
}

#[test]
fn drift_vanishes_linearly_with_the_perturbation() {
    for logs in [vec![1.0, -0.5, 0.2], vec![0.7, 0.3], vec![-2.0, 1.5, 0.0, 0.5]] {
        let drifts: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&d| {
                let (space, path) = perturbed_torus(&logs, d);
                residual_report(&space, &path, 1e-8).unwrap().max_drift
            })
            .collect();
        for w in drifts.windows(2) {
            let ratio = w[0] / w[1];
            assert!((10.0 / 3.0..=30.0).contains(&ratio), "{logs:?}: drifts {drifts:?}");
        }
        let (space, path) = perturbed_torus(&logs, 0.0);
        assert!(residual_report(&space, &path, 1e-8).unwrap().max_drift <= 1e-10);
    }
}

#[test]
fn rescaling_scales_unscaled_residuals_by_q_squared() {
    let logs = [1.0, -0.5, 0.2];
    let (space, path) = perturbed_torus(&logs, 1e-3);
    let base = residual_report(&space, &path, 1e-8).unwrap();
    let (exact_space, exact) = perturbed_torus(&logs, 0.0);
    for q in [0.25, 0.5, 2.0, 3.0] {
        // Samples unchanged, lapse 1/q, Einstein constant q²λ.
        let f: Vec<Vec<f64>> = (0..3).map(|i| path.values(i).to_vec()).collect();
        let f1: Vec<Vec<f64>> = (0..3).map(|i| path.first_derivatives(i).to_vec()).collect();
        let f2: Vec<Vec<f64>> = (0..3).map(|i| path.second_derivatives(i).to_vec()).collect();
        let by_hand = MetricPath::new(q * q * path.lambda(), 1.0 / q, path.grid().to_vec(), f, f1, f2).unwrap();
        assert_eq!(rescale_solution(&path, q).unwrap(), by_hand);
        let rep = residual_report(&space, &by_hand, 1e-8).unwrap();
        for i in 0..3 {
            let want = q * q * base.em2_abs[i];
            assert!(
                (rep.em2_abs[i] - want).abs() <= 1e-10 * want.max(1e-12),
                "q = {q}, i = {i}"
            );
        }
        let moved = rescale_solution(&exact, q).unwrap();
        assert!(
            residual_report(&exact_space, &moved, 1e-8).unwrap().verdict.passed(),
            "q = {q}"
        );
    }
}
