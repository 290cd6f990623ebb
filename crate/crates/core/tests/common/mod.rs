//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's own quadrature or stencils.
#![allow(dead_code, clippy::needless_range_loop)]

use dirichlet_einstein::{BoundarySpec, SpaceData, TorusSolution, TraceBranch};

/// Composite five-point Gauss–Legendre rule.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for k in 0..5 {
            sum += W[k] * f(mid + 0.5 * h * X[k]);
        }
    }
    0.5 * h * sum
}

/// `gauss_legendre` with the panel count doubled from 64 until two
/// successive estimates agree to `tol` (relative, floor 1), at most 2^16
/// panels.
pub fn gauss_legendre_converged<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut panels = 64;
    let mut prev = gauss_legendre(&f, a, b, panels);
    while panels < 1 << 16 {
        panels *= 2;
        let next = gauss_legendre(&f, a, b, panels);
        if (next - prev).abs() <= tol * next.abs().max(1.0) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Fourth-order derivative at `x`: centred when `[x − 2e, x + 2e]` fits in
/// `[lo, hi]`, otherwise one-sided with step `e/8` (its error constant is
/// much larger).
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, e: f64, lo: f64, hi: f64) -> f64 {
    if x - 2.0 * e >= lo && x + 2.0 * e <= hi {
        (f(x - 2.0 * e) - 8.0 * f(x - e) + 8.0 * f(x + e) - f(x + 2.0 * e)) / (12.0 * e)
    } else {
        let e = e / 8.0;
        let s = if x - 2.0 * e < lo { 1.0 } else { -1.0 };
        let g = |k: f64| f(x + s * k * e);
        s * (-25.0 * g(0.0) + 48.0 * g(1.0) - 36.0 * g(2.0) + 16.0 * g(3.0) - 3.0 * g(4.0)) / (12.0 * e)
    }
}

pub fn uniform(n: usize) -> Vec<f64> {
    (0..=n).map(|j| j as f64 / n as f64).collect()
}

/// Torus problem with `a_i = 1` and `b_i = exp(logs_i)`.
pub fn torus_problem(logs: &[f64]) -> (SpaceData, BoundarySpec) {
    let b = BoundarySpec::new(vec![1.0; logs.len()], logs.iter().map(|x| x.exp()).collect()).unwrap();
    (SpaceData::torus(logs.len()).unwrap(), b)
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Second-order accurate second difference on a uniform grid, one-sided at
/// the ends.
pub fn second_difference(v: &[f64], h: f64) -> Vec<f64> {
    let m = v.len();
    (0..m)
        .map(|j| {
            if j == 0 {
                (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
            } else if j == m - 1 {
                (2.0 * v[m - 1] - 5.0 * v[m - 2] + 4.0 * v[m - 3] - v[m - 4]) / (h * h)
            } else {
                (v[j - 1] - 2.0 * v[j] + v[j + 1]) / (h * h)
            }
        })
        .collect()
}

/// Central first difference, second order, one-sided at the ends.
pub fn first_difference(v: &[f64], h: f64) -> Vec<f64> {
    let m = v.len();
    (0..m)
        .map(|j| {
            if j == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if j == m - 1 {
                (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h)
            } else {
                (v[j + 1] - v[j - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// `L_i'` by Richardson-extrapolated fourth-order differences over a ladder
/// of halved steps, keeping the pair that agrees best. The ladder stops where
/// cancellation error (about `ε |L| / e`) would pass `1e-10` of the scale.
pub fn dl_reference(br: &TraceBranch, i: usize, r: f64) -> f64 {
    let l = |x: f64| br.eval_l(i, x).unwrap();
    let rich = |e: f64| (16.0 * derivative(l, r, e / 2.0, 0.0, 1.0) - derivative(l, r, e, 0.0, 1.0)) / 15.0;
    let cancel = 500.0 * f64::EPSILON * l(r).abs().max(1.0);
    let mut ladder = vec![rich(4e-3)];
    for k in 1..24 {
        let e = 4e-3 / 2f64.powi(k);
        let v = rich(e);
        if ladder.len() >= 3 && cancel / e > 1e-10 * v.abs().max(1.0) {
            break;
        }
        ladder.push(v);
    }
    let (mut best, mut gap) = (ladder[0], f64::INFINITY);
    for w in ladder.windows(2) {
        let g = (w[1] - w[0]).abs();
        if g < gap {
            best = w[1];
            gap = g;
        }
    }
    best
}

/// Worst scaled residuals of a torus solution: the Riccati
/// equation `L_i' + (Σ L) L_i + λ = 0` on 33 points, the integral constraints
/// `∫ L_i = logs_i`, and the trace constraint `(d − 1)λ = Σ L_i² − (Σ L_i)²`
/// at `r = 0`. Derivatives and integrals come from the oracles above.
pub fn trace_residuals(sol: &TorusSolution, logs: &[f64]) -> (f64, f64, f64) {
    let br = sol.branch();
    let lam = sol.lambda();
    let n = logs.len();
    let mut tm: f64 = 0.0;
    for &r in &uniform(32) {
        let l: Vec<f64> = (0..n).map(|i| br.eval_l(i, r).unwrap()).collect();
        let tr: f64 = l.iter().sum();
        for i in 0..n {
            let dl = dl_reference(br, i, r);
            let scale = 1f64.max(lam.abs()).max((tr * l[i]).abs()).max(dl.abs());
            tm = tm.max((dl + tr * l[i] + lam).abs() / scale);
        }
    }
    let mut ict: f64 = 0.0;
    for i in 0..n {
        let integral = gauss_legendre_converged(|r| br.eval_l(i, r).unwrap(), 0.0, 1.0, 1e-12);
        ict = ict.max((integral - logs[i]).abs() / 1f64.max(logs[i].abs()));
    }
    let l0: Vec<f64> = (0..n).map(|i| br.eval_l(i, 0.0).unwrap()).collect();
    let tr: f64 = l0.iter().sum();
    let tr2: f64 = l0.iter().map(|v| v * v).sum();
    let scale = 1f64.max(lam.abs()).max(tr * tr).max(tr2);
    let tl = (((n - 1) as f64) * lam - (tr2 - tr * tr)).abs() / scale;
    (tm, ict, tl)
}
