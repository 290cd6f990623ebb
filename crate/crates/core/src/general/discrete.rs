//! The homotopy map on a uniform grid.
//!
//! Unknowns are `λ` and the interior samples of `y`; the boundary samples are
//! pinned to `p_3(t) c_0`, `p_3(t) c_1` because the Green's function vanishes
//! on the boundary rows. The kernel integral is split at the kink `x = r_j`
//! and each half is integrated with the four-point cubic rule, which keeps the
//! fourth-order accuracy of the derivative stencils.

use nalgebra::DMatrix;

use super::curvature::r_tilde;
use super::p_schedule;
use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, SpaceData};
use crate::stencil::DerivativeStencil;

/// Smallest admissible number of grid intervals.
pub const MIN_INTERVALS: usize = 16;

/// A point `(t, λ, y)` of the homotopy on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyState {
    pub t: f64,
    pub lambda: f64,
    /// `y[i][j] = ln f_i(r_j)`.
    pub y: Vec<Vec<f64>>,
    grid: Vec<f64>,
}

impl HomotopyState {
    /// The fixed point `(0, 0)` at `t = 0`.
    pub fn initial(n: usize, intervals: usize) -> Self {
        let grid = uniform_grid(intervals);
        Self {
            t: 0.0,
            lambda: 0.0,
            y: vec![vec![0.0; grid.len()]; n],
            grid,
        }
    }

    pub fn new(t: f64, lambda: f64, y: Vec<Vec<f64>>, grid: Vec<f64>) -> Result<Self> {
        check_uniform(&grid)?;
        if y.iter().any(|row| row.len() != grid.len()) {
            return Err(Error::malformed("every y row must have one value per grid point"));
        }
        Ok(Self { t, lambda, y, grid })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

pub(crate) fn uniform_grid(intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|j| j as f64 / intervals as f64).collect()
}

fn check_uniform(grid: &[f64]) -> Result<usize> {
    let intervals = grid.len().saturating_sub(1);
    if intervals < MIN_INTERVALS {
        return Err(Error::malformed(format!(
            "grid needs at least {MIN_INTERVALS} intervals, got {intervals}"
        )));
    }
    for (j, &r) in grid.iter().enumerate() {
        if (r - j as f64 / intervals as f64).abs() > 1e-12 {
            return Err(Error::malformed(format!("grid is not uniform on [0, 1] at index {j}")));
        }
    }
    Ok(intervals)
}

/// Per-interval weights of the four-point cubic rule on `[x_k, x_{k+1}]`,
/// returned as `(first node, weights)`.
fn interval_weights(k: usize, intervals: usize, h: f64) -> (usize, [f64; 4]) {
    let s = h / 24.0;
    if k == 0 {
        (0, [9.0 * s, 19.0 * s, -5.0 * s, s])
    } else if k == intervals - 1 {
        (intervals - 3, [s, -5.0 * s, 19.0 * s, 9.0 * s])
    } else {
        (k - 1, [-s, 13.0 * s, 13.0 * s, -s])
    }
}

/// Discrete map `H(t, ·)` for fixed space and boundary logs.
#[derive(Debug, Clone)]
pub struct DiscreteMap<'a> {
    space: &'a SpaceData,
    c0: Vec<f64>,
    c1: Vec<f64>,
    grid: Vec<f64>,
    d1: DerivativeStencil,
    /// `w[(j, m)]`: weight of `F(x_m)` in `∫ G(x, r_j) F(x) dx`.
    w: DMatrix<f64>,
    w_rowsum: Vec<f64>,
}

impl<'a> DiscreteMap<'a> {
    pub fn new(space: &'a SpaceData, boundary: &BoundarySpec, intervals: usize) -> Result<Self> {
        boundary.check_against(space)?;
        let c0 = boundary.a().iter().map(|v| v.ln()).collect();
        let c1 = boundary.b().iter().map(|v| v.ln()).collect();
        Self::with_logs(space, c0, c1, uniform_grid(intervals))
    }

    pub fn with_logs(space: &'a SpaceData, c0: Vec<f64>, c1: Vec<f64>, grid: Vec<f64>) -> Result<Self> {
        let intervals = check_uniform(&grid)?;
        if c0.len() != space.n() || c1.len() != space.n() {
            return Err(Error::malformed(format!(
                "boundary logs need {} entries each",
                space.n()
            )));
        }
        let d1 = DerivativeStencil::fourth_order(&grid, 1)?;
        let m = grid.len();
        let h = 1.0 / intervals as f64;
        let mut w = DMatrix::zeros(m, m);
        // left[m]: weights of ∫_0^{r_j}; right = total − left.
        let mut total = vec![0.0; m];
        for k in 0..intervals {
            let (start, iw) = interval_weights(k, intervals, h);
            for (o, v) in iw.iter().enumerate() {
                total[start + o] += v;
            }
        }
        let mut left = vec![0.0; m];
        for j in 0..m {
            if j > 0 {
                let (start, iw) = interval_weights(j - 1, intervals, h);
                for (o, v) in iw.iter().enumerate() {
                    left[start + o] += v;
                }
            }
            let r = grid[j];
            for q in 0..m {
                let x = grid[q];
                let right = total[q] - left[q];
                w[(j, q)] = (r - 1.0) * x * left[q] + r * (x - 1.0) * right;
            }
            if j == 0 || j == m - 1 {
                for q in 0..m {
                    w[(j, q)] = 0.0;
                }
            }
        }
        let w_rowsum = (0..m).map(|j| w.row(j).sum()).collect();
        Ok(Self {
            space,
            c0,
            c1,
            grid,
            d1,
            w,
            w_rowsum,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn space(&self) -> &SpaceData {
        self.space
    }

    fn n(&self) -> usize {
        self.space.n()
    }

    fn interior(&self) -> usize {
        self.grid.len() - 2
    }

    /// Length of the packed unknown vector `(λ, interior y)`.
    pub fn unknowns(&self) -> usize {
        1 + self.n() * self.interior()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        1 + i * self.interior() + (j - 1)
    }

    pub fn pack(&self, lambda: f64, y: &[Vec<f64>]) -> Vec<f64> {
        let mut z = vec![0.0; self.unknowns()];
        z[0] = lambda;
        for (i, row) in y.iter().enumerate() {
            for j in 1..self.grid.len() - 1 {
                z[self.index(i, j)] = row[j];
            }
        }
        z
    }

    /// Full `y` rows for the packed unknowns, with the boundary values at `t`.
    pub fn unpack(&self, t: f64, z: &[f64]) -> Vec<Vec<f64>> {
        let p3 = p_schedule(3, t);
        let m = self.grid.len();
        (0..self.n())
            .map(|i| {
                let mut row = vec![0.0; m];
                row[0] = p3 * self.c0[i];
                row[m - 1] = p3 * self.c1[i];
                for j in 1..m - 1 {
                    row[j] = z[self.index(i, j)];
                }
                row
            })
            .collect()
    }

    pub fn state(&self, t: f64, z: &[f64]) -> HomotopyState {
        HomotopyState {
            t,
            lambda: z[0],
            y: self.unpack(t, z),
            grid: self.grid.clone(),
        }
    }

    /// `y'` on the grid.
    pub fn slopes(&self, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
        y.iter().map(|row| self.d1.apply(row)).collect()
    }

    fn trace_at(&self, dy: &[Vec<f64>], m: usize) -> f64 {
        (0..self.n()).map(|k| self.space.dim(k) * dy[k][m]).sum()
    }

    /// The integrand `F_i = −p_2 y_i' T − p_2 λ + p_4 R̃_i(y)`, which is also
    /// `y_i''` at a fixed point.
    pub fn forcing(&self, t: f64, lambda: f64, y: &[Vec<f64>], dy: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (p2, p4) = (p_schedule(2, t), p_schedule(4, t));
        let n = self.n();
        let m = self.grid.len();
        let mut out = vec![vec![0.0; m]; n];
        let mut node = vec![0.0; n];
        for q in 0..m {
            let tr = self.trace_at(dy, q);
            let rt = if p4 != 0.0 {
                for k in 0..n {
                    node[k] = y[k][q];
                }
                r_tilde(self.space, &node)
            } else {
                vec![0.0; n]
            };
            for i in 0..n {
                out[i][q] = -p2 * dy[i][q] * tr - p2 * lambda + p4 * rt[i];
            }
        }
        out
    }

    /// The scalar line of the map, evaluated at `r = 0`.
    fn lambda_image(&self, t: f64, y: &[Vec<f64>], dy: &[Vec<f64>]) -> f64 {
        let (p1, p4) = (p_schedule(1, t), p_schedule(4, t));
        let n = self.n();
        let tr = self.trace_at(dy, 0);
        let mut sum = 0.0;
        for i in 0..n {
            let v = dy[i][0];
            sum += self.space.dim(i) * (-v * tr + v * v);
        }
        let s = if p4 != 0.0 {
            let y0: Vec<f64> = (0..n).map(|k| y[k][0]).collect();
            super::curvature::s_tilde(self.space, &y0)
        } else {
            0.0
        };
        (p1 * sum + p4 * s) / (self.space.total_dim() - 1) as f64
    }

    /// `H(t, λ, y)` on the full grid.
    pub fn image(&self, t: f64, lambda: f64, y: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let dy = self.slopes(y);
        let lam = self.lambda_image(t, y, &dy);
        let forcing = self.forcing(t, lambda, y, &dy);
        let p3 = p_schedule(3, t);
        let m = self.grid.len();
        let mut out = vec![vec![0.0; m]; self.n()];
        for (i, fi) in forcing.iter().enumerate() {
            for j in 0..m {
                let r = self.grid[j];
                let mut acc = p3 * self.c0[i] * (1.0 - r) + p3 * self.c1[i] * r;
                if j != 0 && j != m - 1 {
                    let row = self.w.row(j);
                    acc += row.iter().zip(fi.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
                out[i][j] = acc;
            }
        }
        (lam, out)
    }

    /// `z − H(t, z)` on the packed unknowns.
    pub fn residual(&self, t: f64, z: &[f64]) -> Vec<f64> {
        let y = self.unpack(t, z);
        let (lam, img) = self.image(t, z[0], &y);
        let mut out = vec![0.0; z.len()];
        out[0] = z[0] - lam;
        for i in 0..self.n() {
            for j in 1..self.grid.len() - 1 {
                let k = self.index(i, j);
                out[k] = z[k] - img[i][j];
            }
        }
        out
    }

    /// Jacobian of [`Self::residual`]. The derivative-coupling terms are exact;
    /// `∂R̃/∂y` is taken by forward differences node by node.
    pub fn jacobian(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let (p1, p2, p4) = (p_schedule(1, t), p_schedule(2, t), p_schedule(4, t));
        let n = self.n();
        let m = self.grid.len();
        let size = self.unknowns();
        let y = self.unpack(t, z);
        let dy = self.slopes(&y);
        let dims: Vec<f64> = (0..n).map(|k| self.space.dim(k)).collect();
        let mut jac = DMatrix::<f64>::identity(size, size);

        // Column of λ in the function rows.
        for i in 0..n {
            for j in 1..m - 1 {
                jac[(self.index(i, j), 0)] += p2 * self.w_rowsum[j];
            }
        }

        // ∂F_i(x_q)/∂y_k(x_s) = A_ik(q) S_{q,s} + B_ik(q) δ_{qs}.
        let mut node = vec![0.0; n];
        for q in 0..m {
            let tr = self.trace_at(&dy, q);
            let mut b = vec![vec![0.0; n]; n];
            if p4 != 0.0 {
                for k in 0..n {
                    node[k] = y[k][q];
                }
                let base = r_tilde(self.space, &node);
                for k in 0..n {
                    let step = 1e-7 * (1.0 + node[k].abs());
                    let keep = node[k];
                    node[k] = keep + step;
                    let bumped = r_tilde(self.space, &node);
                    node[k] = keep;
                    for i in 0..n {
                        b[i][k] = p4 * (bumped[i] - base[i]) / step;
                    }
                }
            }
            let (start, weights) = self.d1.row(q);
            for i in 0..n {
                for k in 0..n {
                    let delta = if i == k { tr } else { 0.0 };
                    let a = -p2 * (delta + dy[i][q] * dims[k]);
                    // Stencil coupling.
                    if a != 0.0 {
                        for (o, &wt) in weights.iter().enumerate() {
                            let s = start + o;
                            if s == 0 || s == m - 1 {
                                continue;
                            }
                            let col = self.index(k, s);
                            let coef = a * wt;
                            for j in 1..m - 1 {
                                jac[(self.index(i, j), col)] -= self.w[(j, q)] * coef;
                            }
                        }
                    }
                    if b[i][k] != 0.0 && q != 0 && q != m - 1 {
                        let col = self.index(k, q);
                        for j in 1..m - 1 {
                            jac[(self.index(i, j), col)] -= self.w[(j, q)] * b[i][k];
                        }
                    }
                }
            }
        }

        // Scalar line: derivative of Σ d_i(−y_i' T + y_i'²) = −T² + Σ d_i y_i'².
        if p1 != 0.0 {
            let scale = p1 / (self.space.total_dim() - 1) as f64;
            let tr0 = self.trace_at(&dy, 0);
            let (start, weights) = self.d1.row(0);
            for k in 0..n {
                let g = 2.0 * dims[k] * (dy[k][0] - tr0);
                for (o, &wt) in weights.iter().enumerate() {
                    let s = start + o;
                    if s == 0 || s == m - 1 {
                        continue;
                    }
                    jac[(0, self.index(k, s))] -= scale * g * wt;
                }
            }
        }
        jac
    }

    /// `y''` implied by the fixed-point equation at `state`.
    pub fn second_derivatives(&self, state: &HomotopyState) -> Vec<Vec<f64>> {
        let dy = self.slopes(&state.y);
        self.forcing(state.t, state.lambda, &state.y, &dy)
    }
}

/// One application of the map to `state` with boundary logs `c0`, `c1`.
pub fn apply_h(space: &SpaceData, c0: &[f64], c1: &[f64], state: &HomotopyState) -> Result<(f64, Vec<Vec<f64>>)> {
    if state.y.len() != space.n() {
        return Err(Error::malformed(format!(
            "state has {} rows, the space has {} summands",
            state.y.len(),
            space.n()
        )));
    }
    let map = DiscreteMap::with_logs(space, c0.to_vec(), c1.to_vec(), state.grid.clone())?;
    Ok(map.image(state.t, state.lambda, &state.y))
}
