//! Finite-difference weights on arbitrary nodes and derivative sampling.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weights of the derivatives `0..=max_order` at `x0` for the given nodes
/// (Fornberg's recursion). Returns `w[order][node]`.
pub fn fornberg_weights<T: Real>(x0: T, nodes: &[T], max_order: usize) -> Vec<Vec<T>> {
    let n = nodes.len();
    let mut c = vec![vec![T::zero(); n]; max_order + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = T::one();
    let mut c4 = nodes[0] - x0;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 = c2 * c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    let kk = T::from_usize_lossy(k);
                    c[k][i] = c1 * (kk * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                let kk = T::from_usize_lossy(k);
                c[k][j] = (c4 * c[k][j] - kk * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// A linear derivative operator stored row by row: row `j` reads
/// `values[start_j .. start_j + weights_j.len()]`.
#[derive(Debug, Clone)]
pub struct DerivativeStencil<T = f64> {
    rows: Vec<(usize, Vec<T>)>,
}

impl<T: Real> DerivativeStencil<T> {
    /// Fourth-order stencil for the derivative of the given order (1 or 2):
    /// centred five-point rows in the interior, one-sided rows near the ends
    /// (five points for the first derivative, six for the second).
    pub fn fourth_order(grid: &[T], order: usize) -> Result<Self> {
        let len = grid.len();
        if len < 3 {
            return Err(Error::malformed(format!(
                "derivative stencil needs at least 3 grid points, got {len}"
            )));
        }
        if !(1..=2).contains(&order) {
            return Err(Error::malformed(format!("unsupported derivative order {order}")));
        }
        let central = 5.min(len);
        let one_sided = if order == 1 { 5 } else { 6 }.min(len);
        let half = central / 2;
        let rows = (0..len)
            .map(|j| {
                let (start, width) = if j >= half && j + half < len {
                    (j - half, central)
                } else if j < half {
                    (0, one_sided)
                } else {
                    (len - one_sided, one_sided)
                };
                let w = fornberg_weights(grid[j], &grid[start..start + width], order);
                (start, w[order].clone())
            })
            .collect();
        Ok(Self { rows })
    }

    /// Stencil on `width` consecutive nodes for every row: centred in the
    /// interior, shifted against the ends. Accuracy is `width − order` on a
    /// uniform grid (one more for even-order centred rows).
    pub fn of_width(grid: &[T], order: usize, width: usize) -> Result<Self> {
        let len = grid.len();
        if width <= order || width > len {
            return Err(Error::malformed(format!(
                "stencil width {width} needs more than {order} and at most {len} nodes"
            )));
        }
        let half = width / 2;
        let rows = (0..len)
            .map(|j| {
                let start = j.saturating_sub(half).min(len - width);
                let w = fornberg_weights(grid[j], &grid[start..start + width], order);
                (start, w[order].clone())
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(start, weights)` of row `j`.
    pub fn row(&self, j: usize) -> (usize, &[T]) {
        let (s, w) = &self.rows[j];
        (*s, w)
    }

    pub fn apply(&self, values: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|(s, w)| {
                w.iter()
                    .zip(&values[*s..*s + w.len()])
                    .fold(T::zero(), |acc, (&wi, &vi)| acc + wi * vi)
            })
            .collect()
    }

    /// Applies row `j` only.
    pub fn apply_at(&self, values: &[T], j: usize) -> T {
        let (s, w) = &self.rows[j];
        w.iter()
            .zip(&values[*s..*s + w.len()])
            .fold(T::zero(), |acc, (&wi, &vi)| acc + wi * vi)
    }
}

/// First and second derivative samples of `values` on `grid`.
pub fn derivative_samples<T: Real>(grid: &[T], values: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if grid.len() != values.len() {
        return Err(Error::malformed("grid and values differ in length"));
    }
    let d1 = DerivativeStencil::fourth_order(grid, 1)?;
    let d2 = DerivativeStencil::fourth_order(grid, 2)?;
    Ok((d1.apply(values), d2.apply(values)))
}
