//! Adaptive Dormand–Prince 5(4) integrator.

use crate::error::{Error, Result};
use crate::scalar::Real;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5<T = f64> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Real> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 200_000,
        }
    }

    /// Integrates `y' = f(x, y)` from `(x0, y0)` and returns the state at each
    /// of the increasing `stops` (all `≥ x0`). Steps are clipped to land on
    /// the stops exactly.
    ///
    /// With `limit = Some((k, bound))` the integration aborts with
    /// [`Error::BlowUp`] once one of the first `k` components exceeds `bound`
    /// in magnitude.
    pub fn integrate<F>(&self, mut f: F, x0: T, y0: &[T], stops: &[T], limit: Option<(usize, T)>) -> Result<Vec<Vec<T>>>
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let dim = y0.len();
        let lit = T::lit;
        let mut out = Vec::with_capacity(stops.len());
        let mut x = x0;
        let mut y = y0.to_vec();
        let mut k1 = vec![T::zero(); dim];
        let mut k2 = vec![T::zero(); dim];
        let mut k3 = vec![T::zero(); dim];
        let mut k4 = vec![T::zero(); dim];
        let mut k5 = vec![T::zero(); dim];
        let mut k6 = vec![T::zero(); dim];
        let mut k7 = vec![T::zero(); dim];
        let mut tmp = vec![T::zero(); dim];
        let mut ynew = vec![T::zero(); dim];
        f(x, &y, &mut k1);
        let span = stops.last().map(|&s| s - x0).unwrap_or(T::zero());
        let mut h = (span * lit(1e-3)).max(T::epsilon());
        let mut steps = 0usize;
        let blow_up = |x: T| Error::BlowUp {
            at: x.to_f64().unwrap_or(f64::NAN),
        };
        for &stop in stops {
            if stop < x {
                return Err(Error::malformed("integration stops must be increasing"));
            }
            while x < stop {
                steps += 1;
                if steps > self.max_steps {
                    return Err(blow_up(x));
                }
                let remaining = stop - x;
                let last = h >= remaining;
                let hs = if last { remaining } else { h };
                let stage = |tmp: &mut [T], coeffs: &[(f64, &[T])]| {
                    for d in 0..dim {
                        let mut acc = y[d];
                        for (c, k) in coeffs {
                            acc = acc + hs * lit(*c) * k[d];
                        }
                        tmp[d] = acc;
                    }
                };
                stage(&mut tmp, &[(A21, &k1)]);
                f(x + lit(C2) * hs, &tmp, &mut k2);
                stage(&mut tmp, &[(A31, &k1), (A32, &k2)]);
                f(x + lit(C3) * hs, &tmp, &mut k3);
                stage(&mut tmp, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
                f(x + lit(C4) * hs, &tmp, &mut k4);
                stage(&mut tmp, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
                f(x + lit(C5) * hs, &tmp, &mut k5);
                stage(&mut tmp, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
                f(x + hs, &tmp, &mut k6);
                stage(&mut ynew, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
                f(x + hs, &ynew, &mut k7);
                let mut err = T::zero();
                for d in 0..dim {
                    let e = hs
                        * (lit(E1) * k1[d]
                            + lit(E3) * k3[d]
                            + lit(E4) * k4[d]
                            + lit(E5) * k5[d]
                            + lit(E6) * k6[d]
                            + lit(E7) * k7[d]);
                    let sc = self.atol + self.rtol * y[d].abs().max(ynew[d].abs());
                    err = err + (e / sc) * (e / sc);
                }
                err = (err / T::from_usize_lossy(dim.max(1))).sqrt();
                if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
                    h = hs * lit(0.2);
                    if h <= lit(1e-14) * (T::one() + x.abs()) {
                        return Err(blow_up(x));
                    }
                    continue;
                }
                let factor = if err == T::zero() {
                    lit(5.0)
                } else {
                    (lit(0.9) * err.powf(lit(-0.2))).max(lit(0.2)).min(lit(5.0))
                };
                if err <= T::one() {
                    x = if last { stop } else { x + hs };
                    std::mem::swap(&mut y, &mut ynew);
                    std::mem::swap(&mut k1, &mut k7);
                    if let Some((k, bound)) = limit {
                        if y[..k].iter().any(|v| v.abs() > bound) {
                            return Err(blow_up(x));
                        }
                    }
                    // Do not let a short clipped step shrink the next one.
                    h = if last { h.max(hs * factor) } else { hs * factor };
                } else {
                    h = hs * factor.min(T::one());
                    if h <= lit(1e-14) * (T::one() + x.abs()) {
                        return Err(blow_up(x));
                    }
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}
