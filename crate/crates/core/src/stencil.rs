//! Finite-difference stencils on uniform grids.
//!
//! Two placements are supported: at a node, and halfway between two nodes
//! (the stage points of the one-step integrator). Interior stencils are
//! centered and fourth-order accurate. Near the ends of a domain the window
//! is shifted inside, with `boundary_order` accuracy.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

/// Accuracy of trajectory jets near domain ends.
pub const JET_BOUNDARY_ORDER: usize = 4;
/// Accuracy of derivatives of assembled node series near domain ends.
pub const SERIES_BOUNDARY_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("derivative of order {order} needs {needed} samples, domain has {available}")]
pub struct StencilError {
    pub order: usize,
    pub needed: usize,
    pub available: usize,
}

/// Fornberg weights for the `order`-th derivative at `x0` from samples at `xs`.
pub fn fornberg_weights(order: usize, x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// A stencil resolved against a domain: sample `start + p` gets `weights[p] / h^order`.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub start: usize,
    pub weights: Rc<Vec<f64>>,
    pub order: usize,
}

impl Stencil {
    /// Apply to a sample accessor; `sample(i)` is indexed like the domain.
    #[inline]
    pub fn apply(&self, h: f64, mut sample: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for (p, w) in self.weights.iter().enumerate() {
            acc += w * sample(self.start + p);
        }
        acc / h.powi(self.order as i32)
    }
}

type CacheKey = (usize, i64, usize);

thread_local! {
    static WEIGHTS: RefCell<HashMap<CacheKey, Rc<Vec<f64>>>> = RefCell::new(HashMap::new());
}

/// Unit-spacing weights; `twice_offset` is 2 * (first sample - evaluation point).
fn unit_weights(order: usize, twice_offset: i64, len: usize) -> Rc<Vec<f64>> {
    WEIGHTS.with(|cache| {
        cache
            .borrow_mut()
            .entry((order, twice_offset, len))
            .or_insert_with(|| {
                let xs: Vec<f64> = (0..len)
                    .map(|p| twice_offset as f64 / 2.0 + p as f64)
                    .collect();
                Rc::new(fornberg_weights(order, 0.0, &xs))
            })
            .clone()
    })
}

fn shifted_window(center_lo: usize, center_hi: usize, len: usize, lo: usize, hi: usize) -> usize {
    // Pull the window toward the nearer end, then clamp inside [lo, hi].
    let start = if center_lo - lo <= hi - center_hi {
        lo
    } else {
        hi + 1 - len
    };
    start.clamp(lo, hi + 1 - len)
}

/// Stencil for the `order`-th derivative at node `idx` of the domain `[lo, hi]`.
pub fn node_stencil(
    order: usize,
    idx: usize,
    lo: usize,
    hi: usize,
    boundary_order: usize,
) -> Result<Stencil, StencilError> {
    debug_assert!(lo <= idx && idx <= hi);
    let available = hi - lo + 1;
    if order == 0 {
        return Ok(Stencil {
            start: idx,
            weights: unit_weights(0, 0, 1),
            order,
        });
    }
    let r = (order + 1).div_ceil(2) + 1;
    let (start, len) = if idx >= lo + r && idx + r <= hi {
        (idx - r, 2 * r + 1)
    } else {
        let len = order + boundary_order;
        if len > available {
            return Err(StencilError {
                order,
                needed: len,
                available,
            });
        }
        (shifted_window(idx, idx, len, lo, hi), len)
    };
    let twice_offset = 2 * (start as i64 - idx as i64);
    Ok(Stencil {
        start,
        weights: unit_weights(order, twice_offset, len),
        order,
    })
}

/// Stencil for the `order`-th derivative at the midpoint of nodes `idx` and `idx + 1`.
pub fn half_stencil(
    order: usize,
    idx: usize,
    lo: usize,
    hi: usize,
    boundary_order: usize,
) -> Result<Stencil, StencilError> {
    debug_assert!(lo <= idx && idx < hi);
    let available = hi - lo + 1;
    let s = order / 2 + 2;
    let (start, len) = if idx + 1 >= lo + s && idx + s <= hi {
        (idx + 1 - s, 2 * s)
    } else {
        let len = order + boundary_order;
        if len > available {
            return Err(StencilError {
                order,
                needed: len,
                available,
            });
        }
        (shifted_window(idx, idx + 1, len, lo, hi), len)
    };
    let twice_offset = 2 * (start as i64 - idx as i64) - 1;
    Ok(Stencil {
        start,
        weights: unit_weights(order, twice_offset, len),
        order,
    })
}

/// `order`-th derivative of a node series spanning a whole domain.
pub fn differentiate_series(
    values: &[f64],
    h: f64,
    order: usize,
    boundary_order: usize,
) -> Result<Vec<f64>, StencilError> {
    if order == 0 {
        return Ok(values.to_vec());
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let hi = values.len() - 1;
    (0..values.len())
        .map(|i| {
            let st = node_stencil(order, i, 0, hi, boundary_order)?;
            Ok(st.apply(h, |j| values[j]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_central_weights() {
        let w = fornberg_weights(1, 0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let want = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = fornberg_weights(0, 0.0, &[-1.5, -0.5, 0.5, 1.5]);
        let want = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_derivative_exact_everywhere() {
        let h = 0.1;
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 0.3 * t * t * t;
        let df = |t: f64| -2.0 + t + 0.9 * t * t;
        let xs: Vec<f64> = (0..12).map(|i| f(i as f64 * h)).collect();
        for bo in [JET_BOUNDARY_ORDER, SERIES_BOUNDARY_ORDER + 1] {
            let d = differentiate_series(&xs, h, 1, bo).unwrap();
            for (i, v) in d.iter().enumerate() {
                assert!((v - df(i as f64 * h)).abs() < 1e-10, "node {i}: {v}");
            }
        }
    }

    #[test]
    fn half_point_interpolation_and_slope() {
        let h = 0.05;
        let f = |t: f64| t.powi(3) - t;
        let xs: Vec<f64> = (0..10).map(|i| f(i as f64 * h)).collect();
        for idx in 0..9 {
            let mid = (idx as f64 + 0.5) * h;
            let v = half_stencil(0, idx, 0, 9, 4).unwrap().apply(h, |j| xs[j]);
            assert!((v - f(mid)).abs() < 1e-13);
            let d = half_stencil(1, idx, 0, 9, 4).unwrap().apply(h, |j| xs[j]);
            assert!((d - (3.0 * mid * mid - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(node_stencil(3, 0, 0, 3, 4).is_err());
        assert!(differentiate_series(&[1.0, 2.0], 1.0, 1, 2).is_err());
    }

    #[test]
    fn sawtooth_is_seen_at_half_points() {
        let xs: Vec<f64> = (0..12)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let central = node_stencil(1, 5, 0, 11, 4).unwrap().apply(1.0, |j| xs[j]);
        assert!(central.abs() < 1e-12);
        let staggered = half_stencil(1, 5, 0, 11, 4).unwrap().apply(1.0, |j| xs[j]);
        assert!(staggered.abs() > 1.0);
    }
}
