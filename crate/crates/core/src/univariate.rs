//! Safeguarded Newton for strictly decreasing scalar functions, shared by the
//! quartic and minimax specializations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Walks from `anchor` toward `target` side: returns the first `anchor + dir·w·10⁻ʲ`
/// (j = 1, 2, …) where `accept(φ)` holds.
pub(crate) fn approach(
    anchor: f64,
    dir: f64,
    width: f64,
    phi: impl Fn(f64) -> Option<f64>,
    accept: impl Fn(f64) -> bool,
) -> Option<f64> {
    let floor = 1e-15 * (1.0 + anchor.abs());
    let mut t = 0.5 * width;
    while t >= floor {
        let x = anchor + dir * t;
        if x != anchor {
            if let Some(v) = phi(x) {
                if accept(v) {
                    return Some(x);
                }
            }
        }
        t *= 0.1;
    }
    None
}

/// Root of a strictly decreasing `f` on `[lo, hi]` with `f(lo) > 0 > f(hi)`.
///
/// `f` returns `(value, derivative)`. Newton steps that leave the bracket fall back to bisection.
pub(crate) fn decreasing_root(
    f: impl Fn(f64) -> Result<(f64, f64)>,
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut x = 0.5 * (lo + hi);
    let mut best = Root { x, residual: f64::INFINITY, iterations: 0 };
    for it in 0..max_iter.max(200) {
        let (v, dv) = f(x)?;
        if v.abs() < best.residual {
            best = Root { x, residual: v.abs(), iterations: it + 1 };
        }
        if v.abs() <= ftol {
            return Ok(Root { x, residual: v.abs(), iterations: it + 1 });
        }
        if v > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            return Ok(best);
        }
        let newton = x - v / dv;
        x = if dv < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(best)
}
