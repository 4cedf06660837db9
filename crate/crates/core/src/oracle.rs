//! Brute-force ground truth for small dimensions, finite differences, and a randomized
//! check of the Schur-complement equivalence behind the triality proofs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_eigenvalues};
use crate::model::ProblemInstance;
use crate::primal::{eval_primal, grad_primal};

pub const MAX_GRID_DIM: usize = 3;
pub const MAX_RESOLUTION: usize = 2001;
pub const POLISH_STEPS: usize = 50;
/// Number of discrete local minima that get polished.
const POLISH_CANDIDATES: usize = 8;
/// Grids larger than this only track the single best node.
const STORE_LIMIT: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMin {
    pub x: DVector<f64>,
    pub value: f64,
}

/// Global minimum of a problem instance over a box.
pub fn grid_global_min(inst: &ProblemInstance, bounds: &[(f64, f64)], resolution: usize) -> Result<GridMin> {
    if bounds.len() != inst.n {
        return Err(Error::InvalidArgument(format!("box has {} axes, instance has n = {}", bounds.len(), inst.n)));
    }
    grid_min_fn(|x| eval_primal(inst, x), |x| grad_primal(inst, x), bounds, resolution)
}

/// Same, with the box [lo, hi] on every axis.
pub fn grid_global_min_cube(inst: &ProblemInstance, lo: f64, hi: f64, resolution: usize) -> Result<GridMin> {
    grid_global_min(inst, &vec![(lo, hi); inst.n], resolution)
}

/// Grid search over a box followed by gradient polishing of the best discrete local minima.
pub fn grid_min_fn<F, G>(f: F, grad: G, bounds: &[(f64, f64)], resolution: usize) -> Result<GridMin>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = bounds.len();
    if n > MAX_GRID_DIM {
        return Err(Error::DimensionTooLarge { n });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty box".into()));
    }
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(Error::InvalidArgument(format!("resolution must lie in [2, {MAX_RESOLUTION}]")));
    }
    if bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidArgument("box bounds must be finite with lo < hi".into()));
    }

    let total = resolution.pow(n as u32);
    let node = |mut idx: usize| -> DVector<f64> {
        let mut x = DVector::zeros(n);
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            let i = idx % resolution;
            idx /= resolution;
            x[k] = lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
        }
        x
    };
    let value_at = |i: usize| {
        let v = f(&node(i));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let starts: Vec<usize> = if total <= STORE_LIMIT {
        let values: Vec<f64> = (0..total).into_par_iter().map(value_at).collect();
        let mut minima: Vec<usize> = (0..total)
            .into_par_iter()
            .filter(|&i| is_discrete_local_min(&values, i, n, resolution))
            .collect();
        minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        minima.truncate(POLISH_CANDIDATES);
        if minima.is_empty() {
            minima.push((0..total).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0));
        }
        minima
    } else {
        let best = (0..total)
            .into_par_iter()
            .map(|i| (value_at(i), i))
            .reduce(|| (f64::INFINITY, 0), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
        vec![best.1]
    };

    let mut best = GridMin { x: node(starts[0]), value: value_at(starts[0]) };
    for &s in &starts {
        let cand = polish(&f, &grad, node(s), POLISH_STEPS);
        if cand.value < best.value {
            best = cand;
        }
    }
    Ok(best)
}

fn is_discrete_local_min(values: &[f64], i: usize, n: usize, res: usize) -> bool {
    let v = values[i];
    let mut stride = 1;
    for _ in 0..n {
        let coord = (i / stride) % res;
        if coord > 0 && values[i - stride] < v {
            return false;
        }
        if coord + 1 < res && values[i + stride] < v {
            return false;
        }
        stride *= res;
    }
    true
}

/// Gradient descent with Barzilai–Borwein trial steps and Armijo backtracking.
/// Never returns a point worse than `x0`.
pub fn polish<F, G>(f: &F, grad: &G, x0: DVector<f64>, steps: usize) -> GridMin
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut step = 1.0 / (1.0 + g.amax());
    for _ in 0..steps {
        let gg = g.norm_squared();
        if !(gg > 0.0) || !gg.is_finite() {
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let y = &x - &g * t;
            let fy = f(&y);
            if fy <= fx - 1e-4 * t * gg {
                accepted = Some((y, fy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, fy)) = accepted else { break };
        let gy = grad(&y);
        let s = &y - &x;
        let dg = &gy - &g;
        let sy = s.dot(&dg);
        step = if sy > 0.0 { s.norm_squared() / sy } else { 2.0 * t };
        x = y;
        fx = fy;
        g = gy;
    }
    GridMin { x, value: fx }
}

/// Half-width of a cube containing every x with Π(x) ≤ Π(0), from the lower bound
/// Π ≥ ½λ_min(A)r² − ‖f‖r + Σ (αᵢ/2)·max(0, ½λ_min(Bᵢ)r² + cᵢ)², which holds because the
/// log-sum-exp term is nonnegative. `None` when the bound does not grow past Π(0) by r = 1000.
pub fn sublevel_radius(inst: &ProblemInstance) -> Option<f64> {
    let la = sym_eigenvalues(&inst.a)[0];
    let nf = inst.f.norm();
    let terms: Vec<(f64, f64, f64)> = inst
        .quartic
        .iter()
        .map(|t| (sym_eigenvalues(&t.b)[0].max(0.0), t.c, t.alpha))
        .collect();
    let lower = |r: f64| {
        let mut v = 0.5 * la * r * r - nf * r;
        for &(b, c, a) in &terms {
            let s = (0.5 * b * r * r + c).max(0.0);
            v += 0.5 * a * s * s;
        }
        v
    };
    let p0 = eval_primal(inst, &DVector::zeros(inst.n));
    const R_MAX: f64 = 1e3;
    if lower(R_MAX) <= p0 {
        return None;
    }
    let steps = 100_000;
    let last = (0..=steps)
        .map(|i| R_MAX * i as f64 / steps as f64)
        .filter(|&r| lower(r) <= p0)
        .last()
        .unwrap_or(0.0);
    Some(last + 0.05)
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector field; symmetrized when used as a Hessian.
pub fn fd_jacobian(g: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + h;
        let gp = g(&xp);
        xp[i] = x[i] - h;
        let gm = g(&xp);
        xp[i] = x[i];
        cols.push((gp - gm) / (2.0 * h));
    }
    DMatrix::from_columns(&cols)
}

/// Hessian from function values only.
pub fn fd_hessian(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let f0 = f(x);
    let mut y = x.clone();
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Relative disagreement ‖a − b‖_max / (1 + ‖b‖_max).
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / (1.0 + max_abs(b))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let l = gaussian_matrix(rng, k, k);
    &l * l.transpose() + DMatrix::identity(k, k) * 0.1
}

/// One random instance of the equivalence: returns (λmax(P + DUDᵀ), λmax(−DᵀP⁻¹D − U⁻¹)).
fn lemma_trial(rng: &mut ChaCha8Rng, r: usize, n: usize, m: usize, scale: f64) -> (f64, f64) {
    let mm = gaussian_matrix(rng, n, n);
    let p = -(mm.transpose() * &mm + DMatrix::identity(n, n) * 0.1) * scale;

    // U: an r×r block followed by one (m − r)×(m − r) block
    let mut u = DMatrix::zeros(m, m);
    u.view_mut((0, 0), (r, r)).copy_from(&random_spd(rng, r));
    if m > r {
        u.view_mut((r, r), (m - r, m - r)).copy_from(&random_spd(rng, m - r));
    }
    // spread the definiteness of P + DUDᵀ over both outcomes
    let u = u * (scale * 10f64.powf(rng.random_range(-2.0..2.0)));

    let d11 = loop {
        let cand = gaussian_matrix(rng, r, r);
        let sv = cand.singular_values();
        if sv.min() > 0.1 {
            break cand;
        }
    };
    let mut d = DMatrix::zeros(n, m);
    d.view_mut((0, 0), (r, r)).copy_from(&d11);

    let lhs = &p + &d * &u * d.transpose();
    let p_inv = p.clone().try_inverse().expect("P is negative definite");
    let u_inv = u.clone().try_inverse().expect("U is positive definite");
    let rhs = -(d.transpose() * p_inv * &d) - u_inv;
    let lmax = |m: &DMatrix<f64>| {
        let s = (m + m.transpose()) * 0.5;
        sym_eigenvalues(&s).max()
    };
    (lmax(&lhs), lmax(&rhs))
}

fn lemma_run(seed: u64, trials: usize, r: usize, n: usize, m: usize, scale: f64) -> bool {
    assert!(r >= 1 && r <= n.min(m), "need 1 <= r <= min(n, m)");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).all(|_| {
        let (l, rt) = lemma_trial(&mut rng, r, n, m, scale);
        let slack = 1e-8;
        (l <= slack) == (rt <= slack) || (l.abs() <= slack && rt.abs() <= slack)
    })
}

/// `P + DUDᵀ ⪯ 0 ⇔ −DᵀP⁻¹D − U⁻¹ ⪯ 0` on random P ≺ 0, block-diagonal U ≻ 0 and
/// D = [D₁₁ 0; 0 0] with D₁₁ nonsingular r×r. True iff every trial agrees in sign.
pub fn lemma3_check(seed: u64, trials: usize, r: usize, n: usize, m: usize) -> bool {
    lemma_run(seed, trials, r, n, m, 1.0)
}

/// As [`lemma3_check`] with P and U scaled by `scale`.
pub fn lemma3_check_scaled(seed: u64, trials: usize, r: usize, n: usize, m: usize, scale: f64) -> bool {
    lemma_run(seed, trials, r, n, m, scale)
}

/// Fraction of trials where the left-hand matrix is negative semidefinite; used to check that
/// both branches of the equivalence are exercised.
pub fn lemma3_nsd_fraction(seed: u64, trials: usize, r: usize, n: usize, m: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..trials).filter(|_| lemma_trial(&mut rng, r, n, m, 1.0).0 <= 0.0).count();
    hits as f64 / trials as f64
}
