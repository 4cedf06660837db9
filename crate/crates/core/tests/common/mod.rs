#![allow(dead_code)]

use canodual::model::{LseTerm, QuarticTerm};
use canodual::ProblemInstance;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * scale);
    (&m + m.transpose()) * 0.5
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &l * l.transpose() * 0.5 + DMatrix::identity(n, n) * floor
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * scale)
}

pub fn rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Random instance with mixed-sign A. Quartic metrics are positive definite, so the
/// objective is bounded below whenever r ≥ 1.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize, r: usize) -> ProblemInstance {
    let lse = (0..p)
        .map(|_| LseTerm {
            q: if rng.random_bool(0.7) { spd(rng, n, 0.1) } else { sym(rng, n, 1.0) },
            d: rng.random_range(-1.0..1.0),
        })
        .collect();
    let quartic = (0..r)
        .map(|_| QuarticTerm { b: spd(rng, n, 0.3), c: rng.random_range(-2.0..1.0), alpha: rng.random_range(0.5..5.0) })
        .collect();
    ProblemInstance {
        n,
        a: sym(rng, n, 3.0),
        f: vector(rng, n, 2.0),
        lse,
        quartic,
        beta: [0.5, 1.0, 3.0][rng.random_range(0..3)],
    }
    .validate()
    .expect("generated instance is valid")
}

pub fn level_set_radius(inst: &ProblemInstance) -> f64 {
    canodual::oracle::sublevel_radius(inst).expect("quartic growth bounds the sublevel set")
}
