//! Primal objective Π, its canonical measure and the constitutive duality map.

use nalgebra::{DMatrix, DVector};

use crate::dual::assemble_ga_matrix;
use crate::linalg::{quad_form, quad_form_slice};
use crate::model::{DualPoint, ProblemInstance};

/// ξᵢ = ½xᵀQᵢx and ηⱼ = ½xᵀBⱼx.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalMeasure {
    pub xi: DVector<f64>,
    pub eta: DVector<f64>,
}

/// (1/β)·log(1 + Σ exp(β·uᵢ)) with the largest exponent (including the implicit 0) shifted out.
pub fn lse_with_one(beta: f64, u: &[f64]) -> f64 {
    let s = u.iter().fold(0.0f64, |acc, &v| acc.max(beta * v));
    let sum: f64 = u.iter().map(|&v| (beta * v - s).exp()).sum::<f64>() + (-s).exp();
    (s + sum.ln()) / beta
}

/// Softmax weights exp(β uᵢ) / (1 + Σ exp(β u_k)), from the same shifted exponentials.
pub fn softmax_with_one(beta: f64, u: &[f64]) -> Vec<f64> {
    let s = u.iter().fold(0.0f64, |acc, &v| acc.max(beta * v));
    let e: Vec<f64> = u.iter().map(|&v| (beta * v - s).exp()).collect();
    let denom = e.iter().sum::<f64>() + (-s).exp();
    e.into_iter().map(|v| v / denom).collect()
}

fn lse_args(inst: &ProblemInstance, x: &[f64]) -> Vec<f64> {
    inst.lse.iter().map(|t| 0.5 * quad_form_slice(&t.q, x) + t.d).collect()
}

pub fn eval_t(inst: &ProblemInstance, x: &DVector<f64>) -> f64 {
    eval_t_slice(inst, x.as_slice())
}

fn eval_t_slice(inst: &ProblemInstance, x: &[f64]) -> f64 {
    if inst.lse.is_empty() {
        return 0.0;
    }
    lse_with_one(inst.beta, &lse_args(inst, x))
}

pub fn eval_w(inst: &ProblemInstance, x: &DVector<f64>) -> f64 {
    eval_w_slice(inst, x.as_slice())
}

fn eval_w_slice(inst: &ProblemInstance, x: &[f64]) -> f64 {
    inst.quartic
        .iter()
        .map(|t| {
            let v = 0.5 * quad_form_slice(&t.b, x) + t.c;
            0.5 * t.alpha * v * v
        })
        .sum()
}

pub fn eval_primal(inst: &ProblemInstance, x: &DVector<f64>) -> f64 {
    eval_primal_slice(inst, x.as_slice())
}

/// Allocation-light evaluation used by the grid oracle.
pub fn eval_primal_slice(inst: &ProblemInstance, x: &[f64]) -> f64 {
    let lin: f64 = inst.f.iter().zip(x).map(|(f, x)| f * x).sum();
    0.5 * quad_form_slice(&inst.a, x) - lin + eval_t_slice(inst, x) + eval_w_slice(inst, x)
}

pub fn canonical_measure(inst: &ProblemInstance, x: &DVector<f64>) -> CanonicalMeasure {
    CanonicalMeasure {
        xi: DVector::from_iterator(inst.p(), inst.lse.iter().map(|t| 0.5 * quad_form(&t.q, x))),
        eta: DVector::from_iterator(inst.r(), inst.quartic.iter().map(|t| 0.5 * quad_form(&t.b, x))),
    }
}

/// ζ(x) = ∇V(χ(x)).
pub fn duality_map(inst: &ProblemInstance, x: &DVector<f64>) -> DualPoint {
    let chi = canonical_measure(inst, x);
    let u: Vec<f64> = chi.xi.iter().zip(&inst.lse).map(|(xi, t)| xi + t.d).collect();
    let tau = softmax_with_one(inst.beta, &u);
    let sigma: Vec<f64> = chi
        .eta
        .iter()
        .zip(&inst.quartic)
        .map(|(eta, t)| t.alpha * (eta + t.c))
        .collect();
    // far from the origin the weights may round onto the simplex boundary
    DualPoint::new(tau, sigma)
}

/// F = [Q₁x, …, Q_p x, B₁x, …, B_r x].
pub fn jacobian_columns(inst: &ProblemInstance, x: &DVector<f64>) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(inst.n, inst.m());
    for (j, t) in inst.lse.iter().enumerate() {
        f.set_column(j, &(&t.q * x));
    }
    for (j, t) in inst.quartic.iter().enumerate() {
        f.set_column(inst.p() + j, &(&t.b * x));
    }
    f
}

/// D = blockdiag(β(diag τ − ττᵀ), diag α).
pub fn curvature_block(inst: &ProblemInstance, zeta: &DualPoint) -> DMatrix<f64> {
    let p = inst.p();
    let mut d = DMatrix::zeros(inst.m(), inst.m());
    for i in 0..p {
        for j in 0..p {
            let diag = if i == j { zeta.tau[i] } else { 0.0 };
            d[(i, j)] = inst.beta * (diag - zeta.tau[i] * zeta.tau[j]);
        }
    }
    for (j, t) in inst.quartic.iter().enumerate() {
        d[(p + j, p + j)] = t.alpha;
    }
    d
}

/// ∇Π(x) = G_a(ζ(x))·x − f.
pub fn grad_primal(inst: &ProblemInstance, x: &DVector<f64>) -> DVector<f64> {
    let zeta = duality_map(inst, x);
    assemble_ga_matrix(inst, &zeta) * x - &inst.f
}

/// ∇²Π(x) = G_a + F D Fᵀ at ζ = ζ(x).
pub fn hess_primal(inst: &ProblemInstance, x: &DVector<f64>) -> DMatrix<f64> {
    let zeta = duality_map(inst, x);
    let f = jacobian_columns(inst, x);
    let d = curvature_block(inst, &zeta);
    let h = assemble_ga_matrix(inst, &zeta) + &f * d * f.transpose();
    (&h + h.transpose()) * 0.5
}
