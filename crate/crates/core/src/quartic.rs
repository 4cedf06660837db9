//! Quartic polynomial minimization
//!
//! ```text
//! min ½xᵀAx − fᵀx + (α/2)(½xᵀBx + c)²,   B ≻ 0
//! ```
//!
//! After whitening by B^{-1/2} and rotating into the eigenbasis of A the dual is univariate:
//!
//! ```text
//! Π₁ᵈ(σ)  = −½ Σ f̂ᵢ²/(λᵢ + σ) + cσ − σ²/(2α)
//! δΠ₁ᵈ(σ) =  ½ Σ f̂ᵢ²/(λᵢ + σ)² + c − σ/α
//! ```
//!
//! and is strictly concave on S_a⁺ = {σ > −λ₁, σ ≥ αc}, so its critical point there is found
//! by a bracketed Newton iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_eigenvalues, sym_fn};
use crate::model::{
    Classification, CriticalPair, DualPoint, ExistenceCheck, ExistenceVerdict, ProblemInstance, QuarticTerm,
    Region, SolveReport, SpectralData,
};
use crate::primal::eval_primal;
use crate::solver::SolverConfig;
use crate::univariate::{approach, decreasing_root};

const POLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticInstance {
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
    pub alpha: f64,
    pub c: f64,
    /// Metric B of the quadratic inside the square; `None` means the identity.
    pub metric: Option<DMatrix<f64>>,
}

impl QuarticInstance {
    pub fn new(a: DMatrix<f64>, f: DVector<f64>, alpha: f64, c: f64) -> Result<Self> {
        let inst = QuarticInstance { a, f, alpha, c, metric: None };
        inst.to_problem()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// Recognizes instances with no log-sum-exp term and a single quartic term with B ≻ 0.
    pub fn from_problem(inst: &ProblemInstance) -> Option<Self> {
        if inst.p() != 0 || inst.r() != 1 {
            return None;
        }
        let t = &inst.quartic[0];
        let e = sym_eigenvalues(&t.b);
        if e[0] <= 1e-10 * (1.0 + max_abs(&t.b)) {
            return None;
        }
        let metric = (t.b != DMatrix::identity(inst.n, inst.n)).then(|| t.b.clone());
        Some(QuarticInstance { a: inst.a.clone(), f: inst.f.clone(), alpha: t.alpha, c: t.c, metric })
    }

    /// The same objective in the general encoding (β is irrelevant without log-sum-exp terms).
    pub fn to_problem(&self) -> Result<ProblemInstance> {
        let n = self.n();
        ProblemInstance {
            n,
            a: self.a.clone(),
            f: self.f.clone(),
            lse: vec![],
            quartic: vec![QuarticTerm {
                b: self.metric.clone().unwrap_or_else(|| DMatrix::identity(n, n)),
                c: self.c,
                alpha: self.alpha,
            }],
            beta: 1.0,
        }
        .validate()
    }

    /// (Ã, f̃, W) with W = B^{-1/2}, Ã = WAW, f̃ = Wf, so that x = Wy.
    pub fn whitened(&self) -> (DMatrix<f64>, DVector<f64>, Option<DMatrix<f64>>) {
        match &self.metric {
            None => (self.a.clone(), self.f.clone(), None),
            Some(b) => {
                let w = sym_fn(b, |l| 1.0 / l.sqrt());
                let a = &w * &self.a * &w;
                let a = (&a + a.transpose()) * 0.5;
                (a, &w * &self.f, Some(w))
            }
        }
    }

    pub fn spectral(&self) -> SpectralData {
        let (a, f, _) = self.whitened();
        SpectralData::new(&a, &f)
    }
}

fn check_poles(sd: &SpectralData, sigma: f64) -> Result<()> {
    if sd.lambdas.iter().any(|l| (sigma + l).abs() <= POLE_TOL) {
        return Err(Error::Pole { sigma });
    }
    Ok(())
}

/// δΠ₁ᵈ(σ).
pub fn secular_derivative(sd: &SpectralData, alpha: f64, c: f64, sigma: f64) -> Result<f64> {
    check_poles(sd, sigma)?;
    let s: f64 = sd
        .lambdas
        .iter()
        .zip(sd.f_hat.iter())
        .map(|(l, f)| f * f / (l + sigma).powi(2))
        .sum();
    Ok(0.5 * s + c - sigma / alpha)
}

/// δ²Π₁ᵈ(σ).
pub fn secular_second_derivative(sd: &SpectralData, alpha: f64, sigma: f64) -> Result<f64> {
    check_poles(sd, sigma)?;
    let s: f64 = sd
        .lambdas
        .iter()
        .zip(sd.f_hat.iter())
        .map(|(l, f)| f * f / (l + sigma).powi(3))
        .sum();
    Ok(-s - 1.0 / alpha)
}

/// Π₁ᵈ(σ).
pub fn dual_p1(sd: &SpectralData, alpha: f64, c: f64, sigma: f64) -> Result<f64> {
    check_poles(sd, sigma)?;
    let s: f64 = sd.lambdas.iter().zip(sd.f_hat.iter()).map(|(l, f)| f * f / (l + sigma)).sum();
    Ok(-0.5 * s + c * sigma - sigma * sigma / (2.0 * alpha))
}

/// Whether the dual has a critical point in S_a⁺.
pub fn existence_check_p1(sd: &SpectralData, alpha: f64, c: f64) -> ExistenceCheck {
    let l1 = sd.lambda_min();
    if alpha * c > -l1 {
        return ExistenceCheck { verdict: ExistenceVerdict::Unconditional, lhs: None };
    }
    let lhs = sd.tail_sum() + l1 / alpha + c;
    let verdict = if sd.head_load_nonzero() || lhs > 0.0 {
        ExistenceVerdict::Exists
    } else {
        ExistenceVerdict::NotExists
    };
    ExistenceCheck { verdict, lhs: Some(lhs) }
}

/// Global minimizer of the quartic polynomial through its univariate dual.
pub fn solve_p1(inst: &QuarticInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.check()?;
    let problem = inst.to_problem()?;
    let (_, _, w) = inst.whitened();
    let sd = inst.spectral();
    let (alpha, c) = (inst.alpha, inst.c);
    let check = existence_check_p1(&sd, alpha, c);
    if check.verdict == ExistenceVerdict::NotExists {
        return Err(Error::NotExists);
    }

    let l1 = sd.lambda_min();
    let phi = |s: f64| secular_derivative(&sd, alpha, c, s).ok();
    let phi_d = |s: f64| -> Result<(f64, f64)> {
        Ok((secular_derivative(&sd, alpha, c, s)?, secular_second_derivative(&sd, alpha, s)?))
    };
    let mut notes = Vec::new();

    let (sigma, residual, iterations) = if alpha * c > -l1 {
        let at_edge = secular_derivative(&sd, alpha, c, alpha * c)?;
        if at_edge <= cfg.grad_tol {
            notes.push("maximizer sits on the boundary sigma = alpha*c".into());
            (alpha * c, at_edge.abs(), 0)
        } else {
            let hi = expand_right(alpha * c, &phi)?;
            let root = decreasing_root(phi_d, alpha * c, hi, cfg.grad_tol, cfg.max_iter)?;
            (root.x, root.residual, root.iterations)
        }
    } else {
        let lower = -l1;
        let width = 1.0 + l1.abs();
        let lo = approach(lower, 1.0, width, phi, |v| v > 0.0).ok_or(Error::NotExists)?;
        let hi = expand_right(lower, &phi)?;
        let root = decreasing_root(phi_d, lo, hi.max(lo), cfg.grad_tol, cfg.max_iter)?;
        (root.x, root.residual, root.iterations)
    };

    let y = sd.shifted_solve(sigma);
    let x = match &w {
        Some(w) => w * y,
        None => y,
    };
    let dual_value = dual_p1(&sd, alpha, c, sigma)?;
    let primal_value = eval_primal(&problem, &x);
    if let Some(lhs) = check.lhs {
        notes.push(format!("existence condition left-hand side = {lhs:.6e}"));
    }
    let pair = CriticalPair {
        x,
        zeta: DualPoint::new(vec![], vec![sigma]),
        primal_value,
        dual_value,
        region: Region::SaPlus,
        classification: Classification::GlobalMin,
        dual_classification: Classification::LocalMax,
        gap: (primal_value - dual_value).abs(),
        residual,
    };
    Ok(SolveReport {
        critical_pairs: vec![pair],
        existence_verdict: Some(check.verdict),
        iterations,
        residual_norm: residual,
        notes,
    })
}

/// First point lower + 2ʲ (j = 0, 1, …) where δΠ₁ᵈ turns negative.
fn expand_right(lower: f64, phi: &impl Fn(f64) -> Option<f64>) -> Result<f64> {
    let mut step = 1.0;
    for _ in 0..1100 {
        let s = lower + step;
        if let Some(v) = phi(s) {
            if v < 0.0 {
                return Ok(s);
            }
        }
        step *= 2.0;
    }
    Err(Error::InvalidArgument("could not bracket the secular root".into()))
}
