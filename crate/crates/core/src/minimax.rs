//! Two-branch quadratic minimax, smoothed by log-sum-exp.
//!
//! `max{b₁(x), b₂(x)}` with `bₖ(x) = ½xᵀAₖx − fₖᵀx + dₖ` is replaced by
//! `(1/β)·log(exp(βb₁) + exp(βb₂)) = b₁ + (1/β)·log(1 + exp(β(b₂ − b₁)))`. When A₂ − A₁ ≻ 0 the
//! affine change of variables `x = Δ^{-1/2}y + Δ⁻¹g` (Δ = A₂ − A₁, g = f₂ − f₁) turns the difference
//! branch into `½yᵀy + d`, and the problem becomes
//!
//! ```text
//! Π₂(y) = ½yᵀAy − fᵀy + (1/β)·log(1 + exp(β(½yᵀy + d)))      (+ a constant)
//! ```
//!
//! whose dual is univariate in τ ∈ (max(0, −λ₁), 1).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, max_abs, quad_form, sym_eigen, symmetrize};
use crate::model::{
    matrix_rows, parse_error, rows_to_matrix, vec_to_vector, Classification, CriticalPair, DualPoint, ExistenceCheck,
    ExistenceVerdict, LseTerm, ProblemInstance, Region, SolveReport, SpectralData, SYMMETRY_TOL,
};
use crate::primal::eval_primal;
use crate::solver::{find_critical_points, SolverConfig};
use crate::univariate::{approach, decreasing_root};

/// β used by the minimax fixtures when none is given.
pub const DEFAULT_BETA: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxInstance {
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub f1: DVector<f64>,
    pub f2: DVector<f64>,
    pub d1: f64,
    pub d2: f64,
    pub beta: f64,
}

impl MinimaxInstance {
    pub fn n(&self) -> usize {
        self.f1.len()
    }

    pub fn validate(self) -> Result<Self> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidArgument("dimension n must be positive".into()));
        }
        if self.f2.len() != n {
            return Err(Error::InvalidArgument("f1 and f2 differ in length".into()));
        }
        if !(self.beta.is_finite() && self.d1.is_finite() && self.d2.is_finite()) {
            return Err(Error::NonFinite { name: "beta/d1/d2".into() });
        }
        if self.beta <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "beta".into(), value: self.beta });
        }
        let mut mats = Vec::with_capacity(2);
        for (name, m) in [("A1", &self.a1), ("A2", &self.a2)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidArgument(format!("`{name}` must be {n}x{n}")));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { name: name.into() });
            }
            let asym = asymmetry(m);
            if asym > SYMMETRY_TOL {
                return Err(Error::NonSymmetric { name: name.into(), asymmetry: asym });
            }
            mats.push(symmetrize(m));
        }
        if self.f1.iter().chain(self.f2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { name: "f1/f2".into() });
        }
        let a2 = mats.pop().expect("two matrices");
        let a1 = mats.pop().expect("two matrices");
        let out = MinimaxInstance { a1, a2, ..self };
        let (vals, _) = sym_eigen(&(&out.a2 - &out.a1));
        let tol = 1e-10 * (1.0 + max_abs(&(&out.a2 - &out.a1)));
        if vals[0] <= tol {
            return Err(Error::NotPd { lambda_min: vals[0] });
        }
        Ok(out)
    }

    pub fn branches(&self, x: &DVector<f64>) -> (f64, f64) {
        (
            0.5 * quad_form(&self.a1, x) - self.f1.dot(x) + self.d1,
            0.5 * quad_form(&self.a2, x) - self.f2.dot(x) + self.d2,
        )
    }

    /// The nonsmooth objective max{b₁, b₂}.
    pub fn max_objective(&self, x: &DVector<f64>) -> f64 {
        let (b1, b2) = self.branches(x);
        b1.max(b2)
    }

    /// (1/β)·log(exp(βb₁) + exp(βb₂)), evaluated without overflow.
    pub fn smoothed_objective(&self, x: &DVector<f64>) -> f64 {
        let (b1, b2) = self.branches(x);
        let hi = b1.max(b2);
        let lo = b1.min(b2);
        hi + (-(self.beta * (hi - lo))).exp().ln_1p() / self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        MinimaxInstance { beta, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        let file = MinimaxFile {
            n: self.n(),
            a1: matrix_rows(&self.a1),
            f1: self.f1.iter().copied().collect(),
            d1: self.d1,
            a2: matrix_rows(&self.a2),
            f2: self.f2.iter().copied().collect(),
            d2: self.d2,
            beta: Some(self.beta),
        };
        serde_json::to_string_pretty(&file).expect("minimax serialization cannot fail")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MinimaxFile {
    n: usize,
    #[serde(rename = "A1")]
    a1: Vec<Vec<f64>>,
    f1: Vec<f64>,
    d1: f64,
    #[serde(rename = "A2")]
    a2: Vec<Vec<f64>>,
    f2: Vec<f64>,
    d2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

/// Parses a minimax file: `{n, A1, f1, d1, A2, f2, d2, beta?}`.
pub fn parse_minimax(text: &str) -> Result<MinimaxInstance> {
    let file: MinimaxFile = serde_json::from_str(text).map_err(parse_error)?;
    let n = file.n;
    if n == 0 {
        return Err(Error::Parse { context: "field `n`".into(), message: "must be positive".into() });
    }
    MinimaxInstance {
        a1: rows_to_matrix("A1", &file.a1, n)?,
        a2: rows_to_matrix("A2", &file.a2, n)?,
        f1: vec_to_vector("f1", &file.f1, n)?,
        f2: vec_to_vector("f2", &file.f2, n)?,
        d1: file.d1,
        d2: file.d2,
        beta: file.beta.unwrap_or(DEFAULT_BETA),
    }
    .validate()
}

/// x = S·y + t.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub s: DMatrix<f64>,
    pub t: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.s * y + &self.t
    }
}

/// The smoothed problem in canonical coordinates plus the map back to the original ones.
///
/// original value = canonical value + `value_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalP2 {
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
    pub d: f64,
    pub beta: f64,
    pub transform: AffineMap,
    pub value_offset: f64,
}

impl CanonicalP2 {
    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// The canonical problem in the general encoding (one log-sum-exp term with Q = I).
    pub fn to_problem(&self) -> Result<ProblemInstance> {
        let n = self.n();
        ProblemInstance {
            n,
            a: self.a.clone(),
            f: self.f.clone(),
            lse: vec![LseTerm { q: DMatrix::identity(n, n), d: self.d }],
            quartic: vec![],
            beta: self.beta,
        }
        .validate()
    }

    pub fn spectral(&self) -> SpectralData {
        SpectralData::new(&self.a, &self.f)
    }

    /// Recognizes general instances of the form ½xᵀAx − fᵀx + LSE(½q·xᵀx + d), q > 0.
    pub fn from_problem(inst: &ProblemInstance) -> Option<Self> {
        if inst.p() != 1 || inst.r() != 0 {
            return None;
        }
        let t = &inst.lse[0];
        let n = inst.n;
        let q = t.q[(0, 0)];
        if q <= 0.0 || max_abs(&(&t.q - DMatrix::identity(n, n) * q)) > 1e-14 * q {
            return None;
        }
        let scale = 1.0 / q.sqrt();
        Some(CanonicalP2 {
            a: &inst.a / q,
            f: &inst.f * scale,
            d: t.d,
            beta: inst.beta,
            transform: AffineMap { s: DMatrix::identity(n, n) * scale, t: DVector::zeros(n) },
            value_offset: 0.0,
        })
    }

    /// Maps a report on [`Self::to_problem`] back to original coordinates and values.
    pub fn map_report(&self, mut report: SolveReport) -> SolveReport {
        for pair in &mut report.critical_pairs {
            pair.x = self.transform.apply(&pair.x);
            pair.primal_value += self.value_offset;
            pair.dual_value += self.value_offset;
        }
        report
    }
}

/// Moves the first branch out of the log-sum-exp and whitens the difference branch.
pub fn smooth_and_canonicalize(mm: &MinimaxInstance) -> Result<CanonicalP2> {
    let mm = mm.clone().validate()?;
    let delta = &mm.a2 - &mm.a1;
    let (vals, vecs) = sym_eigen(&delta);
    if vals[0] <= 0.0 {
        return Err(Error::NotPd { lambda_min: vals[0] });
    }
    let inv_sqrt = &vecs * DMatrix::from_diagonal(&vals.map(|l| 1.0 / l.sqrt())) * vecs.transpose();
    let inv = &vecs * DMatrix::from_diagonal(&vals.map(|l| 1.0 / l)) * vecs.transpose();
    let g = &mm.f2 - &mm.f1;
    let shift = &inv * &g;

    let a = &inv_sqrt * &mm.a1 * &inv_sqrt;
    let a = (&a + a.transpose()) * 0.5;
    let f = &inv_sqrt * (&mm.f1 - &mm.a1 * &shift);
    let d = mm.d2 - mm.d1 - 0.5 * g.dot(&shift);
    let value_offset = 0.5 * quad_form(&mm.a1, &shift) - mm.f1.dot(&shift) + mm.d1;

    Ok(CanonicalP2 {
        a,
        f,
        d,
        beta: mm.beta,
        transform: AffineMap { s: inv_sqrt, t: shift },
        value_offset,
    })
}

/// κ(A₂ − A₁) above which the whitening is flagged as ill-conditioned.
const CONDITION_WARNING: f64 = 1e10;

fn condition_note(mm: &MinimaxInstance) -> Option<String> {
    let (vals, _) = sym_eigen(&(&mm.a2 - &mm.a1));
    let kappa = vals[vals.len() - 1] / vals[0];
    (kappa > CONDITION_WARNING).then(|| format!("A2 - A1 is ill-conditioned (condition number {kappa:.3e})"))
}

fn entropy(t: f64) -> f64 {
    t * t.ln() + (1.0 - t) * (1.0 - t).ln()
}

fn check_tau(sd: &SpectralData, tau: f64) -> Result<()> {
    let lower = (-sd.lambda_min()).max(0.0);
    if !(tau > lower && tau < 1.0) {
        return Err(Error::Domain(format!("tau = {tau} outside ({lower}, 1)")));
    }
    Ok(())
}

/// Π₂ᵈ(τ) = −½Σ f̂ᵢ²/(λᵢ + τ) + dτ − (1/β)(τ log τ + (1 − τ) log(1 − τ)).
pub fn dual_p2(sd: &SpectralData, d: f64, beta: f64, tau: f64) -> Result<f64> {
    check_tau(sd, tau)?;
    Ok(dual_p2_unchecked(sd, d, beta, tau))
}

fn dual_p2_unchecked(sd: &SpectralData, d: f64, beta: f64, tau: f64) -> f64 {
    let s: f64 = sd.lambdas.iter().zip(sd.f_hat.iter()).map(|(l, f)| f * f / (l + tau)).sum();
    -0.5 * s + d * tau - entropy(tau) / beta
}

/// First and second derivatives of Π₂ᵈ.
pub fn dual_p2_derivatives(sd: &SpectralData, d: f64, beta: f64, tau: f64) -> Result<(f64, f64)> {
    check_tau(sd, tau)?;
    Ok(derivatives_unchecked(sd, d, beta, tau))
}

fn derivatives_unchecked(sd: &SpectralData, d: f64, beta: f64, tau: f64) -> (f64, f64) {
    let mut first = d - (tau / (1.0 - tau)).ln() / beta;
    let mut second = -1.0 / (beta * tau * (1.0 - tau));
    for (l, f) in sd.lambdas.iter().zip(sd.f_hat.iter()) {
        let r = l + tau;
        first += 0.5 * f * f / (r * r);
        second -= f * f / (r * r * r);
    }
    (first, second)
}

/// (τ, 1 − τ) for τ = 1/(1 + e⁻ᵘ), each accurate to full relative precision.
fn logistic(u: f64) -> (f64, f64) {
    if u >= 0.0 {
        let e = (-u).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = u.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// dΠ₂ᵈ/dτ and its u-derivative, at τ = logistic(u).
fn logit_derivatives(sd: &SpectralData, d: f64, beta: f64, u: f64) -> (f64, f64) {
    let (tau, one_minus) = logistic(u);
    let mut value = d - u / beta;
    let mut cubic = 0.0;
    for (l, f) in sd.lambdas.iter().zip(sd.f_hat.iter()) {
        let r = l + tau;
        value += 0.5 * f * f / (r * r);
        cubic += f * f / (r * r * r);
    }
    (value, -1.0 / beta - tau * one_minus * cubic)
}

fn dual_p2_logit(sd: &SpectralData, d: f64, beta: f64, u: f64) -> f64 {
    let (tau, one_minus) = logistic(u);
    let entropy = -tau * softplus(-u) - one_minus * softplus(u);
    let s: f64 = sd.lambdas.iter().zip(sd.f_hat.iter()).map(|(l, f)| f * f / (l + tau)).sum();
    -0.5 * s + d * tau - entropy / beta
}

/// First `start + dir·(2ʲ − 1)` (j = 0, 1, …) where `accept(φ)` holds.
fn expand(start: f64, dir: f64, phi: &impl Fn(f64) -> Option<f64>, accept: impl Fn(f64) -> bool) -> Option<f64> {
    let mut step = 0.0;
    for _ in 0..1100 {
        let u = start + dir * step;
        if !u.is_finite() {
            return None;
        }
        if phi(u).is_some_and(&accept) {
            return Some(u);
        }
        step = 2.0 * step + 1.0;
    }
    None
}

/// Whether the univariate dual has a critical point in S_a⁺.
pub fn existence_check_p2(sd: &SpectralData, d: f64, beta: f64) -> ExistenceCheck {
    let l1 = sd.lambda_min();
    if l1 >= 0.0 {
        return ExistenceCheck { verdict: ExistenceVerdict::Unconditional, lhs: None };
    }
    if l1 <= -1.0 {
        return ExistenceCheck { verdict: ExistenceVerdict::Unbounded, lhs: None };
    }
    let lhs = sd.tail_sum() - (-l1 / (1.0 + l1)).ln() / beta + d;
    let verdict = if sd.head_load_nonzero() || lhs > 0.0 {
        ExistenceVerdict::Exists
    } else {
        ExistenceVerdict::NotExists
    };
    ExistenceCheck { verdict, lhs: Some(lhs) }
}

/// Global minimizer of the smoothed minimax problem, in original coordinates.
pub fn solve_p2(mm: &MinimaxInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    let can = smooth_and_canonicalize(mm)?;
    let mut report = solve_canonical_p2(&can, cfg)?;
    if let Some(note) = condition_note(mm) {
        report.notes.push(note);
    }
    Ok(report)
}

/// Solves a canonical P₂ problem and maps the answer through its transform.
pub fn solve_canonical_p2(can: &CanonicalP2, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.check()?;
    let problem = can.to_problem()?;
    let sd = can.spectral();
    let (d, beta) = (can.d, can.beta);
    let check = existence_check_p2(&sd, d, beta);
    match check.verdict {
        ExistenceVerdict::Unbounded => return Err(Error::Unbounded { lambda_min: sd.lambda_min() }),
        ExistenceVerdict::NotExists => return Err(Error::NotExists),
        _ => {}
    }

    // Work in u = log(τ/(1 − τ)): the root can sit closer to 0 or 1 than f64 resolves in τ.
    let psi = |u: f64| {
        let (v, _) = logit_derivatives(&sd, d, beta, u);
        v.is_finite().then_some(v)
    };
    let l1 = sd.lambda_min();
    let lo = if l1 >= 0.0 {
        expand(-1.0, -1.0, &psi, |v| v > 0.0).ok_or(Error::NotExists)?
    } else {
        let u_pole = (-l1 / (1.0 + l1)).ln();
        approach(u_pole, 1.0, 1.0 + u_pole.abs(), psi, |v| v > 0.0).ok_or(Error::NotExists)?
    };
    let hi = expand(lo.max(0.0) + 1.0, 1.0, &psi, |v| v < 0.0).ok_or_else(|| {
        Error::NoSaPlusCriticalPoint("dual derivative stays positive as tau approaches 1".into())
    })?;
    let root = decreasing_root(
        |u| Ok(logit_derivatives(&sd, d, beta, u)),
        lo,
        hi,
        cfg.grad_tol,
        cfg.max_iter,
    )?;
    let (tau, _) = logistic(root.x);
    let y = sd.shifted_solve(tau);
    let dual_value = dual_p2_logit(&sd, d, beta, root.x) + can.value_offset;
    let primal_value = eval_primal(&problem, &y) + can.value_offset;
    let mut notes = Vec::new();
    if let Some(lhs) = check.lhs {
        notes.push(format!("existence condition left-hand side = {lhs:.6e}"));
    }
    let pair = CriticalPair {
        x: can.transform.apply(&y),
        zeta: DualPoint::new(vec![tau], vec![]),
        primal_value,
        dual_value,
        region: Region::SaPlus,
        classification: Classification::GlobalMin,
        dual_classification: Classification::LocalMax,
        gap: (primal_value - dual_value).abs(),
        residual: root.residual,
    };
    Ok(SolveReport {
        critical_pairs: vec![pair],
        existence_verdict: Some(check.verdict),
        iterations: root.iterations,
        residual_norm: root.residual,
        notes,
    })
}

/// All dual critical points of the smoothed problem, reported in original coordinates.
pub fn find_critical_points_minimax(mm: &MinimaxInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    let can = smooth_and_canonicalize(mm)?;
    let report = find_critical_points(&can.to_problem()?, cfg)?;
    Ok(can.map_report(report))
}

/// Solves the smoothed problem for each β in turn.
pub fn beta_sweep(mm: &MinimaxInstance, betas: &[f64], cfg: &SolverConfig) -> Result<Vec<(f64, SolveReport)>> {
    betas
        .iter()
        .map(|&b| Ok((b, solve_p2(&mm.with_beta(b), cfg)?)))
        .collect()
}
