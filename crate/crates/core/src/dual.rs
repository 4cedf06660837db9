//! The canonical dual function Πᵈ, its derivatives, and the G_a matrix that drives them.
//!
//! For ζ = (τ, σ):
//!
//! ```text
//! G_a(ζ)  = A + Σ τᵢQᵢ + Σ σⱼBⱼ
//! Πᵈ(ζ)   = −½ fᵀG_a(ζ)⁻¹f − V₁*(τ) − V₂*(σ)
//! V₁*(τ)  = (1/β)[Σ τᵢ log τᵢ + (1 − Στ) log(1 − Στ)] − dᵀτ
//! V₂*(σ)  = Σ σⱼ²/(2αⱼ) − cᵀσ
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_eigen, Inertia};
use crate::model::{DualPoint, ProblemInstance, Region};
use crate::primal::jacobian_columns;

/// Relative singularity threshold: |λ| ≤ tol·(1 + ‖G‖_max) counts as zero.
pub const DEFAULT_SING_TOL: f64 = 1e-10;

/// Slack allowed on the simplex constraints of τ when evaluating V₁*.
const SIMPLEX_SLACK: f64 = 1e-14;

pub fn assemble_ga_matrix(inst: &ProblemInstance, zeta: &DualPoint) -> DMatrix<f64> {
    let mut g = inst.a.clone();
    for (t, &tau) in inst.lse.iter().zip(zeta.tau.iter()) {
        g += &t.q * tau;
    }
    for (t, &sigma) in inst.quartic.iter().zip(zeta.sigma.iter()) {
        g += &t.b * sigma;
    }
    g
}

/// G_a with its spectral factorization and inertia.
#[derive(Debug, Clone)]
pub struct GaFactorization {
    pub g: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub inertia: Inertia,
    pub sing_tol: f64,
    /// G⁻¹f when G is nonsingular.
    pub x_of_f: Option<DVector<f64>>,
}

impl GaFactorization {
    pub fn new(g: DMatrix<f64>, f: &DVector<f64>, rel_tol: f64) -> Self {
        let sing_tol = rel_tol * (1.0 + max_abs(&g));
        let (eigenvalues, eigenvectors) = sym_eigen(&g);
        let inertia = Inertia::from_eigenvalues(&eigenvalues, sing_tol);
        let mut fac = GaFactorization { g, eigenvalues, eigenvectors, inertia, sing_tol, x_of_f: None };
        if inertia.zero == 0 {
            fac.x_of_f = Some(fac.apply_inverse(f));
        }
        fac
    }

    fn apply_inverse(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut y = self.eigenvectors.transpose() * rhs;
        for (yi, l) in y.iter_mut().zip(self.eigenvalues.iter()) {
            *yi /= l;
        }
        &self.eigenvectors * y
    }

    pub fn is_singular(&self) -> bool {
        self.inertia.zero > 0
    }

    fn singular_error(&self) -> Error {
        let min_abs = self.eigenvalues.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
        Error::SingularGa { min_abs_eig: min_abs }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if self.is_singular() {
            return Err(self.singular_error());
        }
        Ok(self.apply_inverse(rhs))
    }

    /// G⁻¹M column by column, reusing the one factorization.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.is_singular() {
            return Err(self.singular_error());
        }
        let mut y = self.eigenvectors.transpose() * rhs;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            y.row_mut(i).scale_mut(1.0 / l);
        }
        Ok(&self.eigenvectors * y)
    }

    pub fn x(&self) -> Result<&DVector<f64>> {
        self.x_of_f.as_ref().ok_or_else(|| self.singular_error())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn region(&self) -> Region {
        let i = self.inertia;
        if i.zero > 0 {
            Region::Singular
        } else if i.neg == 0 {
            Region::SaPlus
        } else if i.pos == 0 {
            Region::SaMinus
        } else {
            Region::Indefinite
        }
    }
}

/// Builds and factors G_a(ζ). τ may lie outside the simplex here; only V₁* cares.
pub fn assemble_ga(inst: &ProblemInstance, zeta: &DualPoint) -> GaFactorization {
    assemble_ga_with_tol(inst, zeta, DEFAULT_SING_TOL)
}

pub fn assemble_ga_with_tol(inst: &ProblemInstance, zeta: &DualPoint, rel_tol: f64) -> GaFactorization {
    GaFactorization::new(assemble_ga_matrix(inst, zeta), &inst.f, rel_tol)
}

fn check_shape(inst: &ProblemInstance, zeta: &DualPoint) -> Result<()> {
    if zeta.tau.len() != inst.p() || zeta.sigma.len() != inst.r() {
        return Err(Error::InvalidArgument(format!(
            "dual point has ({}, {}) components, expected ({}, {})",
            zeta.tau.len(),
            zeta.sigma.len(),
            inst.p(),
            inst.r()
        )));
    }
    if !zeta.is_finite() {
        return Err(Error::Domain("non-finite dual point".into()));
    }
    Ok(())
}

fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

pub fn conjugate_v1(inst: &ProblemInstance, tau: &DVector<f64>) -> Result<f64> {
    let sum: f64 = tau.iter().sum();
    if tau.iter().any(|&t| t < -SIMPLEX_SLACK) || sum > 1.0 + SIMPLEX_SLACK {
        return Err(Error::Domain(format!("tau outside the open simplex (sum = {sum})")));
    }
    let entropy: f64 = tau.iter().map(|&t| xlogx(t)).sum::<f64>() + xlogx(1.0 - sum);
    let lin: f64 = inst.lse.iter().zip(tau.iter()).map(|(t, tau)| t.d * tau).sum();
    Ok(entropy / inst.beta - lin)
}

pub fn conjugate_v2(inst: &ProblemInstance, sigma: &DVector<f64>) -> f64 {
    inst.quartic
        .iter()
        .zip(sigma.iter())
        .map(|(t, &s)| s * s / (2.0 * t.alpha) - t.c * s)
        .sum()
}

/// Ξ(x, ζ) = ½xᵀG_a(ζ)x − fᵀx − V₁*(τ) − V₂*(σ).
pub fn eval_total_complementary(inst: &ProblemInstance, x: &DVector<f64>, zeta: &DualPoint) -> Result<f64> {
    check_shape(inst, zeta)?;
    let g = assemble_ga_matrix(inst, zeta);
    let quad = 0.5 * x.dot(&(&g * x));
    Ok(quad - inst.f.dot(x) - conjugate_v1(inst, &zeta.tau)? - conjugate_v2(inst, &zeta.sigma))
}

/// Value, gradient and (optionally) Hessian of Πᵈ from a single factorization.
#[derive(Debug, Clone)]
pub struct DualEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
    pub ga: GaFactorization,
}

impl DualEval {
    pub fn x(&self) -> &DVector<f64> {
        self.ga.x_of_f.as_ref().expect("DualEval is only built for nonsingular G_a")
    }
}

fn require_interior(zeta: &DualPoint) -> Result<()> {
    if !zeta.in_simplex() {
        return Err(Error::Domain(format!(
            "tau must satisfy tau > 0 and sum(tau) < 1 (sum = {})",
            zeta.tau_sum()
        )));
    }
    Ok(())
}

pub fn dual_eval(inst: &ProblemInstance, zeta: &DualPoint, with_hessian: bool, rel_tol: f64) -> Result<DualEval> {
    check_shape(inst, zeta)?;
    require_interior(zeta)?;
    let ga = assemble_ga_with_tol(inst, zeta, rel_tol);
    let x = ga.x()?.clone();
    let value = -0.5 * inst.f.dot(&x) - conjugate_v1(inst, &zeta.tau)? - conjugate_v2(inst, &zeta.sigma);

    let p = inst.p();
    let rest = 1.0 - zeta.tau_sum();
    let mut gradient = DVector::zeros(inst.m());
    for (i, t) in inst.lse.iter().enumerate() {
        let xi = 0.5 * crate::linalg::quad_form(&t.q, &x);
        gradient[i] = xi + t.d - (zeta.tau[i] / rest).ln() / inst.beta;
    }
    for (j, t) in inst.quartic.iter().enumerate() {
        let eta = 0.5 * crate::linalg::quad_form(&t.b, &x);
        gradient[p + j] = eta + t.c - zeta.sigma[j] / t.alpha;
    }

    let hessian = if with_hessian {
        let f = jacobian_columns(inst, &x);
        let ginv_f = ga.solve_matrix(&f)?;
        let mut h = -(f.transpose() * ginv_f);
        let d_inv = curvature_block_inverse(inst, zeta);
        h -= d_inv;
        Some((&h + h.transpose()) * 0.5)
    } else {
        None
    };

    Ok(DualEval { value, gradient, hessian, ga })
}

/// D⁻¹ in closed form: the τ-block is (diag(1/τ) + eeᵀ/(1 − Στ))/β, the σ-block diag(1/α).
pub fn curvature_block_inverse(inst: &ProblemInstance, zeta: &DualPoint) -> DMatrix<f64> {
    let p = inst.p();
    let m = inst.m();
    let rest = 1.0 - zeta.tau_sum();
    let mut d = DMatrix::zeros(m, m);
    for i in 0..p {
        for j in 0..p {
            let diag = if i == j { 1.0 / zeta.tau[i] } else { 0.0 };
            d[(i, j)] = (diag + 1.0 / rest) / inst.beta;
        }
    }
    for (j, t) in inst.quartic.iter().enumerate() {
        d[(p + j, p + j)] = 1.0 / t.alpha;
    }
    d
}

pub fn eval_dual(inst: &ProblemInstance, zeta: &DualPoint) -> Result<f64> {
    Ok(dual_eval(inst, zeta, false, DEFAULT_SING_TOL)?.value)
}

pub fn grad_dual(inst: &ProblemInstance, zeta: &DualPoint) -> Result<DVector<f64>> {
    Ok(dual_eval(inst, zeta, false, DEFAULT_SING_TOL)?.gradient)
}

pub fn hess_dual(inst: &ProblemInstance, zeta: &DualPoint) -> Result<DMatrix<f64>> {
    Ok(dual_eval(inst, zeta, true, DEFAULT_SING_TOL)?
        .hessian
        .expect("requested"))
}

pub fn classify_region(inst: &ProblemInstance, zeta: &DualPoint) -> Region {
    assemble_ga(inst, zeta).region()
}

/// x̄ = G_a(ζ̄)⁻¹f.
pub fn recover_primal(inst: &ProblemInstance, zeta: &DualPoint) -> Result<DVector<f64>> {
    check_shape(inst, zeta)?;
    assemble_ga(inst, zeta).x().cloned()
}
