//! Problem instances, dual points, solution records and their JSON forms.
//!
//! The objective handled throughout the crate is
//!
//! ```text
//! Π(x) = ½xᵀAx − fᵀx + (1/β)·log(1 + Σᵢ exp(β(½xᵀQᵢx + dᵢ))) + Σⱼ (αⱼ/2)(½xᵀBⱼx + cⱼ)²
//! ```
//!
//! with `p` log-sum-exp terms `(Qᵢ, dᵢ)` and `r` quartic double-well terms `(Bⱼ, cⱼ, αⱼ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, sym_eigen, symmetrize};

/// Entries with |M − Mᵀ| up to this value are symmetrized; anything larger is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LseTerm {
    pub q: DMatrix<f64>,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticTerm {
    pub b: DMatrix<f64>,
    pub c: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub n: usize,
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
    pub lse: Vec<LseTerm>,
    pub quartic: Vec<QuarticTerm>,
    pub beta: f64,
}

impl ProblemInstance {
    /// Number of log-sum-exp terms.
    pub fn p(&self) -> usize {
        self.lse.len()
    }

    /// Number of quartic terms.
    pub fn r(&self) -> usize {
        self.quartic.len()
    }

    /// Dual dimension p + r.
    pub fn m(&self) -> usize {
        self.p() + self.r()
    }

    pub fn validate(self) -> Result<Self> {
        validate(self)
    }

    pub fn to_json(&self) -> String {
        let file = ProblemFile {
            n: self.n,
            a: matrix_rows(&self.a),
            f: self.f.iter().copied().collect(),
            lse: self
                .lse
                .iter()
                .map(|t| LseFile { q: matrix_rows(&t.q), d: t.d })
                .collect(),
            quartic: self
                .quartic
                .iter()
                .map(|t| QuarticFile { b: matrix_rows(&t.b), c: t.c, alpha: t.alpha })
                .collect(),
            beta: self.beta,
        };
        serde_json::to_string_pretty(&file).expect("problem serialization cannot fail")
    }
}

/// Checks the instance invariants and returns it with exact symmetry enforced.
pub fn validate(raw: ProblemInstance) -> Result<ProblemInstance> {
    let ProblemInstance { n, a, f, lse, quartic, beta } = raw;
    if n == 0 {
        return Err(Error::InvalidArgument("dimension n must be positive".into()));
    }
    if lse.is_empty() && quartic.is_empty() {
        return Err(Error::EmptyModel);
    }
    if !(beta.is_finite()) {
        return Err(Error::NonFinite { name: "beta".into() });
    }
    if beta <= 0.0 {
        return Err(Error::NonPositiveParameter { name: "beta".into(), value: beta });
    }
    check_vector("f", &f, n)?;
    let a = check_matrix("A", a, n)?;
    let lse = lse
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            if !t.d.is_finite() {
                return Err(Error::NonFinite { name: format!("lse[{i}].d") });
            }
            Ok(LseTerm { q: check_matrix(&format!("lse[{i}].Q"), t.q, n)?, d: t.d })
        })
        .collect::<Result<Vec<_>>>()?;
    let quartic = quartic
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            if !t.c.is_finite() {
                return Err(Error::NonFinite { name: format!("quartic[{i}].c") });
            }
            if !t.alpha.is_finite() {
                return Err(Error::NonFinite { name: format!("quartic[{i}].alpha") });
            }
            if t.alpha <= 0.0 {
                return Err(Error::NonPositiveParameter {
                    name: format!("quartic[{i}].alpha"),
                    value: t.alpha,
                });
            }
            Ok(QuarticTerm { b: check_matrix(&format!("quartic[{i}].B"), t.b, n)?, c: t.c, alpha: t.alpha })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProblemInstance { n, a, f, lse, quartic, beta })
}

fn check_vector(name: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidArgument(format!("`{name}` has length {}, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { name: name.into() });
    }
    Ok(())
}

fn check_matrix(name: &str, m: DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "`{name}` is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { name: name.into() });
    }
    let asym = asymmetry(&m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NonSymmetric { name: name.into(), asymmetry: asym });
    }
    Ok(symmetrize(&m))
}

/// Conjugate point ζ = (τ, σ). τ belongs to the log-sum-exp block, σ to the quartic block.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub tau: DVector<f64>,
    pub sigma: DVector<f64>,
}

impl DualPoint {
    pub fn new(tau: Vec<f64>, sigma: Vec<f64>) -> Self {
        DualPoint { tau: DVector::from_vec(tau), sigma: DVector::from_vec(sigma) }
    }

    /// Splits a stacked (τ; σ) vector with `p` leading τ components.
    pub fn from_stacked(z: &DVector<f64>, p: usize) -> Self {
        let m = z.len();
        DualPoint {
            tau: DVector::from_iterator(p, z.iter().take(p).copied()),
            sigma: DVector::from_iterator(m - p, z.iter().skip(p).copied()),
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.tau.len() + self.sigma.len(),
            self.tau.iter().chain(self.sigma.iter()).copied(),
        )
    }

    pub fn tau_sum(&self) -> f64 {
        self.tau.iter().sum()
    }

    /// τ > 0 componentwise and Στ < 1.
    pub fn in_simplex(&self) -> bool {
        self.tau.iter().all(|&t| t > 0.0) && self.tau_sum() < 1.0
    }

    pub fn is_finite(&self) -> bool {
        self.tau.iter().chain(self.sigma.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    SaPlus,
    SaMinus,
    Indefinite,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    GlobalMin,
    LocalMax,
    LocalMin,
    Saddle,
    Unclassified,
}

/// A primal/dual critical pair with its triality labels.
///
/// `classification` labels the primal point x̄; `dual_classification` labels ζ̄ as a
/// critical point of the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPair {
    pub x: DVector<f64>,
    pub zeta: DualPoint,
    pub primal_value: f64,
    pub dual_value: f64,
    pub region: Region,
    pub classification: Classification,
    pub dual_classification: Classification,
    pub gap: f64,
    /// ‖∇Πᵈ(ζ̄)‖∞ at this point.
    pub residual: f64,
}

/// Eigen-data of A together with the rotated load f̂ = Uᵀf.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub lambdas: DVector<f64>,
    pub u: DMatrix<f64>,
    pub f_hat: DVector<f64>,
    /// Multiplicity of the smallest eigenvalue.
    pub k: usize,
}

impl SpectralData {
    pub fn new(a: &DMatrix<f64>, f: &DVector<f64>) -> Self {
        let (lambdas, u) = sym_eigen(a);
        let f_hat = u.transpose() * f;
        let k = leading_multiplicity(&lambdas);
        SpectralData { lambdas, u, f_hat, k }
    }

    /// Builds spectral data from already-diagonal information (U = I).
    pub fn diagonal(lambdas: Vec<f64>, f_hat: Vec<f64>) -> Self {
        let mut pairs: Vec<(f64, f64)> = lambdas.into_iter().zip(f_hat).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let lambdas = DVector::from_iterator(n, pairs.iter().map(|p| p.0));
        let f_hat = DVector::from_iterator(n, pairs.iter().map(|p| p.1));
        let k = leading_multiplicity(&lambdas);
        SpectralData { lambdas, u: DMatrix::identity(n, n), f_hat, k }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Σ_{i≤k} f̂ᵢ² is treated as nonzero when its root exceeds 1e-12·‖f‖.
    pub fn head_load_nonzero(&self) -> bool {
        let norm = self.f_hat.norm();
        let head: f64 = self.f_hat.iter().take(self.k).map(|v| v * v).sum();
        head.sqrt() > 1e-12 * norm && head > 0.0
    }

    /// ½ Σ_{i>k} f̂ᵢ² / (λᵢ − λ₁)².
    pub fn tail_sum(&self) -> f64 {
        let l1 = self.lambda_min();
        (self.k..self.n())
            .map(|i| 0.5 * self.f_hat[i].powi(2) / (self.lambdas[i] - l1).powi(2))
            .sum()
    }

    /// U·(f̂ᵢ/(λᵢ + s))ᵢ, the solution of (A + sI)x = f.
    pub fn shifted_solve(&self, s: f64) -> DVector<f64> {
        let y = DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| self.f_hat[i] / (self.lambdas[i] + s)),
        );
        &self.u * y
    }
}

/// Number of eigenvalues within 1e-9·(1 + |λ₁|) of the smallest one.
fn leading_multiplicity(lambdas: &DVector<f64>) -> usize {
    if lambdas.is_empty() {
        return 0;
    }
    let l1 = lambdas[0];
    let tol = 1e-9 * (1.0 + l1.abs());
    lambdas.iter().take_while(|&&l| l - l1 <= tol).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExistenceVerdict {
    Exists,
    NotExists,
    Unconditional,
    Unbounded,
    NotApplicable,
}

impl std::fmt::Display for ExistenceVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExistenceVerdict::Exists => "EXISTS",
            ExistenceVerdict::NotExists => "NOT_EXISTS",
            ExistenceVerdict::Unconditional => "UNCONDITIONAL",
            ExistenceVerdict::Unbounded => "UNBOUNDED",
            ExistenceVerdict::NotApplicable => "NOT_APPLICABLE",
        };
        f.write_str(s)
    }
}

/// Verdict of an existence condition together with the evaluated left-hand side of its
/// inequality (absent when the verdict is decided before that inequality is reached).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceCheck {
    pub verdict: ExistenceVerdict,
    pub lhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub critical_pairs: Vec<CriticalPair>,
    pub existence_verdict: Option<ExistenceVerdict>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub notes: Vec<String>,
}

impl SolveReport {
    pub fn global_min(&self) -> Option<&CriticalPair> {
        self.critical_pairs
            .iter()
            .find(|c| c.classification == Classification::GlobalMin)
    }

    pub fn to_json(&self, status: &str) -> ReportJson {
        ReportJson {
            status: status.to_string(),
            critical_pairs: self
                .critical_pairs
                .iter()
                .map(|c| CriticalPairJson {
                    x: c.x.iter().copied().collect(),
                    tau: c.zeta.tau.iter().copied().collect(),
                    sigma: c.zeta.sigma.iter().copied().collect(),
                    primal_value: c.primal_value,
                    dual_value: c.dual_value,
                    gap: c.gap,
                    region: c.region,
                    classification: c.classification,
                    dual_classification: c.dual_classification,
                })
                .collect(),
            existence_verdict: self.existence_verdict,
            iterations: self.iterations,
            residual_norm: self.residual_norm,
            notes: self.notes.clone(),
        }
    }
}

/// Machine-readable report written by the CLI's `--json` flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportJson {
    pub status: String,
    pub critical_pairs: Vec<CriticalPairJson>,
    pub existence_verdict: Option<ExistenceVerdict>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalPairJson {
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub region: Region,
    pub classification: Classification,
    pub dual_classification: Classification,
}

// ---------------------------------------------------------------------------
// Problem file format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    f: Vec<f64>,
    lse: Vec<LseFile>,
    quartic: Vec<QuarticFile>,
    beta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LseFile {
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    d: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuarticFile {
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    c: f64,
    alpha: f64,
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        context: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}

pub(crate) fn rows_to_matrix(field: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::Parse {
            context: format!("field `{field}`"),
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse {
                context: format!("field `{field}` row {i}"),
                message: format!("expected {n} entries, found {}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn vec_to_vector(field: &str, v: &[f64], n: usize) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(Error::Parse {
            context: format!("field `{field}`"),
            message: format!("expected {n} entries, found {}", v.len()),
        });
    }
    Ok(DVector::from_column_slice(v))
}

/// Parses and validates a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemInstance> {
    let file: ProblemFile = serde_json::from_str(text).map_err(parse_error)?;
    let n = file.n;
    if n == 0 {
        return Err(Error::Parse { context: "field `n`".into(), message: "must be positive".into() });
    }
    let a = rows_to_matrix("A", &file.a, n)?;
    let f = vec_to_vector("f", &file.f, n)?;
    let lse = file
        .lse
        .iter()
        .enumerate()
        .map(|(i, t)| Ok(LseTerm { q: rows_to_matrix(&format!("lse[{i}].Q"), &t.q, n)?, d: t.d }))
        .collect::<Result<Vec<_>>>()?;
    let quartic = file
        .quartic
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(QuarticTerm {
                b: rows_to_matrix(&format!("quartic[{i}].B"), &t.b, n)?,
                c: t.c,
                alpha: t.alpha,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    validate(ProblemInstance { n, a, f, lse, quartic, beta: file.beta })
}
