//! Dual maximization on S_a⁺, multistart critical-point search and triality labels.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::dual::{assemble_ga_with_tol, dual_eval, DualEval, DEFAULT_SING_TOL};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_eigenvalues, sym_norm2, Inertia};
use crate::model::{Classification, CriticalPair, DualPoint, ExistenceVerdict, ProblemInstance, Region, SolveReport};
use crate::primal::{duality_map, eval_primal, grad_primal, hess_primal};

/// Fraction of the distance to the simplex boundary a single step may cover.
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub num_starts: usize,
    pub seed: u64,
    pub boundary_margin: f64,
    /// Relative singularity threshold, scaled by 1 + ‖M‖_max of the matrix being tested.
    pub sing_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            max_iter: 200,
            num_starts: 64,
            seed: 42,
            boundary_margin: 1e-8,
            sing_tol: DEFAULT_SING_TOL,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("boundary_margin", self.boundary_margin),
            ("sing_tol", self.sing_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::NonPositiveParameter { name: name.into(), value: v });
            }
        }
        if self.num_starts == 0 {
            return Err(Error::InvalidArgument("num_starts must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

fn convexity_note(inst: &ProblemInstance) -> Option<String> {
    (inst.m() > 2).then(|| {
        format!(
            "m = {} > 2: convexity of the dual feasible range is assumed, not verified",
            inst.m()
        )
    })
}

/// Largest t ≤ 1 keeping τ + tδτ strictly inside the simplex (with a fraction-to-boundary factor).
fn max_step(zeta: &DualPoint, dir: &DVector<f64>) -> f64 {
    let p = zeta.tau.len();
    let mut t: f64 = 1.0;
    let mut dsum = 0.0;
    for i in 0..p {
        let d = dir[i];
        dsum += d;
        if d < 0.0 {
            t = t.min(FRACTION_TO_BOUNDARY * zeta.tau[i] / -d);
        }
    }
    let slack = 1.0 - zeta.tau_sum();
    if dsum > 0.0 {
        t = t.min(FRACTION_TO_BOUNDARY * slack / dsum);
    }
    t
}

fn step(zeta: &DualPoint, dir: &DVector<f64>, t: f64) -> DualPoint {
    let p = zeta.tau.len();
    DualPoint::from_stacked(&(zeta.stacked() + dir * t), p)
}

// ---------------------------------------------------------------------------
// S_a⁺ maximization

fn is_sa_plus(inst: &ProblemInstance, zeta: &DualPoint, cfg: &SolverConfig) -> bool {
    assemble_ga_with_tol(inst, zeta, cfg.sing_tol).region() == Region::SaPlus
}

fn sample_simplex(rng: &mut ChaCha8Rng, p: usize, margin: f64) -> Vec<f64> {
    if p == 0 {
        return vec![];
    }
    let w: Vec<f64> = (0..=p).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let total: f64 = w.iter().sum();
    let floor = margin.min(0.25 / (p as f64 + 1.0));
    let mut tau: Vec<f64> = w[..p].iter().map(|v| (v / total).max(floor)).collect();
    let sum: f64 = tau.iter().sum();
    if sum > 1.0 - floor {
        let scale = (1.0 - floor) / sum;
        tau.iter_mut().for_each(|t| *t *= scale);
    }
    tau
}

fn all_psd(mats: impl Iterator<Item = DMatrix<f64>>) -> bool {
    mats.into_iter().all(|b| {
        let e = sym_eigenvalues(&b);
        e[0] >= -1e-12 * (1.0 + max_abs(&b))
    })
}

/// A starting point inside S_a⁺, if one is found by shifting σ or sampling τ.
fn sa_plus_start(inst: &ProblemInstance, cfg: &SolverConfig) -> Option<DualPoint> {
    let p = inst.p();
    let center = vec![1.0 / (p as f64 + 1.0); p];
    let base_sigma: Vec<f64> = inst.quartic.iter().map(|t| (t.alpha * t.c).max(0.0)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5a5a_5a5a);
    let mut taus = vec![center];
    for _ in 0..64 {
        taus.push(sample_simplex(&mut rng, p, cfg.boundary_margin));
    }

    let can_shift = inst.r() > 0 && all_psd(inst.quartic.iter().map(|t| t.b.clone()));
    for tau in taus {
        let z = DualPoint::new(tau.clone(), base_sigma.clone());
        if is_sa_plus(inst, &z, cfg) {
            return Some(z);
        }
        if can_shift {
            let g = crate::dual::assemble_ga_matrix(inst, &z);
            let mut shift = sym_eigenvalues(&g)[0].abs() + 1.0;
            for _ in 0..60 {
                let sigma: Vec<f64> = base_sigma.iter().map(|s| s + shift).collect();
                let z = DualPoint::new(tau.clone(), sigma);
                if is_sa_plus(inst, &z, cfg) {
                    return Some(z);
                }
                shift *= 2.0;
            }
        }
    }
    None
}

struct Ascent {
    zeta: DualPoint,
    eval: DualEval,
    iterations: usize,
    converged: bool,
}

/// Damped Newton ascent on Πᵈ that never leaves S_a⁺.
fn newton_ascent(inst: &ProblemInstance, start: DualPoint, cfg: &SolverConfig) -> Result<Ascent> {
    let mut zeta = start;
    let mut eval = dual_eval(inst, &zeta, true, cfg.sing_tol)?;
    for it in 0..cfg.max_iter {
        let g = &eval.gradient;
        if g.amax() <= cfg.grad_tol {
            return Ok(Ascent { zeta, eval, iterations: it, converged: true });
        }
        let neg_h = -eval.hessian.clone().expect("hessian requested");
        let dir = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(g),
            None => g.clone(),
        };
        let slope = g.dot(&dir);
        let mut t = max_step(&zeta, &dir);
        let slack = 1e-13 * (1.0 + eval.value.abs());
        let mut accepted = None;
        while t > 1e-16 {
            let cand = step(&zeta, &dir, t);
            if cand.in_simplex() && is_sa_plus(inst, &cand, cfg) {
                if let Ok(ev) = dual_eval(inst, &cand, true, cfg.sing_tol) {
                    if ev.value >= eval.value + ARMIJO * t * slope - slack {
                        accepted = Some((cand, ev));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((z, ev)) => {
                zeta = z;
                eval = ev;
            }
            None => return Ok(Ascent { zeta, eval, iterations: it + 1, converged: false }),
        }
    }
    let converged = eval.gradient.amax() <= cfg.grad_tol;
    Ok(Ascent { zeta, eval, iterations: cfg.max_iter, converged })
}

/// Maximizes Πᵈ over S_a⁺; the maximizer's primal image is the global minimizer.
pub fn solve_global(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.check()?;
    let mut notes: Vec<String> = convexity_note(inst).into_iter().collect();

    let Some(start) = sa_plus_start(inst, cfg) else {
        notes.push("no interior starting point in S_a+ found; falling back to multistart".into());
        let report = find_critical_points(inst, cfg)?;
        let best = report
            .critical_pairs
            .iter()
            .filter(|c| c.region == Region::SaPlus)
            .max_by(|a, b| a.dual_value.total_cmp(&b.dual_value))
            .cloned();
        return match best {
            Some(pair) => {
                notes.extend(report.notes);
                Ok(SolveReport {
                    residual_norm: pair.residual,
                    critical_pairs: vec![pair],
                    existence_verdict: Some(ExistenceVerdict::NotApplicable),
                    iterations: report.iterations,
                    notes,
                })
            }
            None => Err(Error::NoSaPlusCriticalPoint(
                "S_a+ appears empty or holds no critical point; the perturbation approach for such \
                 instances is not implemented"
                    .into(),
            )),
        };
    };

    let ascent = newton_ascent(inst, start, cfg)?;
    if !ascent.converged {
        let lmin = ascent.eval.ga.min_eigenvalue();
        return Err(Error::NoSaPlusCriticalPoint(format!(
            "iterates approach the boundary of S_a+ (min eig of G_a = {lmin:.3e}, |grad|_inf = {:.3e} \
             after {} iterations); the perturbation approach for such instances is not implemented",
            ascent.eval.gradient.amax(),
            ascent.iterations
        )));
    }
    let pair = pair_from_eval(inst, &ascent.zeta, &ascent.eval, cfg)?;
    Ok(SolveReport {
        residual_norm: pair.residual,
        critical_pairs: vec![pair],
        existence_verdict: Some(ExistenceVerdict::NotApplicable),
        iterations: ascent.iterations,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Multistart critical-point search

/// Radius of a primal box expected to hold every critical point.
fn primal_radius(inst: &ProblemInstance) -> f64 {
    let norm_a = sym_norm2(&inst.a);
    let norm_f = inst.f.norm();
    let lse_norm: f64 = inst.lse.iter().map(|t| sym_norm2(&t.q)).sum();
    let mut radius: f64 = 1.0;
    for t in &inst.lse {
        let q = sym_norm2(&t.q);
        if q > 0.0 {
            radius = radius.max((2.0 * t.d.abs() / q).sqrt());
        }
    }
    for t in &inst.quartic {
        let e = sym_eigenvalues(&t.b);
        let bmax = e[e.len() - 1].abs().max(e[0].abs());
        let bpos = e.iter().copied().filter(|&v| v > 1e-12 * (1.0 + bmax)).fold(f64::INFINITY, f64::min);
        let b = if bpos.is_finite() { bpos } else { bmax };
        if b <= 0.0 {
            continue;
        }
        radius = radius.max((2.0 * (-t.c).max(0.0) / b).sqrt());
        // beyond this radius the quartic gradient dominates the remaining terms
        let k = norm_a + lse_norm + t.alpha * t.c.abs() * bmax;
        let coef = 0.5 * t.alpha * b * b;
        radius = radius.max((k / coef).sqrt()).max((norm_f / coef).cbrt());
    }
    if inst.r() == 0 {
        radius = radius.max(norm_f / (1.0 + norm_a));
    }
    1.5 * radius
}

enum Start {
    Dual(DualPoint),
    Primal(DVector<f64>),
}

/// Per start index: one point from the σ-box × simplex, one random primal point.
fn start_points(inst: &ProblemInstance, cfg: &SolverConfig) -> Vec<Start> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm_a = sym_norm2(&inst.a);
    let radius = primal_radius(inst);
    let mut out = Vec::with_capacity(2 * cfg.num_starts);
    for _ in 0..cfg.num_starts {
        let tau = sample_simplex(&mut rng, inst.p(), cfg.boundary_margin);
        let sigma = inst
            .quartic
            .iter()
            .map(|t| {
                let center = t.alpha * t.c;
                let spread = 10.0 * (1.0 + norm_a / t.alpha);
                rng.random_range(center - spread..=center + spread)
            })
            .collect();
        out.push(Start::Dual(DualPoint::new(tau, sigma)));
        let x = DVector::from_iterator(inst.n, (0..inst.n).map(|_| rng.random_range(-radius..=radius)));
        out.push(Start::Primal(x));
    }
    out
}

fn dual_start(inst: &ProblemInstance, start: Start, cfg: &SolverConfig) -> DualPoint {
    match start {
        Start::Dual(z) => z,
        Start::Primal(x) => {
            let x = primal_newton(inst, x, cfg);
            let mut z = duality_map(inst, &x);
            let tau = z.tau.iter().map(|&t| t.max(cfg.boundary_margin)).collect::<Vec<_>>();
            let sum: f64 = tau.iter().sum();
            let tau = if sum >= 1.0 - cfg.boundary_margin {
                let scale = (1.0 - cfg.boundary_margin) / (sum + cfg.boundary_margin);
                tau.into_iter().map(|t| t * scale).collect()
            } else {
                tau
            };
            z.tau = DVector::from_vec(tau);
            z
        }
    }
}

/// A few damped Newton steps on ∇Π = 0, so that dual starts land inside basins that
/// are cut off by the singular surface of G_a.
fn primal_newton(inst: &ProblemInstance, mut x: DVector<f64>, cfg: &SolverConfig) -> DVector<f64> {
    let mut g = grad_primal(inst, &x);
    for _ in 0..cfg.max_iter.min(50) {
        let merit = 0.5 * g.norm_squared();
        if g.amax() <= cfg.grad_tol || !merit.is_finite() {
            break;
        }
        let Some(dir) = hess_primal(inst, &x).lu().solve(&(-&g)) else { break };
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-10 {
            let y = &x + &dir * t;
            let gy = grad_primal(inst, &y);
            if 0.5 * gy.norm_squared() <= (1.0 - 2.0 * ARMIJO * t) * merit {
                next = Some((y, gy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, gy)) = next else { break };
        x = y;
        g = gy;
    }
    x
}

struct RootRun {
    zeta: Option<DualPoint>,
    iterations: usize,
}

/// Newton on ∇Πᵈ = 0 with a backtracking line search on ½‖∇Πᵈ‖².
fn newton_root(inst: &ProblemInstance, start: DualPoint, cfg: &SolverConfig) -> RootRun {
    let mut zeta = start;
    let Ok(mut eval) = dual_eval(inst, &zeta, true, cfg.sing_tol) else {
        return RootRun { zeta: None, iterations: 0 };
    };
    for it in 0..cfg.max_iter {
        let g = eval.gradient.clone();
        if g.amax() <= cfg.grad_tol {
            return RootRun { zeta: Some(zeta), iterations: it };
        }
        let h = eval.hessian.clone().expect("hessian requested");
        let Some(dir) = h.lu().solve(&(-&g)) else {
            return RootRun { zeta: None, iterations: it + 1 };
        };
        if !dir.iter().all(|v| v.is_finite()) {
            return RootRun { zeta: None, iterations: it + 1 };
        }
        let merit = 0.5 * g.norm_squared();
        let mut t = max_step(&zeta, &dir);
        let mut accepted = None;
        while t > 1e-12 {
            let cand = step(&zeta, &dir, t);
            if cand.in_simplex() {
                if let Ok(ev) = dual_eval(inst, &cand, true, cfg.sing_tol) {
                    let m = 0.5 * ev.gradient.norm_squared();
                    if m <= (1.0 - 2.0 * ARMIJO * t) * merit || ev.gradient.amax() <= cfg.grad_tol {
                        accepted = Some((cand, ev));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((z, ev)) => {
                zeta = z;
                eval = ev;
            }
            None => return RootRun { zeta: None, iterations: it + 1 },
        }
        if zeta.stacked().amax() > 1e12 {
            return RootRun { zeta: None, iterations: it + 1 };
        }
    }
    let ok = eval.gradient.amax() <= cfg.grad_tol;
    RootRun { zeta: ok.then_some(zeta), iterations: cfg.max_iter }
}

/// Every dual critical point reachable from the multistart, deduplicated and labeled.
pub fn find_critical_points(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.check()?;
    let starts = start_points(inst, cfg);
    let runs: Vec<RootRun> = starts
        .into_par_iter()
        .map(|s| newton_root(inst, dual_start(inst, s, cfg), cfg))
        .collect();
    let iterations = runs.iter().map(|r| r.iterations).sum();

    let mut pairs: Vec<CriticalPair> = Vec::new();
    for zeta in runs.into_iter().filter_map(|r| r.zeta) {
        let Ok(eval) = dual_eval(inst, &zeta, true, cfg.sing_tol) else { continue };
        let Ok(pair) = pair_from_eval(inst, &zeta, &eval, cfg) else { continue };
        let z = zeta.stacked();
        let dup = pairs.iter().any(|q| {
            let other = q.zeta.stacked();
            (&other - &z).norm() <= 1e-6 * (1.0 + z.norm().max(other.norm()))
        });
        if !dup {
            pairs.push(pair);
        }
    }
    pairs.sort_by(|a, b| {
        a.dual_value
            .total_cmp(&b.dual_value)
            .then_with(|| lexicographic(&a.zeta.stacked(), &b.zeta.stacked()))
    });

    let residual_norm = pairs.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(SolveReport {
        critical_pairs: pairs,
        existence_verdict: None,
        iterations,
        residual_norm,
        notes: convexity_note(inst).into_iter().collect(),
    })
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

// ---------------------------------------------------------------------------
// Triality classification

fn pair_from_eval(inst: &ProblemInstance, zeta: &DualPoint, eval: &DualEval, cfg: &SolverConfig) -> Result<CriticalPair> {
    let x = eval.x().clone();
    let primal_value = eval_primal(inst, &x);
    let pair = CriticalPair {
        gap: (primal_value - eval.value).abs(),
        primal_value,
        dual_value: eval.value,
        x,
        zeta: zeta.clone(),
        region: eval.ga.region(),
        classification: Classification::Unclassified,
        dual_classification: Classification::Unclassified,
        residual: eval.gradient.amax(),
    };
    triality_classify(inst, pair, cfg)
}

/// Builds the labeled critical pair at ζ̄ (x̄ = G_a(ζ̄)⁻¹f).
pub fn critical_pair_at(inst: &ProblemInstance, zeta: &DualPoint, cfg: &SolverConfig) -> Result<CriticalPair> {
    let eval = dual_eval(inst, zeta, true, cfg.sing_tol)?;
    pair_from_eval(inst, zeta, &eval, cfg)
}

fn hessian_inertia(h: &DMatrix<f64>, rel_tol: f64) -> Inertia {
    let e = sym_eigenvalues(h);
    Inertia::from_eigenvalues(&e, rel_tol * (1.0 + max_abs(h)))
}

fn strict_label(i: Inertia) -> Classification {
    if i.zero == 0 && i.pos > 0 && i.neg > 0 {
        Classification::Saddle
    } else {
        Classification::Unclassified
    }
}

/// Labels the primal and dual sides of a critical pair.
pub fn triality_classify(inst: &ProblemInstance, mut pair: CriticalPair, cfg: &SolverConfig) -> Result<CriticalPair> {
    let eval = dual_eval(inst, &pair.zeta, true, cfg.sing_tol)?;
    let residual = eval.gradient.amax();
    if residual > 10.0 * cfg.grad_tol {
        return Err(Error::NotCritical { residual });
    }
    pair.residual = residual;
    pair.region = eval.ga.region();
    let (primal, dual) = match pair.region {
        Region::SaPlus => (Classification::GlobalMin, Classification::LocalMax),
        Region::SaMinus => {
            let n = inst.n;
            let m = inst.m();
            let hp = hessian_inertia(&hess_primal(inst, &pair.x), cfg.sing_tol);
            let hd = hessian_inertia(eval.hessian.as_ref().expect("hessian requested"), cfg.sing_tol);
            if hp.is_negative_definite() && hd.is_negative_definite() {
                (Classification::LocalMax, Classification::LocalMax)
            } else if hp.is_positive_definite() && hd.is_positive_definite() && m == n {
                (Classification::LocalMin, Classification::LocalMin)
            } else if hd.is_positive_definite() && m < n {
                (Classification::Saddle, Classification::LocalMin)
            } else if hp.is_positive_definite() && m > n {
                (Classification::LocalMin, Classification::Saddle)
            } else {
                (strict_label(hp), strict_label(hd))
            }
        }
        Region::Indefinite | Region::Singular => (Classification::Unclassified, Classification::Unclassified),
    };
    pair.classification = primal;
    pair.dual_classification = dual;
    Ok(pair)
}
