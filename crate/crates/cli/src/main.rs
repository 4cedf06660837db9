use std::path::{Path, PathBuf};
use std::process::ExitCode;

use canodual::dual::assemble_ga_matrix;
use canodual::linalg::sym_eigenvalues;
use canodual::minimax::{existence_check_p2, find_critical_points_minimax, smooth_and_canonicalize, solve_canonical_p2};
use canodual::model::validate;
use canodual::oracle::{grid_global_min, grid_min_fn, sublevel_radius, GridMin, MAX_GRID_DIM};
use canodual::quartic::existence_check_p1;
use canodual::{
    find_critical_points, fixtures, parse_minimax, parse_problem, solve_global, solve_p1, solve_p2, CanonicalP2,
    Classification, Error, ExistenceCheck, MinimaxInstance, ProblemInstance, QuarticInstance, SolveReport,
    SolverConfig,
};
use clap::{Parser, Subcommand};
use nalgebra::DVector;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;

#[derive(Parser)]
#[command(name = "canodual", version, about = "Global optimization of nonconvex quartic and log-sum-exp models through their canonical dual")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem or minimax file.
    Solve {
        path: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Use the univariate solver when the instance has the quartic or minimax shape.
        #[arg(long)]
        specialize: bool,
        /// Report every critical point found by the multistart search.
        #[arg(long)]
        all_critical: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of multistart seeds.
        #[arg(long)]
        starts: Option<usize>,
        /// Override the smoothing parameter in the file.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Evaluate the existence condition of a specialized instance.
    CheckExistence {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Recompute a bundled worked example and compare with its reference values.
    Reproduce {
        /// Example number (1, 2 or 3).
        id: u32,
    },
    /// Compare the solver's global minimum with a brute-force grid search (n <= 3).
    OracleCompare {
        path: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 601)]
        resolution: usize,
    },
}

enum Input {
    General(ProblemInstance),
    Minimax(MinimaxInstance),
}

impl Input {
    fn n(&self) -> usize {
        match self {
            Input::General(p) => p.n,
            Input::Minimax(m) => m.n(),
        }
    }
}

enum Failure {
    Io(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => EXIT_ERROR,
            Failure::Core(e) => match e {
                Error::NoSaPlusCriticalPoint(_) | Error::NotExists | Error::Unbounded { .. } | Error::ShapeMismatch => {
                    EXIT_NEGATIVE
                }
                _ => EXIT_ERROR,
            },
        }
    }

    fn status(&self) -> &'static str {
        match self {
            Failure::Core(Error::NoSaPlusCriticalPoint(_)) => "NO_GLOBAL_MIN",
            Failure::Core(Error::NotExists) => "NOT_EXISTS",
            Failure::Core(Error::Unbounded { .. }) => "UNBOUNDED",
            Failure::Core(Error::ShapeMismatch) => "SHAPE_MISMATCH",
            _ => "ERROR",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

fn load(path: &Path) -> Result<Input, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    match parse_problem(&text) {
        Ok(p) => Ok(Input::General(p)),
        Err(_) if text.contains("\"A1\"") => Ok(Input::Minimax(parse_minimax(&text)?)),
        Err(e) => Err(e.into()),
    }
}

fn with_beta(input: Input, beta: Option<f64>) -> Result<Input, Failure> {
    let Some(b) = beta else { return Ok(input) };
    Ok(match input {
        Input::General(mut p) => {
            p.beta = b;
            Input::General(validate(p)?)
        }
        Input::Minimax(m) => Input::Minimax(m.with_beta(b).validate()?),
    })
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn print_report(report: &SolveReport) {
    println!("critical points: {}", report.critical_pairs.len());
    for (i, c) in report.critical_pairs.iter().enumerate() {
        println!("#{i} {:?} (dual {:?}), region {:?}", c.classification, c.dual_classification, c.region);
        println!("   x     = {}", fmt_vec(&c.x));
        if !c.zeta.tau.is_empty() {
            println!("   tau   = {}", fmt_vec(&c.zeta.tau));
        }
        if !c.zeta.sigma.is_empty() {
            println!("   sigma = {}", fmt_vec(&c.zeta.sigma));
        }
        println!("   primal = {:.9}, dual = {:.9}, gap = {:.3e}", c.primal_value, c.dual_value, c.gap);
    }
    if let Some(v) = report.existence_verdict {
        println!("existence: {v}");
    }
    println!("iterations: {}, residual: {:.3e}", report.iterations, report.residual_norm);
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn run_solve(input: Input, specialize: bool, all: bool, cfg: &SolverConfig) -> Result<SolveReport, Failure> {
    let report = match input {
        Input::Minimax(m) if all => find_critical_points_minimax(&m, cfg)?,
        Input::Minimax(m) => solve_p2(&m, cfg)?,
        Input::General(p) if all => find_critical_points(&p, cfg)?,
        Input::General(p) if specialize => {
            if let Some(q) = QuarticInstance::from_problem(&p) {
                solve_p1(&q, cfg)?
            } else if let Some(can) = CanonicalP2::from_problem(&p) {
                solve_canonical_p2(&can, cfg)?
            } else {
                solve_global(&p, cfg)?
            }
        }
        Input::General(p) => solve_global(&p, cfg)?,
    };
    Ok(report)
}

fn solve_cmd(
    path: &Path,
    json: bool,
    specialize: bool,
    all: bool,
    seed: u64,
    starts: Option<usize>,
    beta: Option<f64>,
) -> u8 {
    let mut cfg = SolverConfig { seed, ..SolverConfig::default() };
    if let Some(s) = starts {
        cfg.num_starts = s;
    }
    let result = load(path).and_then(|i| with_beta(i, beta)).and_then(|i| run_solve(i, specialize, all, &cfg));
    match result {
        Ok(report) => {
            let found = report.global_min().is_some();
            let status = if found { "GLOBAL_MIN" } else { "NO_GLOBAL_MIN" };
            if json {
                println!("{}", serde_json::to_string_pretty(&report.to_json(status)).expect("report serializes"));
            } else {
                println!("status: {status}");
                print_report(&report);
            }
            if found {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            }
        }
        Err(f) => {
            if json {
                let report = SolveReport { notes: vec![f.message()], ..SolveReport::default() };
                println!("{}", serde_json::to_string_pretty(&report.to_json(f.status())).expect("report serializes"));
            } else {
                eprintln!("error: {}", f.message());
            }
            f.code()
        }
    }
}

fn existence(input: &Input) -> Result<ExistenceCheck, Failure> {
    match input {
        Input::Minimax(m) => {
            let can = smooth_and_canonicalize(m)?;
            Ok(existence_check_p2(&can.spectral(), can.d, can.beta))
        }
        Input::General(p) => {
            if let Some(q) = QuarticInstance::from_problem(p) {
                Ok(existence_check_p1(&q.spectral(), q.alpha, q.c))
            } else if let Some(can) = CanonicalP2::from_problem(p) {
                Ok(existence_check_p2(&can.spectral(), can.d, can.beta))
            } else {
                Err(Error::ShapeMismatch.into())
            }
        }
    }
}

fn check_existence_cmd(path: &Path, json: bool) -> u8 {
    match load(path).and_then(|i| existence(&i)) {
        Ok(check) => {
            if json {
                let v = serde_json::json!({ "verdict": check.verdict, "lhs": check.lhs });
                println!("{}", serde_json::to_string_pretty(&v).expect("verdict serializes"));
            } else {
                println!("verdict: {}", check.verdict);
                match check.lhs {
                    Some(l) => println!("lhs: {l:.9e}"),
                    None => println!("lhs: not evaluated"),
                }
            }
            EXIT_OK
        }
        Err(f) => {
            if json {
                let v = serde_json::json!({ "verdict": null, "status": f.status(), "error": f.message() });
                println!("{}", serde_json::to_string_pretty(&v).expect("error serializes"));
            } else {
                eprintln!("error: {}", f.message());
            }
            f.code()
        }
    }
}

struct Row {
    label: String,
    computed: f64,
    reference: f64,
    tol: f64,
}

impl Row {
    fn new(label: impl Into<String>, computed: f64, reference: f64, tol: f64) -> Self {
        Row { label: label.into(), computed, reference, tol }
    }

    fn deviation(&self) -> f64 {
        (self.computed - self.reference).abs()
    }

    fn ok(&self) -> bool {
        self.deviation() <= self.tol
    }
}

fn label_code(c: Classification) -> f64 {
    match c {
        Classification::GlobalMin => 0.0,
        Classification::LocalMax => 1.0,
        Classification::LocalMin => 2.0,
        Classification::Saddle => 3.0,
        Classification::Unclassified => 4.0,
    }
}

fn reproduce_rows(id: u32) -> Result<Vec<Row>, Failure> {
    let cfg = SolverConfig::default();
    let mut rows = Vec::new();
    match id {
        1 => {
            let report = find_critical_points(&fixtures::example1(), &cfg)?;
            rows.push(Row::new("critical points", report.critical_pairs.len() as f64, 3.0, 0.0));
            let expected = [
                (0.599866, 0.098119, 1.004894, 0.112521, Classification::GlobalMin),
                (0.475231, -9.983154, -0.041044, 5.660800, Classification::LocalMax),
                (0.590128, -0.71007, -0.963843, 1.688196, Classification::LocalMin),
            ];
            for (k, (tau, sigma, x, value, label)) in expected.into_iter().enumerate() {
                let c = report
                    .critical_pairs
                    .iter()
                    .min_by(|a, b| {
                        let da = (a.zeta.sigma[0] - sigma).abs();
                        let db = (b.zeta.sigma[0] - sigma).abs();
                        da.total_cmp(&db)
                    });
                let nan = f64::NAN;
                let get = |f: &dyn Fn(&canodual::CriticalPair) -> f64| c.map_or(nan, f);
                rows.push(Row::new(format!("point {k} tau"), get(&|c| c.zeta.tau[0]), tau, 1e-4));
                rows.push(Row::new(format!("point {k} sigma"), get(&|c| c.zeta.sigma[0]), sigma, 1e-4));
                rows.push(Row::new(format!("point {k} x"), get(&|c| c.x[0]), x, 1e-4));
                rows.push(Row::new(format!("point {k} dual value"), get(&|c| c.dual_value), value, 1e-5));
                rows.push(Row::new(format!("point {k} primal value"), get(&|c| c.primal_value), value, 1e-5));
                rows.push(Row::new(
                    format!("point {k} label ({label:?})"),
                    get(&|c| label_code(c.classification)),
                    label_code(label),
                    0.0,
                ));
            }
        }
        2 => {
            let inst = fixtures::example2();
            let quartic = QuarticInstance::from_problem(&inst).ok_or(Error::ShapeMismatch)?;
            let p1 = solve_p1(&quartic, &cfg)?;
            let best = &p1.critical_pairs[0];
            rows.push(Row::new("global sigma", best.zeta.sigma[0], 19.093, 1e-2));
            rows.push(Row::new("global x1", best.x[0], 5.6, 5e-2));
            rows.push(Row::new("global x2", best.x[1], 0.67, 5e-2));
            let all = find_critical_points(&inst, &cfg)?;
            rows.push(Row::new("critical points", all.critical_pairs.len() as f64, 5.0, 0.0));
            let expected = [
                (19.093, [2.282, 33.904]),
                (14.495, [-2.32, 29.31]),
                (-13.184, [-29.99, 1.63]),
                (-16.459, [-33.27, -1.65]),
                (-139.945, [-156.76, -125.13]),
            ];
            for (sigma, eigs) in expected {
                let c = all.critical_pairs.iter().min_by(|a, b| {
                    (a.zeta.sigma[0] - sigma).abs().total_cmp(&(b.zeta.sigma[0] - sigma).abs())
                });
                rows.push(Row::new(format!("sigma {sigma}"), c.map_or(f64::NAN, |c| c.zeta.sigma[0]), sigma, 1e-2));
                let got = c.map(|c| sym_eigenvalues(&assemble_ga_matrix(&inst, &c.zeta)));
                for (k, want) in eigs.into_iter().enumerate() {
                    let v = got.as_ref().map_or(f64::NAN, |g| g[k]);
                    rows.push(Row::new(format!("sigma {sigma} G eigenvalue {k}"), v, want, 1e-1));
                }
            }
        }
        3 => {
            let mm = fixtures::example3();
            let report = solve_p2(&mm, &cfg)?;
            let best = &report.critical_pairs[0];
            rows.push(Row::new("global tau", best.zeta.tau[0], 0.749318, 1e-5));
            rows.push(Row::new("global x1", best.x[0], 0.0, 1e-5));
            rows.push(Row::new("global x2", best.x[1], -0.002734, 1e-5));
            rows.push(Row::new("dual value", best.dual_value, 0.005627, 1e-5));
            rows.push(Row::new("smoothed objective", mm.smoothed_objective(&best.x), 0.005627, 1e-5));
            let all = find_critical_points_minimax(&mm, &cfg)?;
            let second = all.critical_pairs.iter().find(|c| (c.zeta.tau[0] - 0.249308).abs() <= 1e-5);
            rows.push(Row::new("second tau", second.map_or(f64::NAN, |c| c.zeta.tau[0]), 0.249308, 1e-5));
            rows.push(Row::new("second value", second.map_or(f64::NAN, |c| c.dual_value), 2.00562, 1e-4));
            rows.push(Row::new(
                "second label (Saddle)",
                second.map_or(f64::NAN, |c| label_code(c.classification)),
                label_code(Classification::Saddle),
                0.0,
            ));
        }
        _ => unreachable!("id checked by caller"),
    }
    Ok(rows)
}

fn reproduce_cmd(id: u32) -> u8 {
    if !(1..=3).contains(&id) {
        eprintln!("error: unknown example {id}; expected 1, 2 or 3");
        return EXIT_ERROR;
    }
    let rows = match reproduce_rows(id) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("error: {}", f.message());
            return f.code();
        }
    };
    println!("{:<32} {:>16} {:>16} {:>12} {:>10}", "quantity", "computed", "reference", "deviation", "tolerance");
    let mut worst = 0.0f64;
    let mut all_ok = true;
    for r in &rows {
        let dev = r.deviation();
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
        all_ok &= r.ok();
        println!(
            "{:<32} {:>16.6} {:>16.6} {:>12.3e} {:>10.0e} {}",
            r.label,
            r.computed,
            r.reference,
            dev,
            r.tol,
            if r.ok() { "ok" } else { "MISMATCH" }
        );
    }
    println!("max deviation: {worst:.3e}");
    if all_ok {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn oracle_compare_cmd(path: &Path, tol: f64, resolution: usize) -> u8 {
    let run = || -> Result<(SolveReport, GridMin), Failure> {
        let input = load(path)?;
        let n = input.n();
        if n > MAX_GRID_DIM {
            return Err(Error::DimensionTooLarge { n }.into());
        }
        let cfg = SolverConfig::default();
        match input {
            Input::General(p) => {
                let report = solve_global(&p, &cfg)?;
                let x = &report.global_min().expect("solve_global returns a global minimizer").x;
                let r = sublevel_radius(&p).unwrap_or(1.5 * x.amax() + 1.0).max(x.amax() + 1.0).max(3.0);
                let grid = grid_global_min(&p, &vec![(-r, r); n], resolution)?;
                Ok((report, grid))
            }
            Input::Minimax(m) => {
                let report = solve_p2(&m, &cfg)?;
                let x = &report.critical_pairs[0].x;
                let r = (1.5 * x.amax() + 1.0).max(3.0);
                let grad = |y: &DVector<f64>| {
                    let (b1, b2) = m.branches(y);
                    let w2 = 1.0 / (1.0 + (m.beta * (b1 - b2)).exp());
                    let g1 = &m.a1 * y - &m.f1;
                    let g2 = &m.a2 * y - &m.f2;
                    g1 * (1.0 - w2) + g2 * w2
                };
                let grid = grid_min_fn(|y| m.smoothed_objective(y), grad, &vec![(-r, r); n], resolution)?;
                Ok((report, grid))
            }
        }
    };
    match run() {
        Ok((report, grid)) => {
            let best = report.global_min().unwrap_or(&report.critical_pairs[0]);
            let delta = (best.primal_value - grid.value).abs();
            println!("solver  value {:.9}  at {}", best.primal_value, fmt_vec(&best.x));
            println!("oracle  value {:.9}  at {}", grid.value, fmt_vec(&grid.x));
            println!("|difference| = {delta:.3e} (tolerance {tol:.1e})");
            if delta <= tol {
                println!("AGREE");
                EXIT_OK
            } else {
                println!("DISAGREE");
                EXIT_NEGATIVE
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let code = match cli.command {
        Command::Solve { path, json, specialize, all_critical, seed, starts, beta } => {
            solve_cmd(&path, json, specialize, all_critical, seed, starts, beta)
        }
        Command::CheckExistence { path, json } => check_existence_cmd(&path, json),
        Command::Reproduce { id } => reproduce_cmd(id),
        Command::OracleCompare { path, tol, resolution } => oracle_compare_cmd(&path, tol, resolution),
    };
    ExitCode::from(code)
}
