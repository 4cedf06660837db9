//! Canonical duality solver for nonconvex problems built from a quadratic, a sum of
//! double-well quartics and a log-sum-exp term:
//!
//! ```text
//! Π(x) = ½xᵀAx − fᵀx + Σ (αᵢ/2)(½xᵀBᵢx + cᵢ)² + (1/β)·log(1 + Σ exp(β(½xᵀQⱼx + dⱼ)))
//! ```
//!
//! The dual lives in ζ = (τ, σ). A critical point of the dual where
//! `G_a(ζ) = A + ΣτⱼQⱼ + ΣσᵢBᵢ` is positive definite yields the global minimizer `x = G_a⁻¹f`.

pub mod dual;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod minimax;
pub mod model;
pub mod oracle;
pub mod primal;
pub mod quartic;
pub mod solver;
mod univariate;

pub use error::{Error, Result};
pub use minimax::{parse_minimax, solve_p2, CanonicalP2, MinimaxInstance};
pub use model::{
    parse_problem, Classification, CriticalPair, DualPoint, ExistenceCheck, ExistenceVerdict, ProblemInstance,
    Region, SolveReport, SpectralData,
};
pub use quartic::{solve_p1, QuarticInstance};
pub use solver::{find_critical_points, solve_global, SolverConfig};
