//! The three worked examples, embedded.

use crate::minimax::{parse_minimax, smooth_and_canonicalize, MinimaxInstance};
use crate::model::{parse_problem, ProblemInstance};

pub const EXAMPLE1_JSON: &str = include_str!("../fixtures/ex1.json");
pub const EXAMPLE2_JSON: &str = include_str!("../fixtures/ex2.json");
pub const EXAMPLE3_JSON: &str = include_str!("../fixtures/ex3.json");

/// log(1 + exp(½x² − 0.1)) + 5(x² − 1)² − 0.8x.
pub fn example1() -> ProblemInstance {
    parse_problem(EXAMPLE1_JSON).expect("embedded fixture")
}

/// Double-well with an indefinite A and B = I.
pub fn example2() -> ProblemInstance {
    parse_problem(EXAMPLE2_JSON).expect("embedded fixture")
}

/// max{x₁² + x₂² − x₂, −x₁² − x₂² + 3x₂} at β = 100.
pub fn example3() -> MinimaxInstance {
    parse_minimax(EXAMPLE3_JSON).expect("embedded fixture")
}

/// Example 3 after smoothing and whitening, in the general encoding.
pub fn example3_canonical() -> ProblemInstance {
    smooth_and_canonicalize(&example3())
        .and_then(|c| c.to_problem())
        .expect("embedded fixture")
}
