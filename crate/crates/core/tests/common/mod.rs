#![allow(dead_code)]

use ssg_core::generate::{random_game_unprocessed, GeneratorParams};
use ssg_core::oracle::{solve_exact, ExactValueVector, DEFAULT_BUDGET};
use ssg_core::rng::SplitMix64;
use ssg_core::{random_game, StochasticGame, ValueVector};

/// A generated game with `n` ordinary states (plus target and sink).
pub fn game(seed: u64, n: usize) -> StochasticGame {
    random_game(&GeneratorParams::default().with_seed(seed).with_states(n))
}

pub fn raw_game(seed: u64, n: usize) -> StochasticGame {
    random_game_unprocessed(&GeneratorParams::default().with_seed(seed).with_states(n))
}

pub fn values(g: &StochasticGame) -> ExactValueVector {
    solve_exact(g, DEFAULT_BUDGET).expect("small games fit the oracle budget")
}

/// Uniform values in `[0,1]` with the terminal values fixed.
pub fn random_vector(g: &StochasticGame, seed: u64) -> ValueVector {
    let mut rng = SplitMix64::new(seed);
    let mut f: Vec<f64> = g.states().map(|_| rng.unit()).collect();
    f[g.target()] = 1.0;
    f[g.sink()] = 0.0;
    ValueVector::new(f)
}
