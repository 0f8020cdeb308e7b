//! Guaranteed-precision reachability values for simple stochastic games.
//!
//! The crate provides an explicit game representation with exact rational
//! transition probabilities, a line-oriented model format, structural analysis
//! (SCCs, maximal end components, simple end components), and four solvers:
//!
//! * classic value iteration with the small-change stopping rule ([`solve::solve_vi_classic`]),
//! * naive bounded value iteration ([`solve::solve_naive_bvi`]),
//! * bounded value iteration with deflation of simple end components ([`solve::solve_bvi`]),
//! * the simulation-based asynchronous variant ([`brtdp::solve_brtdp`]).
//!
//! A brute-force exact oracle ([`oracle`]) enumerates memoryless strategies and
//! solves the induced Markov chains in rational arithmetic; it backs the
//! property suites and the `--oracle-check` mode of the command-line tool.

pub mod bench;
pub mod brtdp;
pub mod builtins;
pub mod flat;
pub mod format;
pub mod generate;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod par;
pub mod report;
pub mod rng;
pub mod solve;

pub use brtdp::{solve_brtdp, BrtdpOptions, SuccessorPolicy};
pub use builtins::{builtin_game, builtin_from_spec};
pub use flat::FlatGame;
pub use format::{parse_model, serialize_model, ParseError};
pub use generate::{random_game, GeneratorParams};
pub use graph::{EndComponent, ExitValue};
pub use model::{
    ratio, GameBuilder, ModelError, Player, StateId, StochasticGame, Strategy, ValidationReport,
    ValueVector,
};
pub use oracle::{solve_exact, ExactValueVector, OracleError};
pub use par::Execution;
pub use report::{Method, SolveReport, StopReason, Trace};
pub use solve::{solve_bvi, solve_naive_bvi, solve_vi_classic, Bounds, BviOptions};
