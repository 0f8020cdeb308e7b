//! Uniform solver dispatch and the repetition harness behind `ssg bench`.

use std::time::Duration;

use crate::brtdp::{solve_brtdp, BrtdpOptions, SuccessorPolicy};
use crate::model::StochasticGame;
use crate::par::Execution;
use crate::report::{fmt_sig, Method, SolveReport};
use crate::solve::{solve_bvi, solve_naive_bvi, solve_vi_classic, BviOptions, ViOptions};

/// Everything needed to run one solver on one game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// ε for the bounded methods, δ for classic value iteration.
    pub epsilon: f64,
    pub deflate_every: u64,
    /// Iterations, or trials for BRTDP.
    pub max_iters: u64,
    pub seed: u64,
    pub successor: SuccessorPolicy,
    pub stop_at_converged: bool,
    pub all_states: bool,
    pub trace: bool,
    pub exec: Execution,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        SolverConfig {
            method,
            epsilon: 1e-6,
            deflate_every: 1,
            max_iters: match method {
                Method::Brtdp => BrtdpOptions::default().max_trials,
                _ => BviOptions::default().max_iters,
            },
            seed: 0,
            successor: SuccessorPolicy::Transition,
            stop_at_converged: true,
            all_states: false,
            trace: false,
            exec: Execution::Sequential,
        }
    }

    pub fn run(&self, game: &StochasticGame) -> SolveReport {
        let bvi = BviOptions {
            epsilon: self.epsilon,
            deflate_every: self.deflate_every,
            max_iters: self.max_iters,
            all_states: self.all_states,
            trace: self.trace,
            exec: self.exec,
        };
        match self.method {
            Method::Vi => solve_vi_classic(
                game,
                &ViOptions { delta: self.epsilon, max_iters: self.max_iters, trace: self.trace, exec: self.exec },
            ),
            Method::BviNaive => solve_naive_bvi(game, &bvi),
            Method::Bvi => solve_bvi(game, &bvi),
            Method::Brtdp => solve_brtdp(
                game,
                &BrtdpOptions {
                    epsilon: self.epsilon,
                    seed: self.seed,
                    max_trials: self.max_iters,
                    successor: self.successor,
                    stop_at_converged: self.stop_at_converged,
                    trace: self.trace,
                },
            ),
        }
    }
}

/// Median of a nonempty sample; the mean of the two middle values for even
/// sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One `(model, method)` line of a benchmark table.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub method: Method,
    pub reps: usize,
    pub median_time: Duration,
    pub iterations: f64,
    pub explored: f64,
    pub msecs: f64,
    pub converged: usize,
    pub status: String,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "model,method,reps,median_ms,iterations,explored,msecs,converged,status";

    /// A row for a model that could not be run.
    pub fn failed(model: &str, method: Method, reps: usize, message: &str) -> Self {
        BenchRow {
            model: model.to_string(),
            method,
            reps,
            median_time: Duration::ZERO,
            iterations: 0.0,
            explored: 0.0,
            msecs: 0.0,
            converged: 0,
            status: format!("error: {}", message.replace([',', '\n'], " ")),
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.model,
            self.method,
            self.reps,
            fmt_sig(self.median_time.as_secs_f64() * 1e3),
            fmt_sig(self.iterations),
            fmt_sig(self.explored),
            fmt_sig(self.msecs),
            self.converged,
            self.status
        )
    }
}

/// Runs `config` `reps` times on `game`. BRTDP repetition `i` uses seed
/// `config.seed + i`; the other methods are deterministic and rerun as is.
/// Repetitions are spread over threads according to `exec`.
pub fn bench_game(model: &str, game: &StochasticGame, config: &SolverConfig, reps: usize, exec: Execution) -> BenchRow {
    assert!(reps >= 1, "at least one repetition");
    let reps_idx: Vec<u64> = (0..reps as u64).collect();
    let reports = exec.map(&reps_idx, |&i| {
        let mut c = *config;
        c.trace = false;
        if c.method == Method::Brtdp {
            c.seed = config.seed.wrapping_add(i);
        }
        c.run(game)
    });
    summarize(model, config.method, &reports)
}

pub fn summarize(model: &str, method: Method, reports: &[SolveReport]) -> BenchRow {
    let col = |f: &dyn Fn(&SolveReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
    let converged = reports.iter().filter(|r| r.converged).count();
    let status = if method == Method::Vi {
        "unverified"
    } else if converged == reports.len() {
        "converged"
    } else {
        "limit"
    };
    BenchRow {
        model: model.to_string(),
        method,
        reps: reports.len(),
        median_time: Duration::from_secs_f64(col(&|r| r.wall_time.as_secs_f64())),
        iterations: col(&|r| r.iterations as f64),
        explored: col(&|r| r.explored_states as f64),
        msecs: col(&|r| r.msec_count_last as f64),
        converged,
        status: status.to_string(),
    }
}
