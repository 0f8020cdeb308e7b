//! Simulation-based bounded value iteration.
//!
//! Each trial samples a path from the initial state, choosing uniformly among
//! the best actions (largest `U(s,a)` for the Maximizer, smallest `L(s,a)` for
//! the Minimizer) and a successor by the transition distribution. The path is
//! cut when its state count reaches `k = 2·|Vis|`, when it hits target or
//! sink, or (by default) at a state whose bounds coincide. Bounds are then
//! recomputed backward along the path and `U` is deflated on the candidate
//! simple end components of the game restricted to the visited states.

use std::time::Instant;

use crate::flat::FlatGame;
use crate::model::{Player, StateId, StochasticGame};
use crate::par::Execution;
use crate::report::{Method, SolveReport, StopReason, Trace, TrialRow};
use crate::rng::SplitMix64;
use crate::solve::{deflate_phase, Bounds, DeflateStats};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SuccessorPolicy {
    /// `s'` with probability `δ(s,a,s')`.
    #[default]
    Transition,
    /// `s'` with probability proportional to `δ(s,a,s')·(U(s') − L(s'))`,
    /// falling back to `δ` when every weight is zero.
    GapWeighted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrtdpOptions {
    pub epsilon: f64,
    pub seed: u64,
    pub max_trials: u64,
    pub successor: SuccessorPolicy,
    /// Also end a path at states with `U(s) = L(s)`.
    pub stop_at_converged: bool,
    pub trace: bool,
}

impl Default for BrtdpOptions {
    fn default() -> Self {
        BrtdpOptions {
            epsilon: 1e-6,
            seed: 0,
            max_trials: 1_000_000,
            successor: SuccessorPolicy::Transition,
            stop_at_converged: true,
            trace: false,
        }
    }
}

impl BrtdpOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// Visited states, bounds over the whole game, and the generator.
#[derive(Clone, Debug)]
pub struct ExplorationState {
    visited: Vec<bool>,
    order: Vec<StateId>,
    pub bounds: Bounds,
    rng: SplitMix64,
}

impl ExplorationState {
    /// Fresh bounds, `Vis = {s₀}`.
    pub fn new(flat: &FlatGame, seed: u64) -> Self {
        let mut ex = ExplorationState {
            visited: vec![false; flat.len()],
            order: Vec::new(),
            bounds: Bounds::initial(flat),
            rng: SplitMix64::new(seed),
        };
        ex.visit(flat.initial());
        ex
    }

    fn visit(&mut self, s: StateId) {
        if !self.visited[s] {
            self.visited[s] = true;
            self.order.push(s);
        }
    }

    pub fn is_visited(&self, s: StateId) -> bool {
        self.visited[s]
    }

    pub fn visited_count(&self) -> usize {
        self.order.len()
    }

    /// Visited states in ascending order.
    pub fn visited(&self) -> Vec<StateId> {
        let mut v = self.order.clone();
        v.sort_unstable();
        v
    }
}

/// `s₀ a₀ s₁ … s_ℓ`: `actions[i]` (an index within the state) was played at
/// `states[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationPath {
    pub states: Vec<StateId>,
    pub actions: Vec<usize>,
}

impl SimulationPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("paths start at the initial state")
    }
}

/// Actions of `s` attaining `max_a U(s,a)` (Maximizer) or `min_a L(s,a)`
/// (Minimizer), compared exactly.
pub fn best_actions(flat: &FlatGame, b: &Bounds, s: StateId) -> Vec<usize> {
    let (f, sign) = match flat.owner(s) {
        Player::Max => (b.upper.as_slice(), 1.0),
        Player::Min => (b.lower.as_slice(), -1.0),
    };
    let vals: Vec<f64> = flat.actions(s).map(|a| sign * flat.action_value(f, a)).collect();
    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..vals.len()).filter(|&i| vals[i] == best).collect()
}

fn sample_successor(flat: &FlatGame, b: &Bounds, action: usize, policy: SuccessorPolicy, rng: &mut SplitMix64) -> StateId {
    let (to, p) = flat.edges(action);
    let pick = |weights: &mut dyn Iterator<Item = f64>, total: f64, u: f64| {
        let mut acc = 0.0;
        let x = u * total;
        for (i, w) in weights.enumerate() {
            acc += w;
            if x < acc {
                return to[i];
            }
        }
        *to.last().expect("distribution is nonempty")
    };
    let u = rng.unit();
    if policy == SuccessorPolicy::GapWeighted {
        let total: f64 = to.iter().zip(p).map(|(t, w)| w * b.gap(*t)).sum();
        if total > 0.0 {
            return pick(&mut to.iter().zip(p).map(|(t, w)| w * b.gap(*t)), total, u);
        }
    }
    pick(&mut p.iter().copied(), 1.0, u)
}

/// Samples one path of at most `k` states and adds its states to `Vis`.
pub fn simulate_path(
    flat: &FlatGame,
    ex: &mut ExplorationState,
    k: usize,
    policy: SuccessorPolicy,
    stop_at_converged: bool,
) -> SimulationPath {
    assert!(k >= 1, "path bound must be positive");
    let mut s = flat.initial();
    let mut path = SimulationPath { states: vec![s], actions: Vec::new() };
    ex.visit(s);
    loop {
        let terminal = s == flat.target() || s == flat.sink();
        if terminal || (stop_at_converged && ex.bounds.gap(s) == 0.0) || path.states.len() >= k {
            return path;
        }
        let best = best_actions(flat, &ex.bounds, s);
        let a = best[ex.rng.below(best.len())];
        s = sample_successor(flat, &ex.bounds, flat.action_id(s, a), policy, &mut ex.rng);
        path.actions.push(a);
        path.states.push(s);
        ex.visit(s);
    }
}

/// Recomputes `L` and `U` at the path states, last to first, over all
/// available actions.
pub fn update_along_path(flat: &FlatGame, path: &SimulationPath, b: &mut Bounds) {
    for &s in path.states.iter().rev() {
        b.update_state(flat, s);
    }
}

/// Deflates `U` on the candidate simple end components of the game restricted
/// to `Vis` whose states are all visited.
pub fn deflate_visited(flat: &FlatGame, ex: &mut ExplorationState) -> DeflateStats {
    let (local, global) = flat.restricted(&ex.order);
    let lower: Vec<f64> = global.iter().map(|&s| ex.bounds.lower[s]).collect();
    let mut upper: Vec<f64> = global.iter().map(|&s| ex.bounds.upper[s]).collect();
    let (target, sink) = (flat.target(), flat.sink());
    let visited = &ex.visited;
    let stats = deflate_phase(&local, &lower, &mut upper, |t| {
        t.states.iter().all(|&i| {
            let s = global[i];
            visited[s] && s != target && s != sink
        })
    });
    if stats.calls > 0 {
        for (i, &s) in global.iter().enumerate() {
            ex.bounds.upper[s] = upper[i];
        }
    }
    stats
}

/// Runs BRTDP, calling `observe(trial, state)` after initialization and after
/// every trial.
pub fn solve_brtdp_observed(
    game: &StochasticGame,
    opts: &BrtdpOptions,
    mut observe: impl FnMut(u64, &ExplorationState),
) -> SolveReport {
    assert!(opts.epsilon > 0.0, "epsilon must be positive");
    let start = Instant::now();
    let flat = game.flat();
    let s0 = flat.initial();
    let mut ex = ExplorationState::new(flat, opts.seed);
    let mut rows = Vec::new();
    let (mut trial, mut deflate_calls, mut msecs_last) = (0u64, 0u64, 0usize);
    let mut record = |trial: u64, ex: &ExplorationState| {
        if opts.trace {
            rows.push(TrialRow {
                trial,
                visited: ex.visited_count(),
                lower: ex.bounds.lower[s0],
                upper: ex.bounds.upper[s0],
            });
        }
        observe(trial, ex);
    };
    record(0, &ex);
    let stop = loop {
        if ex.bounds.gap(s0) < opts.epsilon {
            break StopReason::Converged;
        }
        if trial >= opts.max_trials {
            break StopReason::IterationLimit;
        }
        trial += 1;
        let k = 2 * ex.visited_count();
        let path = simulate_path(flat, &mut ex, k, opts.successor, opts.stop_at_converged);
        update_along_path(flat, &path, &mut ex.bounds);
        let stats = deflate_visited(flat, &mut ex);
        deflate_calls += stats.calls;
        msecs_last = stats.msecs;
        record(trial, &ex);
    };
    SolveReport {
        method: Method::Brtdp,
        iterations: trial,
        bounds_at_initial: (ex.bounds.lower[s0], ex.bounds.upper[s0]),
        epsilon: opts.epsilon,
        converged: stop == StopReason::Converged,
        stop,
        deflate_calls,
        msec_count_last: msecs_last,
        explored_states: ex.visited_count(),
        wall_time: start.elapsed(),
        trace: opts.trace.then_some(Trace::Trials(rows)),
        bounds: ex.bounds,
    }
}

pub fn solve_brtdp(game: &StochasticGame, opts: &BrtdpOptions) -> SolveReport {
    solve_brtdp_observed(game, opts, |_, _| {})
}

/// Independent runs, one per seed, in seed order.
pub fn solve_brtdp_seeds(game: &StochasticGame, opts: &BrtdpOptions, seeds: &[u64], exec: Execution) -> Vec<SolveReport> {
    exec.map(seeds, |&seed| solve_brtdp(game, &BrtdpOptions { seed, ..*opts }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{fig1, fig2_collapsed, fig2_mdp, fig3};
    use crate::model::ratio;

    #[test]
    fn target_only_path() {
        let g = fig1();
        let mut b = crate::model::GameBuilder::new();
        let one = b.state("one", Player::Max);
        let zero = b.state("zero", Player::Min);
        b.initial(one).target(one).sink(zero);
        let g2 = b.build().unwrap();
        let mut ex = ExplorationState::new(g2.flat(), 1);
        let path = simulate_path(g2.flat(), &mut ex, 2, SuccessorPolicy::Transition, true);
        assert_eq!(path.states, vec![one]);
        assert!(solve_brtdp(&g2, &BrtdpOptions::default()).converged);
        assert!(solve_brtdp(&g, &BrtdpOptions::default()).converged);
    }

    #[test]
    fn fig2_path_respects_bound() {
        let g = fig2_mdp();
        for seed in 0..20 {
            let mut ex = ExplorationState::new(g.flat(), seed);
            let path = simulate_path(g.flat(), &mut ex, 6, SuccessorPolicy::Transition, true);
            assert!(path.len() <= 6);
            assert_eq!(path.actions.len() + 1, path.len());
        }
    }

    #[test]
    fn same_seed_same_path() {
        let g = fig3(ratio(3, 10), ratio(6, 10));
        let run = || {
            let mut ex = ExplorationState::new(g.flat(), 99);
            simulate_path(g.flat(), &mut ex, 8, SuccessorPolicy::Transition, true)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn backward_update_on_collapsed() {
        let g = fig2_collapsed();
        let st = g.state_id("st").unwrap();
        let path = SimulationPath { states: vec![st, g.target()], actions: vec![0] };
        let mut b = Bounds::initial(&g);
        update_along_path(g.flat(), &path, &mut b);
        assert!((b.lower[st] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn converges_on_examples() {
        for seed in 0..5 {
            let r = solve_brtdp(&fig1(), &BrtdpOptions::default().with_seed(seed));
            assert!(r.converged && r.lower() <= 0.5 + 1e-12 && 0.5 - 1e-12 <= r.upper());
            let r = solve_brtdp(&fig3(ratio(3, 10), ratio(6, 10)), &BrtdpOptions::default().with_seed(seed));
            assert!(r.converged && r.lower() <= 0.3 + 1e-12 && 0.3 - 1e-12 <= r.upper());
        }
    }
}
