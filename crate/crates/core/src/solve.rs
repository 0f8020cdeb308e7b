//! Synchronous value iteration: the classic small-change variant, naive
//! bounded iteration, and bounded iteration with deflation.

use std::time::Instant;

use thiserror::Error;

use crate::flat::FlatGame;
use crate::graph::{best_exit, find_msec, EndComponent};
use crate::model::{Action, Player, StateId, StochasticGame, Strategy, ValueVector};
use crate::par::Execution;
use crate::report::{IterRow, Method, SolveReport, StopReason, Trace};

/// Lower and upper bound vectors.
///
/// Also remembers, per Maximizer state, the action that realized the most
/// recent strict increase of the lower bound; [`extract_strategies`] uses it.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: ValueVector,
    pub upper: ValueVector,
    lower_witness: Vec<Option<usize>>,
}

impl Bounds {
    /// `L = 0` except `L(target) = 1`; `U = 1` except `U(sink) = 0`.
    pub fn initial(game: &(impl AsRef<FlatGame> + ?Sized)) -> Self {
        let flat = game.as_ref();
        let n = flat.len();
        let mut lower = ValueVector::constant(n, 0.0);
        let mut upper = ValueVector::constant(n, 1.0);
        lower[flat.target()] = 1.0;
        upper[flat.sink()] = 0.0;
        Bounds { lower, upper, lower_witness: vec![None; n] }
    }

    pub fn from_vectors(lower: ValueVector, upper: ValueVector) -> Self {
        assert_eq!(lower.len(), upper.len());
        let n = lower.len();
        Bounds { lower, upper, lower_witness: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn gap(&self, s: StateId) -> f64 {
        self.upper[s] - self.lower[s]
    }

    pub fn max_gap(&self) -> f64 {
        (0..self.len()).map(|s| self.gap(s)).fold(0.0, f64::max)
    }

    /// `L ≤ U` pointwise.
    pub fn is_ordered(&self) -> bool {
        self.lower.iter().zip(self.upper.iter()).all(|(l, u)| l <= u)
    }

    /// Recomputes `L(s)` and `U(s)` by one Bellman step over all actions.
    pub(crate) fn update_state(&mut self, flat: &FlatGame, s: StateId) {
        let new = flat.bellman_at(self.lower.as_slice(), s);
        if new > self.lower[s] && flat.owner(s) == Player::Max {
            self.lower_witness[s] = Some(arg_best(flat, self.lower.as_slice(), s, Player::Max));
        }
        self.lower[s] = new;
        self.upper[s] = flat.bellman_at(self.upper.as_slice(), s);
    }
}

/// Index of the first action of `s` with the best value of `f(s,·)` for `player`.
fn arg_best(flat: &FlatGame, f: &[f64], s: StateId, player: Player) -> usize {
    let mut best = (0, f64::NAN);
    for (i, a) in flat.actions(s).enumerate() {
        let v = flat.action_value(f, a);
        let better = match player {
            Player::Max => v > best.1,
            Player::Min => v < best.1,
        };
        if i == 0 || better {
            best = (i, v);
        }
    }
    best.0
}

/// One synchronous Bellman update: `f'(s) = max/min_a f(s,a)`.
pub fn bellman_update(game: &(impl AsRef<FlatGame> + ?Sized), f: &ValueVector) -> ValueVector {
    bellman_update_with(game.as_ref(), f, Execution::Sequential)
}

pub fn bellman_update_with(flat: &FlatGame, f: &ValueVector, exec: Execution) -> ValueVector {
    let mut out = vec![0.0; f.len()];
    flat.bellman(f.as_slice(), &mut out, exec);
    ValueVector::new(out)
}

/// Lowers every entry of `t` to the Maximizer's best exit of `t` under `f`
/// (computed once, from the input). Returns whether an entry changed.
pub fn deflate_in_place(flat: &FlatGame, t: &[StateId], f: &mut [f64]) -> bool {
    let exit = best_exit(flat, t, f, Player::Max).value;
    let mut changed = false;
    for &s in t {
        if exit < f[s] {
            f[s] = exit;
            changed = true;
        }
    }
    changed
}

/// `f(s) ← min(f(s), exit_max^f(T))` for `s ∈ T`.
pub fn deflate(game: &(impl AsRef<FlatGame> + ?Sized), t: &EndComponent, f: &ValueVector) -> ValueVector {
    let mut out = f.clone();
    deflate_in_place(game.as_ref(), &t.states, out.as_mut_slice());
    out
}

/// Counters of one deflating phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeflateStats {
    /// DEFLATE applications.
    pub calls: u64,
    /// Candidate components deflated (never `{target}` or `{sink}`).
    pub msecs: usize,
}

/// Deflates `upper` on every candidate simple end component of `lower`
/// accepted by `keep`.
pub fn deflate_phase(
    flat: &FlatGame,
    lower: &[f64],
    upper: &mut [f64],
    keep: impl Fn(&EndComponent) -> bool,
) -> DeflateStats {
    let mut stats = DeflateStats::default();
    for t in find_msec(flat, lower) {
        if !keep(&t) {
            continue;
        }
        stats.msecs += 1;
        stats.calls += 1;
        deflate_in_place(flat, &t.states, upper);
    }
    stats
}

/// Working buffers for repeated synchronous updates.
struct Stepper<'g> {
    flat: &'g FlatGame,
    exec: Execution,
    scratch: Vec<f64>,
}

impl<'g> Stepper<'g> {
    fn new(flat: &'g FlatGame, exec: Execution) -> Self {
        Stepper { flat, exec, scratch: vec![0.0; flat.len()] }
    }

    /// `L ← B(L)`; returns the max-norm change.
    fn lower(&mut self, b: &mut Bounds) -> f64 {
        self.flat.bellman(b.lower.as_slice(), &mut self.scratch, self.exec);
        let mut delta: f64 = 0.0;
        for s in 0..self.scratch.len() {
            let (old, new) = (b.lower[s], self.scratch[s]);
            if new > old {
                delta = delta.max(new - old);
                if self.flat.owner(s) == Player::Max {
                    b.lower_witness[s] = Some(arg_best(self.flat, b.lower.as_slice(), s, Player::Max));
                }
            } else {
                delta = delta.max(old - new);
            }
        }
        std::mem::swap(b.lower.as_mut_vec(), &mut self.scratch);
        delta
    }

    fn upper(&mut self, b: &mut Bounds) {
        self.flat.bellman(b.upper.as_slice(), &mut self.scratch, self.exec);
        std::mem::swap(b.upper.as_mut_vec(), &mut self.scratch);
    }

    fn bvi(&mut self, b: &mut Bounds, do_deflate: bool) -> DeflateStats {
        self.lower(b);
        self.upper(b);
        if do_deflate {
            let (target, sink) = (self.flat.target(), self.flat.sink());
            deflate_phase(self.flat, b.lower.as_slice(), b.upper.as_mut_slice(), |t| {
                !t.is_singleton(target) && !t.is_singleton(sink)
            })
        } else {
            DeflateStats::default()
        }
    }
}

/// One bounded iteration step: Bellman on both bounds, then (optionally)
/// deflation of `U` on every candidate simple end component of the new `L`.
pub fn bvi_update(game: &(impl AsRef<FlatGame> + ?Sized), b: &Bounds, do_deflate: bool) -> (Bounds, DeflateStats) {
    let mut next = b.clone();
    let stats = Stepper::new(game.as_ref(), Execution::Sequential).bvi(&mut next, do_deflate);
    (next, stats)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BviOptions {
    pub epsilon: f64,
    /// Deflate in iterations whose 1-based index is a multiple of this.
    pub deflate_every: u64,
    pub max_iters: u64,
    /// Require `U − L < ε` at every state instead of only the initial one.
    pub all_states: bool,
    pub trace: bool,
    pub exec: Execution,
}

impl Default for BviOptions {
    fn default() -> Self {
        BviOptions {
            epsilon: 1e-6,
            deflate_every: 1,
            max_iters: 10_000_000,
            all_states: false,
            trace: false,
            exec: Execution::Sequential,
        }
    }
}

impl BviOptions {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: u64) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }
}

fn iterate_bounds(
    game: &StochasticGame,
    opts: &BviOptions,
    deflating: bool,
    mut observe: impl FnMut(u64, &Bounds),
) -> SolveReport {
    assert!(opts.epsilon > 0.0, "epsilon must be positive");
    assert!(opts.deflate_every >= 1, "deflate_every must be at least 1");
    let start = Instant::now();
    let flat = game.flat();
    let s0 = flat.initial();
    let mut stepper = Stepper::new(flat, opts.exec);
    let mut b = Bounds::initial(flat);
    let mut rows = Vec::new();
    let (mut iter, mut deflate_calls, mut msecs_last) = (0u64, 0u64, 0usize);
    let mut record = |iter: u64, b: &Bounds, deflate_calls: u64| {
        if opts.trace {
            rows.push(IterRow { iter, lower: b.lower[s0], upper: b.upper[s0], deflate_calls });
        }
        observe(iter, b);
    };
    record(0, &b, 0);
    let stop = loop {
        let done = if opts.all_states { b.max_gap() < opts.epsilon } else { b.gap(s0) < opts.epsilon };
        if done {
            break StopReason::Converged;
        }
        if iter >= opts.max_iters {
            break StopReason::IterationLimit;
        }
        iter += 1;
        let do_deflate = deflating && iter % opts.deflate_every == 0;
        let stats = stepper.bvi(&mut b, do_deflate);
        deflate_calls += stats.calls;
        if do_deflate {
            msecs_last = stats.msecs;
        }
        record(iter, &b, deflate_calls);
    };
    SolveReport {
        method: if deflating { Method::Bvi } else { Method::BviNaive },
        iterations: iter,
        bounds_at_initial: (b.lower[s0], b.upper[s0]),
        epsilon: opts.epsilon,
        converged: stop == StopReason::Converged,
        stop,
        deflate_calls,
        msec_count_last: msecs_last,
        explored_states: flat.len(),
        wall_time: start.elapsed(),
        trace: opts.trace.then_some(Trace::Iterations(rows)),
        bounds: b,
    }
}

/// Bounded value iteration with deflation.
pub fn solve_bvi(game: &StochasticGame, opts: &BviOptions) -> SolveReport {
    iterate_bounds(game, opts, true, |_, _| {})
}

/// [`solve_bvi`], calling `observe(iteration, bounds)` after initialization
/// and after every iteration.
pub fn solve_bvi_observed(game: &StochasticGame, opts: &BviOptions, observe: impl FnMut(u64, &Bounds)) -> SolveReport {
    iterate_bounds(game, opts, true, observe)
}

/// Bounded value iteration without deflation; `deflate_every` is ignored.
pub fn solve_naive_bvi(game: &StochasticGame, opts: &BviOptions) -> SolveReport {
    iterate_bounds(game, opts, false, |_, _| {})
}

pub fn solve_naive_bvi_observed(
    game: &StochasticGame,
    opts: &BviOptions,
    observe: impl FnMut(u64, &Bounds),
) -> SolveReport {
    iterate_bounds(game, opts, false, observe)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViOptions {
    pub delta: f64,
    pub max_iters: u64,
    pub trace: bool,
    pub exec: Execution,
}

impl Default for ViOptions {
    fn default() -> Self {
        ViOptions { delta: 1e-6, max_iters: 10_000_000, trace: false, exec: Execution::Sequential }
    }
}

/// Lower iteration only, stopped when the max-norm change drops below
/// `delta`. The upper bound stays at its initial value and the result never
/// counts as converged: the stopping rule certifies nothing.
pub fn solve_vi_classic(game: &StochasticGame, opts: &ViOptions) -> SolveReport {
    assert!(opts.delta > 0.0, "delta must be positive");
    let start = Instant::now();
    let flat = game.flat();
    let s0 = flat.initial();
    let mut stepper = Stepper::new(flat, opts.exec);
    let mut b = Bounds::initial(flat);
    let mut rows = Vec::new();
    let mut record = |iter: u64, b: &Bounds| {
        if opts.trace {
            rows.push(IterRow { iter, lower: b.lower[s0], upper: b.upper[s0], deflate_calls: 0 });
        }
    };
    record(0, &b);
    let mut iter = 0u64;
    let stop = loop {
        if iter >= opts.max_iters {
            break StopReason::IterationLimit;
        }
        iter += 1;
        let change = stepper.lower(&mut b);
        record(iter, &b);
        if change < opts.delta {
            break StopReason::DeltaReached;
        }
    };
    SolveReport {
        method: Method::Vi,
        iterations: iter,
        bounds_at_initial: (b.lower[s0], b.upper[s0]),
        epsilon: opts.delta,
        converged: false,
        stop,
        deflate_calls: 0,
        msec_count_last: 0,
        explored_states: flat.len(),
        wall_time: start.elapsed(),
        trace: opts.trace.then_some(Trace::Iterations(rows)),
        bounds: b,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CollapseError {
    #[error("collapsing requires a certified simple end component")]
    NotCertified,
    #[error("an end component containing the target or the sink cannot be collapsed")]
    ContainsTerminal,
    #[error("not an end component of the game")]
    NotAnEndComponent,
}

/// Merges `T` into a single Maximizer state.
///
/// The new state is named by concatenating the member names (in index order)
/// and takes the place of the lowest-index member. If some Maximizer member
/// has a `T`-leaving action, the new state offers exactly those actions;
/// otherwise it offers every staying action, which become self-loops.
/// Transition mass into `T` is redirected to the new state. Labels occurring
/// more than once at the new state are suffixed with `@origin`.
///
/// `certified` must only be `true` when `T` is known to be a simple end
/// component (for instance checked by the exact oracle, or any end component
/// of an MDP).
pub fn collapse_sec(game: &StochasticGame, t: &EndComponent, certified: bool) -> Result<StochasticGame, CollapseError> {
    if !certified {
        return Err(CollapseError::NotCertified);
    }
    if t.contains(game.target()) || t.contains(game.sink()) {
        return Err(CollapseError::ContainsTerminal);
    }
    if !t.is_valid_in(game) {
        return Err(CollapseError::NotAnEndComponent);
    }
    let rep = t.states[0];
    let mut index = vec![usize::MAX; game.len()];
    let mut next = 0;
    for s in game.states() {
        if !t.contains(s) || s == rep {
            index[s] = next;
            next += 1;
        }
    }
    let map = |s: StateId| if t.contains(s) { index[rep] } else { index[s] };
    let remap = |a: &Action, label: String| {
        let mut dist: Vec<(StateId, _)> = Vec::with_capacity(a.distribution.len());
        for (to, p) in &a.distribution {
            let to = map(*to);
            match dist.iter_mut().find(|(x, _)| *x == to) {
                Some((_, q)) => *q += p,
                None => dist.push((to, p.clone())),
            }
        }
        Action::new(label, dist)
    };

    let leaves = |a: &Action| a.successors().any(|x| !t.contains(x));
    let members = || t.states.iter().flat_map(|&s| game.actions(s).iter().map(move |a| (s, a)));
    let max_exits: Vec<(StateId, &Action)> = members().filter(|(s, a)| game.owner(*s) == Player::Max && leaves(a)).collect();
    let chosen = if max_exits.is_empty() { members().filter(|(_, a)| !leaves(a)).collect() } else { max_exits };
    let label_count = |l: &str| chosen.iter().filter(|(_, a)| a.label == l).count();
    let merged: Vec<Action> = chosen
        .iter()
        .map(|(s, a)| {
            let label =
                if label_count(&a.label) > 1 { format!("{}@{}", a.label, game.name(*s)) } else { a.label.clone() };
            remap(a, label)
        })
        .collect();

    let mut merged_name: String = t.states.iter().map(|&s| game.name(s)).collect();
    while game.states().any(|s| !t.contains(s) && game.name(s) == merged_name) {
        merged_name.push('\'');
    }
    let mut names = Vec::with_capacity(next);
    let mut owners = Vec::with_capacity(next);
    let mut actions = Vec::with_capacity(next);
    let mut merged = Some(merged);
    for s in game.states().filter(|&s| index[s] != usize::MAX) {
        if s == rep {
            names.push(merged_name.clone());
            owners.push(Player::Max);
            actions.push(merged.take().expect("single representative"));
        } else {
            names.push(game.name(s).to_string());
            owners.push(game.owner(s));
            actions.push(game.actions(s).iter().map(|a| remap(a, a.label.clone())).collect());
        }
    }
    Ok(StochasticGame::from_parts(names, owners, actions, map(game.initial()), map(game.target()), map(game.sink())))
}

/// Memoryless strategies read off the bounds. The Maximizer plays the action
/// that realized the last strict increase of `L(s)` (falling back to the first
/// maximizer of `L(s,·)`), the Minimizer the first minimizer of `U(s,·)`.
pub fn extract_strategies(game: &(impl AsRef<FlatGame> + ?Sized), b: &Bounds) -> (Strategy, Strategy) {
    let flat = game.as_ref();
    let n = flat.len();
    let mut max_choice = vec![None; n];
    let mut min_choice = vec![None; n];
    for s in 0..n {
        match flat.owner(s) {
            Player::Max => {
                max_choice[s] = Some(
                    b.lower_witness
                        .get(s)
                        .copied()
                        .flatten()
                        .unwrap_or_else(|| arg_best(flat, b.lower.as_slice(), s, Player::Max)),
                )
            }
            Player::Min => min_choice[s] = Some(arg_best(flat, b.upper.as_slice(), s, Player::Min)),
        }
    }
    (Strategy::new(Player::Max, max_choice), Strategy::new(Player::Min, min_choice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{fig1, fig2_collapsed, fig2_mdp, fig3};
    use crate::graph::mec_decomposition;
    use crate::model::ratio;

    fn id(g: &StochasticGame, name: &str) -> StateId {
        g.state_id(name).unwrap()
    }

    #[test]
    fn fig2_collapsed_iterates() {
        let g = fig2_collapsed();
        let st = id(&g, "st");
        let mut b = Bounds::initial(&g);
        let expected = [(1.0 / 3.0, 2.0 / 3.0), (4.0 / 9.0, 5.0 / 9.0), (13.0 / 27.0, 14.0 / 27.0)];
        for (l, u) in expected {
            b.lower = bellman_update(&g, &b.lower);
            b.upper = bellman_update(&g, &b.upper);
            assert!((b.lower[st] - l).abs() <= 1e-12);
            assert!((b.upper[st] - u).abs() <= 1e-12);
        }
    }

    #[test]
    fn deflate_examples() {
        let g = fig2_mdp();
        let t = mec_decomposition(&g).into_iter().find(|t| t.len() == 2).unwrap();
        let u = Bounds::initial(&g).upper;
        let d = deflate(&g, &t, &u);
        for s in ["s", "t"] {
            assert!((d[id(&g, s)] - 2.0 / 3.0).abs() < 1e-15);
        }
        let mut half = d.clone();
        half[id(&g, "s")] = 0.5;
        half[id(&g, "t")] = 0.5;
        assert_eq!(deflate(&g, &t, &half), half);
        let (b, stats) = bvi_update(&g, &Bounds::initial(&g), true);
        assert_eq!(stats.msecs, 1);
        assert!((b.upper[id(&g, "s")] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn naive_stalls_on_fig2() {
        let g = fig2_mdp();
        let r = solve_naive_bvi(&g, &BviOptions::default().with_max_iters(1000));
        assert!(!r.converged);
        assert_eq!(r.stop, StopReason::IterationLimit);
        assert_eq!(r.bounds.upper[id(&g, "s")], 1.0);
        assert_eq!(r.bounds.upper[id(&g, "t")], 1.0);
    }

    #[test]
    fn deflating_converges_on_examples() {
        let g = fig2_mdp();
        let r = solve_bvi(&g, &BviOptions::default());
        assert!(r.converged && r.lower() <= 0.5 && 0.5 <= r.upper() && r.gap() < 1e-6);
        let g = fig3(ratio(3, 10), ratio(6, 10));
        let r = solve_bvi(&g, &BviOptions::default());
        assert!(r.converged && r.lower() <= 0.3 + 1e-12 && 0.3 - 1e-12 <= r.upper());
        let r = solve_bvi(&fig1(), &BviOptions::default());
        assert!(r.converged && (r.estimate() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn collapse_fig2() {
        let g = fig2_mdp();
        let t = mec_decomposition(&g).into_iter().find(|t| t.len() == 2).unwrap();
        assert_eq!(collapse_sec(&g, &t, false), Err(CollapseError::NotCertified));
        assert_eq!(collapse_sec(&g, &t, true).unwrap(), fig2_collapsed());
    }

    #[test]
    fn strategies_on_examples() {
        let g = fig3(ratio(3, 10), ratio(6, 10));
        let r = solve_bvi(&g, &BviOptions::default());
        let (_, tau) = extract_strategies(&g, &r.bounds);
        assert_eq!(tau.label(&g, id(&g, "p")), Some("a"));
        let g = fig1();
        let r = solve_bvi(&g, &BviOptions::default());
        let (sigma, _) = extract_strategies(&g, &r.bounds);
        assert_eq!(sigma.label(&g, id(&g, "q")), Some("c"));
        assert!(sigma.is_valid_for(&g));
    }
}
