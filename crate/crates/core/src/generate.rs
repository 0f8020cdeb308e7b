//! Seeded random games for property testing.

use num_rational::BigRational;
use num_traits::Zero;

use crate::model::{preprocess_merge_unreachable, ratio, GameBuilder, Player, StateId, StochasticGame};
use crate::rng::SplitMix64;

/// Shape of a random game. `state_count` counts ordinary states; target
/// (`one`, Maximizer) and sink (`zero`, Minimizer) are added on top.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub state_count: usize,
    pub max_actions: usize,
    pub max_branching: usize,
    pub minimizer_fraction: f64,
    pub probability_pool: Vec<BigRational>,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            state_count: 6,
            max_actions: 3,
            max_branching: 3,
            minimizer_fraction: 0.5,
            probability_pool: default_pool(),
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_states(mut self, n: usize) -> Self {
        self.state_count = n;
        self
    }

    pub fn with_minimizer_fraction(mut self, fraction: f64) -> Self {
        self.minimizer_fraction = fraction;
        self
    }
}

/// `{1/4, 1/3, 1/2, 2/3, 3/4, 1}`.
pub fn default_pool() -> Vec<BigRational> {
    vec![ratio(1, 4), ratio(1, 3), ratio(1, 2), ratio(2, 3), ratio(3, 4), ratio(1, 1)]
}

/// A random game, deterministic in `params`.
///
/// Ordinary states `s0..` come first (`s0` is initial), then `one` and `zero`.
/// Every ordinary state gets `1..=max_actions` actions labelled `a0, a1, …`,
/// each with `1..=max_branching` distinct successors drawn uniformly from all
/// states. Successor weights are drawn from the pool and normalized to sum to
/// exactly one. If the target is unreachable from `s0`, the target is added to
/// the first action of `s0`. The result is validated and preprocessed.
///
/// # Panics
///
/// When a count is zero, the pool is empty or holds a non-positive value, or
/// the minimizer fraction lies outside `[0,1]`.
pub fn random_game(params: &GeneratorParams) -> StochasticGame {
    preprocess_merge_unreachable(&random_game_unprocessed(params)).expect("validated")
}

/// [`random_game`] before preprocessing: states that cannot reach the target
/// are still present.
pub fn random_game_unprocessed(params: &GeneratorParams) -> StochasticGame {
    let GeneratorParams { state_count: n, max_actions, max_branching, minimizer_fraction, .. } = *params;
    assert!(n > 0 && max_actions > 0 && max_branching > 0, "counts must be positive");
    assert!((0.0..=1.0).contains(&minimizer_fraction), "minimizer fraction must lie in [0,1]");
    let pool = &params.probability_pool;
    assert!(!pool.is_empty() && pool.iter().all(|p| *p > BigRational::zero()), "pool must hold positive weights");

    let mut rng = SplitMix64::new(params.seed);
    let total = n + 2;
    let (target, sink) = (n, n + 1);
    let owners: Vec<Player> = (0..n)
        .map(|_| if rng.chance(minimizer_fraction) { Player::Min } else { Player::Max })
        .collect();

    let mut raw: Vec<Vec<Vec<(StateId, BigRational)>>> = Vec::with_capacity(n);
    let mut candidates: Vec<StateId> = (0..total).collect();
    for _ in 0..n {
        let k = 1 + rng.below(max_actions);
        let mut acts = Vec::with_capacity(k);
        for _ in 0..k {
            let b = (1 + rng.below(max_branching)).min(total);
            for i in 0..b {
                let j = i + rng.below(total - i);
                candidates.swap(i, j);
            }
            let dist = candidates[..b].iter().map(|&t| (t, pool[rng.below(pool.len())].clone())).collect();
            acts.push(dist);
        }
        raw.push(acts);
    }

    if !reachable_from(&raw, 0, total)[target] {
        let w = pool[rng.below(pool.len())].clone();
        raw[0][0].push((target, w));
    }

    let mut b = GameBuilder::new();
    for (i, owner) in owners.iter().enumerate() {
        b.state(&format!("s{i}"), *owner);
    }
    b.state("one", Player::Max);
    b.state("zero", Player::Min);
    for (s, acts) in raw.into_iter().enumerate() {
        for (i, dist) in acts.into_iter().enumerate() {
            let sum: BigRational = dist.iter().map(|(_, w)| w.clone()).sum();
            let dist = dist.into_iter().map(|(t, w)| (t, w / &sum)).collect();
            b.action(s, &format!("a{i}"), dist);
        }
    }
    b.initial(0).target(target).sink(sink);
    b.build().expect("generated games are well formed")
}

fn reachable_from(raw: &[Vec<Vec<(StateId, BigRational)>>], start: StateId, total: usize) -> Vec<bool> {
    let mut seen = vec![false; total];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        let Some(acts) = raw.get(s) else { continue };
        for (t, _) in acts.iter().flatten() {
            if !seen[*t] {
                seen[*t] = true;
                stack.push(*t);
            }
        }
    }
    seen
}
