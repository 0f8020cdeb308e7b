//! Exact values by brute force.
//!
//! Every pair of deterministic memoryless strategies induces a Markov chain;
//! its reachability probabilities are solved exactly with rational Gaussian
//! elimination after the states without a path to the target have been fixed
//! to zero (which selects the least solution). The value of a state is the
//! maximum over Maximizer strategies of the minimum over Minimizer strategies.
//! No floating point is involved.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::flat::FlatGame;
use crate::graph::{find_msec_by, EndComponent};
use crate::model::{Player, StateId, StochasticGame, Strategy};
use crate::par::Execution;
use crate::solve::Bounds;

/// Default cap on the number of strategy pairs.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle budget exceeded: {required} strategy pairs needed, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("state {0} does not have exactly one action")]
    NotAChain(String),
}

/// Exact values, one rational per state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactValueVector(Vec<BigRational>);

impl ExactValueVector {
    pub fn new(values: Vec<BigRational>) -> Self {
        ExactValueVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, s: StateId) -> &BigRational {
        &self.0[s]
    }

    pub fn as_slice(&self) -> &[BigRational] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.to_f64().expect("finite value")).collect()
    }
}

impl std::ops::Index<StateId> for ExactValueVector {
    type Output = BigRational;

    fn index(&self, s: StateId) -> &BigRational {
        &self.0[s]
    }
}

/// `Σ δ(s,a,s')·v(s')` in exact arithmetic.
pub fn exact_action_value(game: &StochasticGame, v: &[BigRational], s: StateId, a: usize) -> BigRational {
    game.actions(s)[a].distribution.iter().map(|(t, p)| p * &v[*t]).sum()
}

/// Exact counterpart of [`crate::graph::best_exit`] (value only).
pub fn exact_best_exit(game: &StochasticGame, t: &[StateId], v: &[BigRational], player: Player) -> BigRational {
    let inside = |x: StateId| t.binary_search(&x).is_ok();
    let mut best: Option<BigRational> = None;
    for &s in t.iter().filter(|&&s| game.owner(s) == player) {
        for (i, a) in game.actions(s).iter().enumerate() {
            if a.successors().all(inside) {
                continue;
            }
            let x = exact_action_value(game, v, s, i);
            best = Some(match best {
                None => x,
                Some(b) if player == Player::Max => b.max(x),
                Some(b) => b.min(x),
            });
        }
    }
    best.unwrap_or_else(|| if player == Player::Max { BigRational::zero() } else { BigRational::one() })
}

/// Reachability probabilities of the target in the chain where state `s`
/// plays action `choice[s]`.
fn chain_values(game: &StochasticGame, choice: &[usize]) -> Vec<BigRational> {
    let n = game.len();
    let target = game.target();
    let step = |s: StateId| &game.actions(s)[choice[s]].distribution;

    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for (t, _) in step(s) {
            preds[*t].push(s);
        }
    }
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut stack = vec![target];
    while let Some(t) = stack.pop() {
        for &s in &preds[t] {
            if !reach[s] {
                reach[s] = true;
                stack.push(s);
            }
        }
    }

    let unknowns: Vec<StateId> = (0..n).filter(|&s| reach[s] && s != target).collect();
    let mut col = vec![usize::MAX; n];
    for (i, &s) in unknowns.iter().enumerate() {
        col[s] = i;
    }
    let m = unknowns.len();
    // Rows of (I − P) x = b over the unknowns, augmented with b.
    let mut a: Vec<Vec<BigRational>> = unknowns
        .iter()
        .map(|&s| {
            let mut row = vec![BigRational::zero(); m + 1];
            row[col[s]] = BigRational::one();
            for (t, p) in step(s) {
                if *t == target {
                    row[m] += p;
                } else if reach[*t] {
                    row[col[*t]] -= p;
                }
            }
            row
        })
        .collect();
    for c in 0..m {
        let pivot = (c..m).find(|&r| !a[r][c].is_zero()).expect("reachability system is nonsingular");
        a.swap(c, pivot);
        let inv = a[c][c].recip();
        for x in a[c][c..].iter_mut() {
            *x *= &inv;
        }
        let src = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c && !row[c].is_zero() {
                let factor = row[c].clone();
                for k in c..=m {
                    if !src[k].is_zero() {
                        row[k] -= &factor * &src[k];
                    }
                }
            }
        }
    }

    let mut x = vec![BigRational::zero(); n];
    x[target] = BigRational::one();
    for (i, &s) in unknowns.iter().enumerate() {
        x[s] = a[i][m].clone();
    }
    x
}

/// Reachability probabilities of the target in a game where every state has
/// exactly one action.
pub fn mc_reach_prob(chain: &StochasticGame) -> Result<ExactValueVector, OracleError> {
    if let Some(s) = chain.states().find(|&s| chain.actions(s).len() != 1) {
        return Err(OracleError::NotAChain(chain.name(s).to_string()));
    }
    Ok(ExactValueVector(chain_values(chain, &vec![0; chain.len()])))
}

/// Number of strategy pairs, saturating.
pub fn strategy_pair_count(game: &StochasticGame) -> u128 {
    game.states().fold(1u128, |acc, s| acc.saturating_mul(game.actions(s).len() as u128))
}

/// Per-player action choices: the fixed choice of `fixed` where given, all
/// actions otherwise.
fn options(game: &StochasticGame, player: Player, fixed: Option<&Strategy>) -> Vec<Vec<usize>> {
    game.states()
        .map(|s| {
            if game.owner(s) != player {
                return vec![0];
            }
            match fixed.and_then(|st| st.choice(s)) {
                Some(a) => vec![a],
                None => (0..game.actions(s).len()).collect(),
            }
        })
        .collect()
}

/// Enumerates every combination of per-state options (mixed radix).
fn enumerate(opts: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; opts.len()];
    loop {
        out.push(idx.iter().zip(opts).map(|(&i, o)| o[i]).collect());
        let mut k = 0;
        loop {
            if k == opts.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < opts[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn combine(max_choice: &[usize], min_choice: &[usize], game: &StochasticGame) -> Vec<usize> {
    game.states().map(|s| if game.owner(s) == Player::Max { max_choice[s] } else { min_choice[s] }).collect()
}

fn pointwise(a: Vec<BigRational>, b: Vec<BigRational>, keep_max: bool) -> Vec<BigRational> {
    a.into_iter().zip(b).map(|(x, y)| if (x < y) == keep_max { y } else { x }).collect()
}

/// Options for the enumerating oracle.
#[derive(Clone, Debug)]
pub struct OracleOptions<'a> {
    pub budget: u128,
    pub exec: Execution,
    /// Swap the quantifiers: minimum over Minimizer strategies of the maximum
    /// over Maximizer strategies.
    pub min_max: bool,
    pub fixed_max: Option<&'a Strategy>,
    pub fixed_min: Option<&'a Strategy>,
}

impl Default for OracleOptions<'_> {
    fn default() -> Self {
        OracleOptions { budget: DEFAULT_BUDGET, exec: Execution::Sequential, min_max: false, fixed_max: None, fixed_min: None }
    }
}

pub fn solve_exact_with(game: &StochasticGame, opts: &OracleOptions<'_>) -> Result<ExactValueVector, OracleError> {
    let max_opts = options(game, Player::Max, opts.fixed_max);
    let min_opts = options(game, Player::Min, opts.fixed_min);
    let count = |o: &[Vec<usize>]| o.iter().fold(1u128, |acc, x| acc.saturating_mul(x.len() as u128));
    let required = count(&max_opts).saturating_mul(count(&min_opts));
    if required > opts.budget {
        return Err(OracleError::BudgetExceeded { required, budget: opts.budget });
    }
    let (outer, inner) = if opts.min_max { (min_opts, max_opts) } else { (max_opts, min_opts) };
    let outer = enumerate(&outer);
    let inner = enumerate(&inner);
    let outer_is_max = !opts.min_max;
    let per_outer = opts.exec.map(&outer, |o| {
        inner
            .iter()
            .map(|i| {
                let choice = if outer_is_max { combine(o, i, game) } else { combine(i, o, game) };
                chain_values(game, &choice)
            })
            .reduce(|a, b| pointwise(a, b, !outer_is_max))
            .expect("at least one strategy")
    });
    let values = per_outer.into_iter().reduce(|a, b| pointwise(a, b, outer_is_max)).expect("at least one strategy");
    Ok(ExactValueVector(values))
}

/// `V(s) = max_σ min_τ P^{σ,τ}_s(◇ target)` over deterministic memoryless
/// strategies, exactly.
pub fn solve_exact(game: &StochasticGame, budget: u128) -> Result<ExactValueVector, OracleError> {
    solve_exact_with(game, &OracleOptions { budget, ..OracleOptions::default() })
}

/// Values of the game where the Maximizer is fixed to `sigma` and the
/// Minimizer best-responds.
pub fn best_response_value(game: &StochasticGame, sigma: &Strategy, budget: u128) -> Result<ExactValueVector, OracleError> {
    solve_exact_with(game, &OracleOptions { budget, fixed_max: Some(sigma), ..OracleOptions::default() })
}

/// True iff every state of `t` has the value of the Maximizer's best exit.
pub fn certify_sec(game: &StochasticGame, t: &EndComponent, v: &ExactValueVector) -> bool {
    let exit = exact_best_exit(game, &t.states, v.as_slice(), Player::Max);
    t.states.iter().all(|&s| v[s] == exit)
}

/// Checks `v` against the Bellman equations exactly.
pub fn satisfies_bellman(game: &StochasticGame, v: &ExactValueVector) -> bool {
    game.states().all(|s| {
        let vals = (0..game.actions(s).len()).map(|a| exact_action_value(game, v.as_slice(), s, a));
        let best = match game.owner(s) {
            Player::Max => vals.max(),
            Player::Min => vals.min(),
        };
        best.as_ref() == Some(&v[s])
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundViolation {
    pub state: StateId,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
}

/// States where `L(s) > v(s) + tol` or `U(s) < v(s) − tol`.
pub fn check_bounds(b: &Bounds, v: &ExactValueVector, tol: f64) -> Vec<BoundViolation> {
    let vf = v.to_f64();
    (0..vf.len())
        .filter(|&s| b.lower[s] > vf[s] + tol || b.upper[s] < vf[s] - tol)
        .map(|s| BoundViolation { state: s, lower: b.lower[s], upper: b.upper[s], value: vf[s] })
        .collect()
}

/// [`crate::graph::find_msec`] with exact comparisons against exact values.
pub fn find_msec_exact(game: &StochasticGame, v: &ExactValueVector) -> Vec<EndComponent> {
    let flat: &FlatGame = game.flat();
    find_msec_by(flat, |s, a| {
        let local = a - flat.action_id(s, 0);
        exact_action_value(game, v.as_slice(), s, local) > v[s]
    })
}

/// Every end component of the game, by subset enumeration. Each comes with
/// its maximal witness (all staying actions). Exponential; for small games.
pub fn enumerate_end_components(game: &StochasticGame) -> Vec<EndComponent> {
    let n = game.len();
    assert!(n <= 20, "subset enumeration is limited to 20 states");
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let states: Vec<StateId> = (0..n).filter(|&s| mask >> s & 1 == 1).collect();
        let inside = |x: StateId| mask >> x & 1 == 1;
        let witness: Vec<Vec<usize>> = states
            .iter()
            .map(|&s| {
                game.actions(s).iter().enumerate().filter(|(_, a)| a.successors().all(inside)).map(|(i, _)| i).collect()
            })
            .collect();
        if witness.iter().any(Vec::is_empty) {
            continue;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; states.len()];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(i) = stack.pop() {
                for (j, &s) in states.iter().enumerate() {
                    if seen[j] {
                        continue;
                    }
                    let (from, from_idx, to) = if forward { (states[i], i, s) } else { (s, j, states[i]) };
                    let edge = witness[from_idx].iter().any(|&a| game.actions(from)[a].successors().any(|t| t == to));
                    if edge {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.iter().all(|&x| x)
        };
        if reach(true) && reach(false) {
            out.push(EndComponent { states, witness });
        }
    }
    out
}

/// Inclusion-maximal simple end components, by enumeration.
pub fn brute_force_msecs(game: &StochasticGame, v: &ExactValueVector) -> Vec<EndComponent> {
    let secs: Vec<EndComponent> = enumerate_end_components(game).into_iter().filter(|t| certify_sec(game, t, v)).collect();
    let subset = |a: &[StateId], b: &[StateId]| a.len() < b.len() && a.iter().all(|x| b.binary_search(x).is_ok());
    let mut out: Vec<EndComponent> =
        secs.iter().filter(|t| !secs.iter().any(|u| subset(&t.states, &u.states))).cloned().collect();
    out.sort_by_key(|t| t.states[0]);
    out
}

/// Largest absolute difference between `v` and a float vector.
pub fn max_abs_error(v: &ExactValueVector, f: &[f64]) -> f64 {
    v.to_f64().iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
