//! Named fixture games.
//!
//! | name | shape |
//! |------|-------|
//! | `fig1` | two-state game `p` (min) / `q` (max) with a probabilistic exit at `q` |
//! | `fig2-mdp` | MDP whose end component `{s,t}` stalls naive bounded iteration |
//! | `fig2-collapsed` | the same MDP with `{s,t}` merged into one state `st` |
//! | `fig3(α,β)` | three-state mixed end component with exits of value α (at `q`) and β (at `r`) |
//! | `fig6` | four-state mixed end component on which naive bounded iteration converges |
//! | `skewed(N)` | Minimizer start with a direct losing action and an `N`-state chain to the target |
//! | `vi-trap(n)` | `n`-state restart chain on which small-change value iteration stops far too early |
//!
//! Exits labelled with a value `x` are realized as a branch with probability
//! `x` to the target and `1 − x` to the sink.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::format::parse_rational;
use crate::model::{preprocess_merge_unreachable, ratio, GameBuilder, ModelError, Player, StateId, StochasticGame};

pub const BUILTIN_NAMES: &[&str] = &["fig1", "fig2-mdp", "fig2-collapsed", "fig3", "fig6", "skewed", "vi-trap"];

/// Chain length used by `vi-trap` without parameters.
pub const VI_TRAP_DEFAULT: usize = 14;

fn finish(b: GameBuilder) -> StochasticGame {
    let g = b.build().expect("builtin games are well formed");
    preprocess_merge_unreachable(&g).expect("validated")
}

fn terminals(b: &mut GameBuilder, target_owner: Player, sink_owner: Player) -> (StateId, StateId) {
    let one = b.state("one", target_owner);
    let zero = b.state("zero", sink_owner);
    b.target(one).sink(zero);
    (one, zero)
}

/// Appends `(one, x), (zero, 1-x)` to `dist`, dropping zero-probability branches.
fn value_branch(dist: &mut Vec<(StateId, BigRational)>, one: StateId, zero: StateId, x: &BigRational) {
    if !x.is_zero() {
        dist.push((one, x.clone()));
    }
    let rest = BigRational::one() - x;
    if !rest.is_zero() {
        dist.push((zero, rest));
    }
}

pub fn fig1() -> StochasticGame {
    let mut b = GameBuilder::new();
    let p = b.state("p", Player::Min);
    let q = b.state("q", Player::Max);
    let (one, zero) = terminals(&mut b, Player::Max, Player::Min);
    b.action(p, "a", vec![(q, ratio(1, 1))]);
    b.action(q, "b", vec![(p, ratio(1, 1))]);
    b.action(q, "c", vec![(q, ratio(1, 3)), (one, ratio(1, 3)), (zero, ratio(1, 3))]);
    b.initial(p);
    finish(b)
}

pub fn fig2_mdp() -> StochasticGame {
    let mut b = GameBuilder::new();
    let s = b.state("s", Player::Max);
    let t = b.state("t", Player::Max);
    let (one, zero) = terminals(&mut b, Player::Max, Player::Max);
    b.action(s, "a", vec![(t, ratio(1, 1))]);
    b.action(t, "b", vec![(s, ratio(1, 1))]);
    b.action(t, "c", vec![(t, ratio(1, 3)), (one, ratio(1, 3)), (zero, ratio(1, 3))]);
    b.initial(s);
    finish(b)
}

pub fn fig2_collapsed() -> StochasticGame {
    let mut b = GameBuilder::new();
    let st = b.state("st", Player::Max);
    let (one, zero) = terminals(&mut b, Player::Max, Player::Max);
    b.action(st, "c", vec![(st, ratio(1, 3)), (one, ratio(1, 3)), (zero, ratio(1, 3))]);
    b.initial(st);
    finish(b)
}

/// `p` (min) chooses between `q` and `r` (both max); `q` exits with value
/// `alpha`, `r` with value `beta`, and both can return to `p`.
pub fn fig3(alpha: BigRational, beta: BigRational) -> StochasticGame {
    let mut b = GameBuilder::new();
    let p = b.state("p", Player::Min);
    let q = b.state("q", Player::Max);
    let r = b.state("r", Player::Max);
    let (one, zero) = terminals(&mut b, Player::Max, Player::Min);
    b.action(p, "a", vec![(q, ratio(1, 1))]);
    b.action(p, "c", vec![(r, ratio(1, 1))]);
    b.action(q, "b", vec![(p, ratio(1, 1))]);
    let mut e = Vec::new();
    value_branch(&mut e, one, zero, &alpha);
    b.action(q, "e", e);
    b.action(r, "d", vec![(p, ratio(1, 1))]);
    let mut f = Vec::new();
    value_branch(&mut f, one, zero, &beta);
    b.action(r, "f", f);
    b.initial(p);
    finish(b)
}

/// Cycle `A → B → C → D → A` alternating max/min owners. Each state has a
/// `stay` action to the next state and a `leave` action that with
/// probability 1/2 takes an exit of value 0.8, 0.3, 0.4, 0.5 respectively and
/// otherwise also moves on.
pub fn fig6() -> StochasticGame {
    let mut b = GameBuilder::new();
    let owners = [("A", Player::Max), ("B", Player::Min), ("C", Player::Max), ("D", Player::Min)];
    let ids: Vec<StateId> = owners.iter().map(|(n, o)| b.state(n, *o)).collect();
    let (one, zero) = terminals(&mut b, Player::Max, Player::Min);
    let exits = [ratio(4, 5), ratio(3, 10), ratio(2, 5), ratio(1, 2)];
    let half = ratio(1, 2);
    for i in 0..4 {
        let next = ids[(i + 1) % 4];
        b.action(ids[i], "stay", vec![(next, ratio(1, 1))]);
        let mut leave = Vec::new();
        value_branch(&mut leave, one, zero, &exits[i]);
        for (_, p) in leave.iter_mut() {
            *p *= &half;
        }
        leave.push((next, half.clone()));
        b.action(ids[i], "leave", leave);
    }
    b.initial(ids[0]);
    finish(b)
}

/// Minimizer start `s0` with `give_up` (straight to the sink) and `enter`
/// into the chain `c1 → … → cN → one`; `N + 3` states in total.
pub fn skewed(n: usize) -> StochasticGame {
    assert!(n >= 1, "chain length must be positive");
    let mut b = GameBuilder::new();
    let s0 = b.state("s0", Player::Min);
    let chain: Vec<StateId> = (1..=n).map(|i| b.state(&format!("c{i}"), Player::Max)).collect();
    let (one, zero) = terminals(&mut b, Player::Max, Player::Min);
    b.action(s0, "give_up", vec![(zero, ratio(1, 1))]);
    b.action(s0, "enter", vec![(chain[0], ratio(1, 1))]);
    for i in 0..n {
        let next = if i + 1 < n { chain[i + 1] } else { one };
        b.action(chain[i], "next", vec![(next, ratio(1, 1))]);
    }
    b.initial(s0);
    finish(b)
}

/// Restart chain `s1 … sn`: each `si` (i < n) moves on to `s(i+1)` or falls
/// back to `s1` with probability 1/2 each; `sn` goes to the target or the
/// sink with probability 1/2 each. The value of `s1` is 1/2.
pub fn vi_trap(n: usize) -> StochasticGame {
    assert!(n >= 1, "chain length must be positive");
    let mut b = GameBuilder::new();
    let chain: Vec<StateId> = (1..=n).map(|i| b.state(&format!("s{i}"), Player::Max)).collect();
    let (one, zero) = terminals(&mut b, Player::Max, Player::Min);
    for i in 0..n {
        let dist = if i + 1 < n {
            vec![(chain[i + 1], ratio(1, 2)), (chain[0], ratio(1, 2))]
        } else {
            vec![(one, ratio(1, 2)), (zero, ratio(1, 2))]
        };
        b.action(chain[i], "step", dist);
    }
    b.initial(chain[0]);
    finish(b)
}

fn bad(name: &str, message: impl Into<String>) -> ModelError {
    ModelError::BadBuiltinParams { name: name.to_string(), message: message.into() }
}

fn count_param(name: &str, params: &[BigRational], default: usize) -> Result<usize, ModelError> {
    match params {
        [] => Ok(default),
        [x] if x.is_integer() && x >= &BigRational::one() => {
            x.to_integer().try_into().map_err(|_| bad(name, "count too large"))
        }
        [_] => Err(bad(name, "expected a positive integer")),
        _ => Err(bad(name, "expected at most one parameter")),
    }
}

/// Looks up a builtin by name with optional numeric parameters.
pub fn builtin_game(name: &str, params: &[BigRational]) -> Result<StochasticGame, ModelError> {
    let none = |g: fn() -> StochasticGame| {
        if params.is_empty() {
            Ok(g())
        } else {
            Err(bad(name, "takes no parameters"))
        }
    };
    match name {
        "fig1" => none(fig1),
        "fig2-mdp" => none(fig2_mdp),
        "fig2-collapsed" => none(fig2_collapsed),
        "fig6" => none(fig6),
        "fig3" => {
            let (alpha, beta) = match params {
                [] => (ratio(3, 10), ratio(6, 10)),
                [a, b] => (a.clone(), b.clone()),
                _ => return Err(bad(name, "expected two parameters α,β")),
            };
            let unit = |x: &BigRational| x >= &BigRational::zero() && x <= &BigRational::one();
            if !unit(&alpha) || !unit(&beta) {
                return Err(bad(name, "α and β must lie in [0,1]"));
            }
            Ok(fig3(alpha, beta))
        }
        "skewed" => Ok(skewed(count_param(name, params, 10)?)),
        "vi-trap" => Ok(vi_trap(count_param(name, params, VI_TRAP_DEFAULT)?)),
        _ => Err(ModelError::UnknownBuiltin(name.to_string())),
    }
}

/// Parses `name` or `name:p1,p2,...` (parameters as decimals or `a/b`).
pub fn builtin_from_spec(spec: &str) -> Result<StochasticGame, ModelError> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, p),
        None => (spec, ""),
    };
    let params = params
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_rational(p.trim()).map_err(|e| bad(name, e)))
        .collect::<Result<Vec<_>, _>>()?;
    builtin_game(name, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_game;

    #[test]
    fn all_builtins_are_valid() {
        for name in BUILTIN_NAMES {
            let g = builtin_game(name, &[]).unwrap();
            assert!(validate_game(&g).is_empty(), "{name}");
            assert_eq!(preprocess_merge_unreachable(&g).unwrap(), g, "{name}");
        }
    }

    #[test]
    fn fig1_matches_caption() {
        let g = fig1();
        assert_eq!(g.len(), 4);
        let max: Vec<_> = g.states().filter(|&s| g.owner(s) == Player::Max).map(|s| g.name(s)).collect();
        let min: Vec<_> = g.states().filter(|&s| g.owner(s) == Player::Min).map(|s| g.name(s)).collect();
        assert_eq!(max, ["q", "one"]);
        assert_eq!(min, ["p", "zero"]);
        assert_eq!(g.name(g.initial()), "p");
    }

    #[test]
    fn fig2_shape() {
        let g = fig2_mdp();
        assert!(g.is_mdp());
        let t = g.state_id("t").unwrap();
        let c = &g.actions(t)[g.action_index(t, "c").unwrap()];
        assert!(c.distribution.iter().all(|(_, p)| *p == ratio(1, 3)));
    }

    #[test]
    fn params_are_checked() {
        assert!(matches!(builtin_game("fig9", &[]), Err(ModelError::UnknownBuiltin(_))));
        assert!(builtin_game("fig1", &[ratio(1, 2)]).is_err());
        assert!(builtin_game("fig3", &[ratio(3, 2), ratio(1, 2)]).is_err());
        assert!(builtin_game("skewed", &[ratio(1, 2)]).is_err());
        assert_eq!(builtin_from_spec("skewed:5").unwrap().len(), 8);
        assert_eq!(builtin_from_spec("fig3:0.3,3/5").unwrap(), fig3(ratio(3, 10), ratio(3, 5)));
    }

    #[test]
    fn degenerate_fig3_collapses_to_sink() {
        let g = fig3(ratio(0, 1), ratio(0, 1));
        assert_eq!(g.initial(), g.sink());
    }
}
