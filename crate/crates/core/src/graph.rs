//! Structural analysis: strongly connected components, maximal end
//! components, best exits and simple-end-component candidates.

use crate::flat::FlatGame;
use crate::model::{Action, Player, StateId, StochasticGame};

/// Label of the frozen self-loop given to frontier states of a restricted game.
pub const FROZEN_LABEL: &str = "⊥";

/// A set of states together with a witness set of actions that never leave
/// the set and connect it strongly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndComponent {
    /// Sorted ascending.
    pub states: Vec<StateId>,
    /// `witness[i]` are the indices (within the state) of the actions of
    /// `states[i]` that belong to the witness set.
    pub witness: Vec<Vec<usize>>,
}

impl EndComponent {
    pub fn contains(&self, s: StateId) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_singleton(&self, s: StateId) -> bool {
        self.states == [s]
    }

    /// Checks both defining properties against `game`: witness actions stay
    /// inside, and the witness graph is strongly connected.
    pub fn is_valid_in(&self, game: &impl AsRef<FlatGame>) -> bool {
        let flat = game.as_ref();
        if self.states.is_empty() || self.witness.len() != self.states.len() {
            return false;
        }
        if self.witness.iter().any(|w| w.is_empty()) {
            return false;
        }
        let mut allowed = vec![false; flat.action_count()];
        let mut alive = vec![false; flat.len()];
        for (s, w) in self.states.iter().zip(&self.witness) {
            alive[*s] = true;
            for &a in w {
                if a >= flat.actions(*s).len() {
                    return false;
                }
                let id = flat.action_id(*s, a);
                if !flat.successors(id).iter().all(|t| self.contains(*t)) {
                    return false;
                }
                allowed[id] = true;
            }
        }
        let comps = tarjan(flat, &alive, &allowed);
        comps.len() == 1
    }
}

/// The most profitable `T`-exiting action of one player.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitValue {
    pub player: Player,
    pub value: f64,
    /// `(state, action index)` realizing the value; `None` when the player has
    /// no exiting action, in which case the value is 0 for the Maximizer and 1
    /// for the Minimizer.
    pub witness: Option<(StateId, usize)>,
}

/// Iterative Tarjan over the subgraph induced by `alive` states and
/// `allowed` actions. Components come out in reverse topological order
/// (bottom components first); each is sorted ascending.
fn tarjan(flat: &FlatGame, alive: &[bool], allowed: &[bool]) -> Vec<Vec<StateId>> {
    const UNSEEN: usize = usize::MAX;
    let n = flat.len();
    let adj: Vec<Vec<StateId>> = (0..n)
        .map(|s| {
            if !alive[s] {
                return Vec::new();
            }
            let mut out = Vec::new();
            for a in flat.actions(s).filter(|&a| allowed[a]) {
                for &t in flat.successors(a) {
                    if alive[t] && !out.contains(&t) {
                        out.push(t);
                    }
                }
            }
            out
        })
        .collect();

    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    let mut frames: Vec<(StateId, usize)> = Vec::new();

    for root in 0..n {
        if !alive[root] || index[root] != UNSEEN {
            continue;
        }
        frames.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut cursor)) = frames.last_mut() {
            if let Some(&w) = adj[v].get(*cursor) {
                *cursor += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// SCCs of the game graph (edge `s → s'` iff some action of `s` reaches `s'`
/// with positive probability), in reverse topological order.
pub fn scc_decomposition(game: &impl AsRef<FlatGame>) -> Vec<Vec<StateId>> {
    let flat = game.as_ref();
    tarjan(flat, &vec![true; flat.len()], &vec![true; flat.action_count()])
}

/// Maximal end components when only the actions marked in `allowed` (global
/// action ids) may be used. Ordered by smallest member.
pub fn mec_with_actions(flat: &FlatGame, mut allowed: Vec<bool>) -> Vec<EndComponent> {
    let n = flat.len();
    let mut alive = vec![true; n];
    let mut comp_of = vec![usize::MAX; n];
    loop {
        for s in 0..n {
            if alive[s] && !flat.actions(s).any(|a| allowed[a]) {
                alive[s] = false;
            }
        }
        let comps = tarjan(flat, &alive, &allowed);
        for (i, c) in comps.iter().enumerate() {
            for &s in c {
                comp_of[s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            for a in flat.actions(s) {
                if allowed[a] && flat.successors(a).iter().any(|&t| !alive[t] || comp_of[t] != comp_of[s]) {
                    allowed[a] = false;
                    changed = true;
                }
            }
            if !flat.actions(s).any(|a| allowed[a]) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<EndComponent> = comps
                .into_iter()
                .map(|states| {
                    let witness = states
                        .iter()
                        .map(|&s| {
                            let base = flat.action_id(s, 0);
                            flat.actions(s).filter(|&a| allowed[a]).map(|a| a - base).collect()
                        })
                        .collect();
                    EndComponent { states, witness }
                })
                .collect();
            out.sort_by_key(|ec| ec.states[0]);
            return out;
        }
    }
}

/// All maximal end components of the game (players unified). The
/// components `{target}` and `{sink}` are always among them.
pub fn mec_decomposition(game: &impl AsRef<FlatGame>) -> Vec<EndComponent> {
    let flat = game.as_ref();
    mec_with_actions(flat, vec![true; flat.action_count()])
}

/// Best `T`-exiting action value of `player` under `f`, with `max ∅ = 0` and
/// `min ∅ = 1`.
pub fn best_exit(game: &impl AsRef<FlatGame>, t: &[StateId], f: &[f64], player: Player) -> ExitValue {
    let flat = game.as_ref();
    debug_assert!(t.windows(2).all(|w| w[0] < w[1]));
    let inside = |x: StateId| t.binary_search(&x).is_ok();
    let mut best = ExitValue {
        player,
        value: if player == Player::Max { 0.0 } else { 1.0 },
        witness: None,
    };
    for &s in t.iter().filter(|&&s| flat.owner(s) == player) {
        for (i, a) in flat.actions(s).enumerate() {
            if flat.successors(a).iter().all(|&x| inside(x)) {
                continue;
            }
            let v = flat.action_value(f, a);
            let better = match (best.witness, player) {
                (None, _) => true,
                (Some(_), Player::Max) => v > best.value,
                (Some(_), Player::Min) => v < best.value,
            };
            if better {
                best.value = v;
                best.witness = Some((s, i));
            }
        }
    }
    best
}

/// Maximal end components of the game in which every Minimizer action `a` at
/// `s` with `suboptimal(s, a)` (global action id) has been removed.
pub fn find_msec_by(flat: &FlatGame, suboptimal: impl Fn(StateId, usize) -> bool) -> Vec<EndComponent> {
    let mut allowed = vec![true; flat.action_count()];
    for s in 0..flat.len() {
        if flat.owner(s) == Player::Min {
            for a in flat.actions(s) {
                if suboptimal(s, a) {
                    allowed[a] = false;
                }
            }
        }
    }
    mec_with_actions(flat, allowed)
}

/// Candidate simple end components for `f`: remove the Minimizer actions with
/// `f(s,a) > f(s)` (exact binary64 comparison) and decompose the rest into
/// maximal end components.
pub fn find_msec<G, F>(game: &G, f: &F) -> Vec<EndComponent>
where
    G: AsRef<FlatGame> + ?Sized,
    F: AsRef<[f64]> + ?Sized,
{
    let flat = game.as_ref();
    let f = f.as_ref();
    find_msec_by(flat, |s, a| flat.action_value(f, a) > f[s])
}

/// True when the Minimizer's best exit strictly exceeds the Maximizer's.
pub fn is_bec(game: &impl AsRef<FlatGame>, t: &EndComponent, f: &[f64]) -> bool {
    best_exit(game, &t.states, f, Player::Min).value > best_exit(game, &t.states, f, Player::Max).value
}

/// The game restricted to `visited`.
///
/// Visited states keep their full availability; their one-step successors are
/// kept with a single self-loop action [`FROZEN_LABEL`]. Target and sink are
/// always kept (with their own self-loops) so that the result is a
/// well-formed game. The initial state must be visited.
pub fn restricted_game(game: &StochasticGame, visited: &[StateId]) -> StochasticGame {
    let n = game.len();
    let mut in_vis = vec![false; n];
    let mut member = vec![false; n];
    member[game.target()] = true;
    member[game.sink()] = true;
    for &s in visited {
        in_vis[s] = true;
        member[s] = true;
        for a in game.actions(s) {
            for t in a.successors() {
                member[t] = true;
            }
        }
    }
    assert!(in_vis[game.initial()], "initial state must be visited");
    let kept: Vec<StateId> = (0..n).filter(|&s| member[s]).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &s) in kept.iter().enumerate() {
        local[s] = i;
    }
    let mut names = Vec::with_capacity(kept.len());
    let mut owners = Vec::with_capacity(kept.len());
    let mut actions = Vec::with_capacity(kept.len());
    for &s in &kept {
        names.push(game.name(s).to_string());
        owners.push(game.owner(s));
        let acts = if in_vis[s] || game.is_terminal(s) {
            game.actions(s)
                .iter()
                .map(|a| Action::new(a.label.clone(), a.distribution.iter().map(|(t, p)| (local[*t], p.clone())).collect()))
                .collect()
        } else {
            vec![Action::dirac(FROZEN_LABEL, local[s])]
        };
        actions.push(acts);
    }
    StochasticGame::from_parts(
        names,
        owners,
        actions,
        local[game.initial()],
        local[game.target()],
        local[game.sink()],
    )
}
