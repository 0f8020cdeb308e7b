//! Compact binary64 view of a game used by the iterative solvers and the
//! graph algorithms.
//!
//! States own a contiguous range of global action ids, actions own a
//! contiguous range of edges. Successor order is the model's declaration
//! order, so floating-point sums are accumulated in a fixed order.

use std::ops::Range;

use num_traits::ToPrimitive;

use crate::model::{Player, StateId, StochasticGame};
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq)]
pub struct FlatGame {
    owner: Vec<Player>,
    action_start: Vec<usize>,
    edge_start: Vec<usize>,
    edge_to: Vec<StateId>,
    edge_prob: Vec<f64>,
    initial: StateId,
    target: StateId,
    sink: StateId,
}

impl FlatGame {
    pub fn from_game(game: &StochasticGame) -> Self {
        let mut b = FlatBuilder::new(game.initial(), game.target(), game.sink());
        for s in game.states() {
            b.begin_state(game.owner(s));
            for a in game.actions(s) {
                b.push_action(a.distribution.iter().map(|(t, p)| (*t, p.to_f64().expect("finite probability"))));
            }
        }
        b.finish()
    }

    /// The game restricted to `visited`: visited states keep all their
    /// actions, their successors are kept with a single probability-1
    /// self-loop, everything else is dropped.
    ///
    /// Returns the restricted game (with local indices, ordered by original
    /// index) and the local-to-original index map. Target and sink keep their
    /// roles when present; otherwise those fields point at local state 0 and
    /// must not be relied upon.
    pub fn restricted(&self, visited: &[StateId]) -> (FlatGame, Vec<StateId>) {
        let n = self.len();
        let mut in_vis = vec![false; n];
        let mut member = vec![false; n];
        for &s in visited {
            in_vis[s] = true;
            member[s] = true;
            for a in self.actions(s) {
                for &t in self.successors(a) {
                    member[t] = true;
                }
            }
        }
        let global: Vec<StateId> = (0..n).filter(|&s| member[s]).collect();
        let mut local = vec![usize::MAX; n];
        for (i, &s) in global.iter().enumerate() {
            local[s] = i;
        }
        let pick = |s: StateId| if member[s] { local[s] } else { 0 };
        let mut b = FlatBuilder::new(pick(self.initial), pick(self.target), pick(self.sink));
        for &s in &global {
            b.begin_state(self.owner[s]);
            if in_vis[s] {
                for a in self.actions(s) {
                    let (to, p) = self.edges(a);
                    b.push_action(to.iter().map(|&t| local[t]).zip(p.iter().copied()));
                }
            } else {
                b.push_action(std::iter::once((local[s], 1.0)));
            }
        }
        (b.finish(), global)
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn owner(&self, s: StateId) -> Player {
        self.owner[s]
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn target(&self) -> StateId {
        self.target
    }

    pub fn sink(&self) -> StateId {
        self.sink
    }

    pub fn action_count(&self) -> usize {
        self.edge_start.len() - 1
    }

    /// Global action ids of `s`.
    pub fn actions(&self, s: StateId) -> Range<usize> {
        self.action_start[s]..self.action_start[s + 1]
    }

    /// Global id of the `local`-th action of `s`.
    pub fn action_id(&self, s: StateId, local: usize) -> usize {
        let id = self.action_start[s] + local;
        debug_assert!(id < self.action_start[s + 1]);
        id
    }

    pub fn edges(&self, action: usize) -> (&[StateId], &[f64]) {
        let r = self.edge_start[action]..self.edge_start[action + 1];
        (&self.edge_to[r.clone()], &self.edge_prob[r])
    }

    pub fn successors(&self, action: usize) -> &[StateId] {
        &self.edge_to[self.edge_start[action]..self.edge_start[action + 1]]
    }

    /// `f(s,a)` for a global action id.
    #[inline]
    pub fn action_value(&self, f: &[f64], action: usize) -> f64 {
        let (to, p) = self.edges(action);
        let mut acc = 0.0;
        for (t, w) in to.iter().zip(p) {
            acc += w * f[*t];
        }
        acc.min(1.0)
    }

    /// One Bellman step at a single state.
    #[inline]
    pub fn bellman_at(&self, f: &[f64], s: StateId) -> f64 {
        let mut acts = self.actions(s);
        let first = acts.next().expect("non-blocking state");
        let mut best = self.action_value(f, first);
        match self.owner[s] {
            Player::Max => {
                for a in acts {
                    best = best.max(self.action_value(f, a));
                }
            }
            Player::Min => {
                for a in acts {
                    best = best.min(self.action_value(f, a));
                }
            }
        }
        best
    }

    /// Synchronous Bellman update of the whole vector: `out = B(f)`.
    pub fn bellman(&self, f: &[f64], out: &mut [f64], exec: Execution) {
        exec.fill_indexed(out, |s| self.bellman_at(f, s));
    }

    /// True when every successor of `action` is `s` itself.
    pub fn is_self_loop(&self, s: StateId, action: usize) -> bool {
        self.successors(action).iter().all(|&t| t == s)
    }
}

struct FlatBuilder {
    owner: Vec<Player>,
    action_start: Vec<usize>,
    edge_start: Vec<usize>,
    edge_to: Vec<StateId>,
    edge_prob: Vec<f64>,
    initial: StateId,
    target: StateId,
    sink: StateId,
}

impl FlatBuilder {
    fn new(initial: StateId, target: StateId, sink: StateId) -> Self {
        FlatBuilder {
            owner: Vec::new(),
            action_start: vec![0],
            edge_start: vec![0],
            edge_to: Vec::new(),
            edge_prob: Vec::new(),
            initial,
            target,
            sink,
        }
    }

    fn begin_state(&mut self, owner: Player) {
        if !self.owner.is_empty() {
            self.action_start.push(self.edge_start.len() - 1);
        }
        self.owner.push(owner);
    }

    fn push_action(&mut self, edges: impl Iterator<Item = (StateId, f64)>) {
        for (t, p) in edges {
            self.edge_to.push(t);
            self.edge_prob.push(p);
        }
        self.edge_start.push(self.edge_to.len());
    }

    fn finish(mut self) -> FlatGame {
        self.action_start.push(self.edge_start.len() - 1);
        if self.owner.is_empty() {
            self.action_start.truncate(1);
        }
        FlatGame {
            owner: self.owner,
            action_start: self.action_start,
            edge_start: self.edge_start,
            edge_to: self.edge_to,
            edge_prob: self.edge_prob,
            initial: self.initial,
            target: self.target,
            sink: self.sink,
        }
    }
}

impl AsRef<FlatGame> for FlatGame {
    fn as_ref(&self) -> &FlatGame {
        self
    }
}
