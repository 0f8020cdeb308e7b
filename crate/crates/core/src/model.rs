//! Explicit game representation, validation and preprocessing.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::flat::FlatGame;

/// Dense state index; the order is the declaration order of the model.
pub type StateId = usize;

/// Label given to the synthesized self-loop of the target and sink states.
pub const LOOP_LABEL: &str = "loop";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    Max,
    Min,
}

impl Player {
    pub fn keyword(self) -> &'static str {
        match self {
            Player::Max => "max",
            Player::Min => "min",
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Shorthand for an exact probability `num/den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub label: String,
    /// Successors in declaration order with their exact probabilities.
    pub distribution: Vec<(StateId, BigRational)>,
}

impl Action {
    pub fn new(label: impl Into<String>, distribution: Vec<(StateId, BigRational)>) -> Self {
        Action { label: label.into(), distribution }
    }

    pub fn dirac(label: impl Into<String>, to: StateId) -> Self {
        Action::new(label, vec![(to, BigRational::one())])
    }

    pub fn successors(&self) -> impl Iterator<Item = StateId> + '_ {
        self.distribution.iter().map(|(s, _)| *s)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed game: {0}")]
    Malformed(ValidationReport),
    #[error("unknown action `{action}` at state `{state}`")]
    UnknownAction { state: String, action: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("bad builtin parameters for `{name}`: {message}")]
    BadBuiltinParams { name: String, message: String },
    #[error("missing `{0}` designation")]
    MissingDesignation(&'static str),
}

/// An explicit simple stochastic game.
///
/// The game is immutable after construction. Probabilities are kept as exact
/// rationals; a binary64 view for the iterative solvers is built lazily and
/// cached ([`StochasticGame::flat`]).
#[derive(Clone)]
pub struct StochasticGame {
    names: Vec<String>,
    owners: Vec<Player>,
    actions: Vec<Vec<Action>>,
    initial: StateId,
    target: StateId,
    sink: StateId,
    flat: OnceLock<FlatGame>,
}

impl PartialEq for StochasticGame {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.owners == other.owners
            && self.actions == other.actions
            && self.initial == other.initial
            && self.target == other.target
            && self.sink == other.sink
    }
}

impl Eq for StochasticGame {}

impl fmt::Debug for StochasticGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticGame")
            .field("names", &self.names)
            .field("owners", &self.owners)
            .field("actions", &self.actions)
            .field("initial", &self.initial)
            .field("target", &self.target)
            .field("sink", &self.sink)
            .finish()
    }
}

impl StochasticGame {
    /// Assembles a game without any validation. Use [`validate_game`] or
    /// [`GameBuilder::build`] to check the invariants.
    pub fn from_parts(
        names: Vec<String>,
        owners: Vec<Player>,
        actions: Vec<Vec<Action>>,
        initial: StateId,
        target: StateId,
        sink: StateId,
    ) -> Self {
        assert_eq!(names.len(), owners.len());
        assert_eq!(names.len(), actions.len());
        StochasticGame { names, owners, actions, initial, target, sink, flat: OnceLock::new() }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.names.len()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn owner(&self, s: StateId) -> Player {
        self.owners[s]
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

    pub fn is_terminal(&self, s: StateId) -> bool {
        s == self.target || s == self.sink
    }

    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.actions[s]
    }

    pub fn action_index(&self, s: StateId, label: &str) -> Option<usize> {
        self.actions[s].iter().position(|a| a.label == label)
    }

    /// True when no state belongs to the Minimizer except possibly the sink.
    pub fn is_mdp(&self) -> bool {
        self.states().all(|s| s == self.sink || self.owners[s] == Player::Max)
    }

    pub fn transition_count(&self) -> usize {
        self.actions.iter().flatten().map(|a| a.distribution.len()).sum()
    }

    #[cfg(test)]
    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<Player>, Vec<Vec<Action>>, StateId, StateId, StateId) {
        (self.names, self.owners, self.actions, self.initial, self.target, self.sink)
    }

    /// Binary64 view of the game, built on first use.
    pub fn flat(&self) -> &FlatGame {
        self.flat.get_or_init(|| FlatGame::from_game(self))
    }
}

impl AsRef<FlatGame> for StochasticGame {
    fn as_ref(&self) -> &FlatGame {
        self.flat()
    }
}

/// Incremental construction of a game by name.
#[derive(Debug, Default, Clone)]
pub struct GameBuilder {
    names: Vec<String>,
    owners: Vec<Player>,
    actions: Vec<Vec<Action>>,
    index: HashMap<String, StateId>,
    initial: Option<StateId>,
    target: Option<StateId>,
    sink: Option<StateId>,
}

impl GameBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a state and returns its index. Redeclaring a name returns the
    /// existing index and keeps the first owner.
    pub fn state(&mut self, name: &str, owner: Player) -> StateId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.owners.push(owner);
        self.actions.push(Vec::new());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn has_action(&self, s: StateId, label: &str) -> bool {
        self.actions[s].iter().any(|a| a.label == label)
    }

    pub fn action(&mut self, s: StateId, label: &str, distribution: Vec<(StateId, BigRational)>) -> &mut Self {
        self.actions[s].push(Action::new(label, distribution));
        self
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = Some(s);
        self
    }

    pub fn target(&mut self, s: StateId) -> &mut Self {
        self.target = Some(s);
        self
    }

    pub fn sink(&mut self, s: StateId) -> &mut Self {
        self.sink = Some(s);
        self
    }

    /// Assembles the game as given, adding the target/sink self-loops when
    /// those states carry no actions, but without validating anything else.
    pub fn build_unchecked(mut self) -> Result<StochasticGame, ModelError> {
        let initial = self.initial.ok_or(ModelError::MissingDesignation("init"))?;
        let target = self.target.ok_or(ModelError::MissingDesignation("target"))?;
        let sink = self.sink.ok_or(ModelError::MissingDesignation("sink"))?;
        for s in [target, sink] {
            if self.actions[s].is_empty() {
                self.actions[s].push(Action::dirac(LOOP_LABEL, s));
            }
        }
        Ok(StochasticGame::from_parts(self.names, self.owners, self.actions, initial, target, sink))
    }

    /// Assembles and validates the game.
    pub fn build(self) -> Result<StochasticGame, ModelError> {
        let game = self.build_unchecked()?;
        let report = validate_game(&game);
        if report.is_empty() {
            Ok(game)
        } else {
            Err(ModelError::Malformed(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BlockingState { state: String },
    DistributionMass { state: String, action: String, mass: BigRational },
    ProbabilityOutOfRange { state: String, action: String, successor: String },
    UnknownSuccessor { state: String, action: String, index: usize },
    DuplicateSuccessor { state: String, action: String, successor: String },
    DuplicateAction { state: String, action: String },
    DuplicateStateName { state: String },
    TerminalShape { state: String },
    TargetIsSink,
    DesignationOutOfRange { which: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BlockingState { state } => write!(f, "blocking state {state}"),
            Violation::DistributionMass { state, action, mass } => {
                write!(f, "distribution mass ≠ 1 at ({state},{action}): {mass}")
            }
            Violation::ProbabilityOutOfRange { state, action, successor } => {
                write!(f, "probability out of (0,1] at ({state},{action}) -> {successor}")
            }
            Violation::UnknownSuccessor { state, action, index } => {
                write!(f, "unknown successor index {index} at ({state},{action})")
            }
            Violation::DuplicateSuccessor { state, action, successor } => {
                write!(f, "duplicate successor {successor} at ({state},{action})")
            }
            Violation::DuplicateAction { state, action } => write!(f, "duplicate action {action} at {state}"),
            Violation::DuplicateStateName { state } => write!(f, "duplicate state name {state}"),
            Violation::TerminalShape { state } => {
                write!(f, "terminal state {state} must have exactly one probability-1 self-loop")
            }
            Violation::TargetIsSink => write!(f, "target and sink must be distinct"),
            Violation::DesignationOutOfRange { which } => write!(f, "{which} refers to no state"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the structural invariants of a game. Violations are returned as
/// data; an empty report means the game is well formed.
///
/// Reachability of the target is not checked here; it is what
/// [`preprocess_merge_unreachable`] establishes.
pub fn validate_game(game: &StochasticGame) -> ValidationReport {
    let mut out = Vec::new();
    let n = game.len();
    for (which, s) in [("init", game.initial), ("target", game.target), ("sink", game.sink)] {
        if s >= n {
            out.push(Violation::DesignationOutOfRange { which });
        }
    }
    if !out.is_empty() {
        return ValidationReport { violations: out };
    }
    if game.target == game.sink {
        out.push(Violation::TargetIsSink);
    }
    let mut seen_names = HashMap::new();
    for s in game.states() {
        if seen_names.insert(game.names[s].as_str(), s).is_some() {
            out.push(Violation::DuplicateStateName { state: game.names[s].clone() });
        }
    }
    let one = BigRational::one();
    for s in game.states() {
        let state = &game.names[s];
        let actions = &game.actions[s];
        if actions.is_empty() {
            out.push(Violation::BlockingState { state: state.clone() });
            continue;
        }
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].iter().any(|b| b.label == a.label) {
                out.push(Violation::DuplicateAction { state: state.clone(), action: a.label.clone() });
            }
            let mut mass = BigRational::zero();
            let mut seen = Vec::with_capacity(a.distribution.len());
            for (to, p) in &a.distribution {
                if *to >= n {
                    out.push(Violation::UnknownSuccessor { state: state.clone(), action: a.label.clone(), index: *to });
                    continue;
                }
                if seen.contains(to) {
                    out.push(Violation::DuplicateSuccessor {
                        state: state.clone(),
                        action: a.label.clone(),
                        successor: game.names[*to].clone(),
                    });
                }
                seen.push(*to);
                if p <= &BigRational::zero() || p > &one {
                    out.push(Violation::ProbabilityOutOfRange {
                        state: state.clone(),
                        action: a.label.clone(),
                        successor: game.names[*to].clone(),
                    });
                }
                mass += p;
            }
            if mass != one {
                out.push(Violation::DistributionMass { state: state.clone(), action: a.label.clone(), mass });
            }
        }
    }
    for s in [game.target, game.sink] {
        let actions = &game.actions[s];
        let ok = actions.len() == 1 && actions[0].distribution.len() == 1 && actions[0].distribution[0] == (s, one.clone());
        if !ok {
            out.push(Violation::TerminalShape { state: game.names[s].clone() });
        }
    }
    ValidationReport { violations: out }
}

/// States from which the target is reachable in the underlying graph.
pub fn reaches_target(game: &StochasticGame) -> Vec<bool> {
    let n = game.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in game.states() {
        for a in &game.actions[s] {
            for to in a.successors() {
                preds[to].push(s);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![game.target];
    seen[game.target] = true;
    while let Some(s) = stack.pop() {
        for &p in &preds[s] {
            if !seen[p] {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// Replaces every state that cannot reach the target by the sink.
///
/// Dropped states disappear from the state list (surviving states keep their
/// relative order); transition mass into them is redirected to the sink and
/// merged with any existing sink successor.
pub fn preprocess_merge_unreachable(game: &StochasticGame) -> Result<StochasticGame, ModelError> {
    let report = validate_game(game);
    if !report.is_empty() {
        return Err(ModelError::Malformed(report));
    }
    let reach = reaches_target(game);
    let keep: Vec<bool> = game.states().map(|s| reach[s] || s == game.sink).collect();
    if keep.iter().all(|&k| k) {
        return Ok(game.clone());
    }
    let mut remap = vec![usize::MAX; game.len()];
    let mut next = 0;
    for s in game.states() {
        if keep[s] {
            remap[s] = next;
            next += 1;
        }
    }
    let sink = remap[game.sink];
    let map = |s: StateId| if keep[s] { remap[s] } else { sink };

    let mut names = Vec::with_capacity(next);
    let mut owners = Vec::with_capacity(next);
    let mut actions = Vec::with_capacity(next);
    for s in game.states().filter(|&s| keep[s]) {
        names.push(game.names[s].clone());
        owners.push(game.owners[s]);
        let acts = game.actions[s]
            .iter()
            .map(|a| {
                let mut dist: Vec<(StateId, BigRational)> = Vec::with_capacity(a.distribution.len());
                for (to, p) in &a.distribution {
                    let to = map(*to);
                    match dist.iter_mut().find(|(t, _)| *t == to) {
                        Some((_, q)) => *q += p,
                        None => dist.push((to, p.clone())),
                    }
                }
                Action::new(a.label.clone(), dist)
            })
            .collect();
        actions.push(acts);
    }
    Ok(StochasticGame::from_parts(names, owners, actions, map(game.initial), remap[game.target], sink))
}

/// A function from states to numbers in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Self {
        ValueVector(values)
    }

    pub fn constant(len: usize, value: f64) -> Self {
        ValueVector(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub(crate) fn as_mut_vec(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn in_unit_interval(&self) -> bool {
        self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

impl Index<StateId> for ValueVector {
    type Output = f64;
    fn index(&self, s: StateId) -> &f64 {
        &self.0[s]
    }
}

impl IndexMut<StateId> for ValueVector {
    fn index_mut(&mut self, s: StateId) -> &mut f64 {
        &mut self.0[s]
    }
}

impl AsRef<[f64]> for ValueVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ValueVector {
    fn from(v: Vec<f64>) -> Self {
        ValueVector(v)
    }
}

/// `f(s,a)`: the transition-weighted average of `f` over the successors of `(s,a)`.
pub fn action_value(game: &StochasticGame, f: &ValueVector, s: StateId, action: &str) -> Result<f64, ModelError> {
    let a = game.action_index(s, action).ok_or_else(|| ModelError::UnknownAction {
        state: game.name(s).to_string(),
        action: action.to_string(),
    })?;
    let flat = game.flat();
    Ok(flat.action_value(f.as_slice(), flat.action_id(s, a)))
}

/// Deterministic memoryless strategy of one player: an action index for every
/// state owned by that player.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub player: Player,
    choice: Vec<Option<usize>>,
}

impl Strategy {
    pub fn new(player: Player, choice: Vec<Option<usize>>) -> Self {
        Strategy { player, choice }
    }

    pub fn choice(&self, s: StateId) -> Option<usize> {
        self.choice.get(s).copied().flatten()
    }

    pub fn choices(&self) -> &[Option<usize>] {
        &self.choice
    }

    pub fn label<'g>(&self, game: &'g StochasticGame, s: StateId) -> Option<&'g str> {
        self.choice(s).map(|a| game.actions(s)[a].label.as_str())
    }

    /// Checks that exactly the player's states are covered and every choice is available.
    pub fn is_valid_for(&self, game: &StochasticGame) -> bool {
        self.choice.len() == game.len()
            && game.states().all(|s| match self.choice[s] {
                Some(a) => game.owner(s) == self.player && a < game.actions(s).len(),
                None => game.owner(s) != self.player,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::fig1;

    #[test]
    fn fig1_is_valid() {
        assert!(validate_game(&fig1()).is_empty());
    }

    #[test]
    fn short_distribution_is_reported() {
        let (names, owners, mut actions, i, t, s) = fig1().into_parts();
        let q = names.iter().position(|n| n == "q").unwrap();
        let c = actions[q].iter().position(|a| a.label == "c").unwrap();
        actions[q][c].distribution[0].1 = ratio(7, 30);
        let game = StochasticGame::from_parts(names, owners, actions, i, t, s);
        let report = validate_game(&game);
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().starts_with("distribution mass ≠ 1 at (q,c)"), "{report}");
    }

    #[test]
    fn blocking_state_is_reported() {
        let (names, owners, mut actions, i, t, s) = fig1().into_parts();
        actions[0].clear();
        let game = StochasticGame::from_parts(names, owners, actions, i, t, s);
        let report = validate_game(&game);
        assert_eq!(report.to_string(), "blocking state p");
    }

    #[test]
    fn duplicate_labels_and_bad_terminals() {
        let mut b = GameBuilder::new();
        let p = b.state("p", Player::Max);
        let one = b.state("one", Player::Max);
        let zero = b.state("zero", Player::Min);
        b.action(p, "a", vec![(one, ratio(1, 1))]);
        b.action(p, "a", vec![(zero, ratio(1, 1))]);
        b.action(one, "x", vec![(p, ratio(1, 1))]);
        b.initial(p).target(one).sink(zero);
        let err = b.build().unwrap_err();
        let ModelError::Malformed(report) = err else { panic!() };
        assert!(report.violations.contains(&Violation::DuplicateAction { state: "p".into(), action: "a".into() }));
        assert!(report.violations.contains(&Violation::TerminalShape { state: "one".into() }));
    }

    #[test]
    fn preprocessing_keeps_fig1() {
        let g = fig1();
        assert_eq!(preprocess_merge_unreachable(&g).unwrap(), g);
    }

    fn with_dead_cycle() -> StochasticGame {
        let mut b = GameBuilder::new();
        let p = b.state("p", Player::Max);
        let u = b.state("u", Player::Max);
        let v = b.state("v", Player::Min);
        let one = b.state("one", Player::Max);
        let zero = b.state("zero", Player::Min);
        b.action(p, "go", vec![(one, ratio(1, 2)), (u, ratio(1, 4)), (zero, ratio(1, 4))]);
        b.action(u, "x", vec![(v, ratio(1, 1))]);
        b.action(v, "y", vec![(u, ratio(1, 2)), (zero, ratio(1, 2))]);
        b.initial(p).target(one).sink(zero);
        b.build().unwrap()
    }

    #[test]
    fn dead_cycle_is_merged_into_sink() {
        let g = preprocess_merge_unreachable(&with_dead_cycle()).unwrap();
        assert_eq!(g.names(), &["p", "one", "zero"]);
        assert!(validate_game(&g).is_empty());
        let go = &g.actions(0)[0];
        assert_eq!(go.distribution, vec![(1, ratio(1, 2)), (2, ratio(1, 2))]);
        assert_eq!(preprocess_merge_unreachable(&g).unwrap(), g);
    }

    #[test]
    fn unreachable_initial_becomes_sink() {
        let mut b = GameBuilder::new();
        let p = b.state("p", Player::Max);
        let one = b.state("one", Player::Max);
        let zero = b.state("zero", Player::Min);
        b.action(p, "stay", vec![(p, ratio(1, 1))]);
        b.initial(p).target(one).sink(zero);
        let g = preprocess_merge_unreachable(&b.build().unwrap()).unwrap();
        assert_eq!(g.initial(), g.sink());
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn action_values_on_fig1() {
        let g = fig1();
        let q = g.state_id("q").unwrap();
        let p = g.state_id("p").unwrap();
        let mut v = ValueVector::constant(g.len(), 0.0);
        v[q] = 0.5;
        v[g.target()] = 1.0;
        assert!((action_value(&g, &v, q, "c").unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(action_value(&g, &v, p, "a").unwrap(), v[q]);
        let ones = ValueVector::constant(g.len(), 1.0);
        for s in g.states() {
            for a in g.actions(s) {
                assert_eq!(action_value(&g, &ones, s, &a.label).unwrap(), 1.0);
            }
        }
        assert!(matches!(action_value(&g, &v, p, "zz"), Err(ModelError::UnknownAction { .. })));
    }
}
