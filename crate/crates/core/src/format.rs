//! The `sg v1` text format.
//!
//! ```text
//! sg v1
//! # comments run to the end of the line
//! state p min
//! state q max
//! state one max
//! state zero min
//! init p
//! target one
//! sink zero
//! act p a
//!   -> q 1
//! act q c
//!   -> q 1/3
//!   -> one 0.333333333333333333
//!   -> zero 1/3
//! ```
//!
//! State declaration order is the internal index order. Probabilities are
//! `<int>/<int>` or decimals with at most 18 fractional digits, converted
//! exactly. Target and sink carry no `act` blocks; their self-loops are
//! synthesized. LF and CRLF line endings are accepted; the serializer emits LF.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::model::{
    preprocess_merge_unreachable, validate_game, GameBuilder, ModelError, Player, StateId, StochasticGame,
    ValidationReport,
};

pub const HEADER: &str = "sg v1";
const MAX_FRACTION_DIGITS: usize = 18;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid model: {0}")]
    Validation(ValidationReport),
}

impl ParseError {
    fn at(tok: &Token<'_>, message: impl Into<String>) -> Self {
        ParseError::Syntax { line: tok.line, column: tok.column, message: message.into() }
    }

    pub fn message(&self) -> String {
        match self {
            ParseError::Syntax { message, .. } => message.clone(),
            ParseError::Validation(r) => r.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(line: &str, line_no: usize) -> Vec<Token<'_>> {
    let content = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &content[s..i], line: line_no, column: content[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &content[s..], line: line_no, column: content[..s].chars().count() + 1 });
    }
    out
}

fn digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Parses a non-negative rational literal: `<int>/<int>` or a decimal with
/// at most 18 fractional digits.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    if let Some((num, den)) = text.split_once('/') {
        if !digits(num) || !digits(den) {
            return Err(format!("malformed rational `{text}`"));
        }
        let den: BigInt = den.parse().map_err(|_| format!("malformed rational `{text}`"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in `{text}`"));
        }
        let num: BigInt = num.parse().map_err(|_| format!("malformed rational `{text}`"))?;
        return Ok(BigRational::new(num, den));
    }
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if !digits(int) || (text.contains('.') && !digits(frac)) {
        return Err(format!("malformed number `{text}`"));
    }
    if frac.len() > MAX_FRACTION_DIGITS {
        return Err(format!("more than {MAX_FRACTION_DIGITS} fractional digits in `{text}`"));
    }
    let num: BigInt = format!("{int}{frac}").parse().map_err(|_| format!("malformed number `{text}`"))?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(num, den))
}

/// [`parse_rational`] restricted to `(0, 1]`.
pub fn parse_probability(text: &str) -> Result<BigRational, String> {
    let p = parse_rational(text)?;
    if p.is_zero() || p > BigRational::one() {
        return Err(format!("probability out of range: `{text}`"));
    }
    Ok(p)
}

struct ActBlock<'a> {
    state: Token<'a>,
    label: Token<'a>,
    edges: Vec<(Token<'a>, BigRational)>,
}

/// Parses, validates and preprocesses a model.
pub fn parse_model(text: &str) -> Result<StochasticGame, ParseError> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let mut header_seen = false;
    let mut states: Vec<(Token<'_>, Player)> = Vec::new();
    let mut designations: HashMap<&str, Token<'_>> = HashMap::new();
    let mut blocks: Vec<ActBlock<'_>> = Vec::new();
    let mut last_line = 1;

    for (line_no, line) in lines.by_ref() {
        last_line = line_no;
        let toks = tokenize(line, line_no);
        let Some(first) = toks.first() else { continue };
        if !header_seen {
            if toks.len() != 2 || toks[0].text != "sg" || toks[1].text != "v1" {
                return Err(ParseError::at(first, format!("expected header `{HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        match first.text {
            "state" => {
                let [_, name, owner] = toks[..] else {
                    return Err(ParseError::at(first, "expected `state <name> <max|min>`"));
                };
                let owner = match owner.text {
                    "max" => Player::Max,
                    "min" => Player::Min,
                    _ => return Err(ParseError::at(&owner, "owner must be `max` or `min`")),
                };
                if states.iter().any(|(t, _)| t.text == name.text) {
                    return Err(ParseError::at(&name, format!("duplicate state `{}`", name.text)));
                }
                states.push((name, owner));
            }
            kw @ ("init" | "target" | "sink") => {
                let [_, name] = toks[..] else {
                    return Err(ParseError::at(first, format!("expected `{kw} <name>`")));
                };
                if designations.insert(kw, name).is_some() {
                    return Err(ParseError::at(first, format!("duplicate `{kw}` line")));
                }
            }
            "act" => {
                let [_, state, label] = toks[..] else {
                    return Err(ParseError::at(first, "expected `act <state> <label>`"));
                };
                if blocks.iter().any(|b| b.state.text == state.text && b.label.text == label.text) {
                    return Err(ParseError::at(&label, format!("duplicate action `{}` at `{}`", label.text, state.text)));
                }
                blocks.push(ActBlock { state, label, edges: Vec::new() });
            }
            "->" => {
                let [_, to, prob] = toks[..] else {
                    return Err(ParseError::at(first, "expected `-> <state> <prob>`"));
                };
                let Some(block) = blocks.last_mut() else {
                    return Err(ParseError::at(first, "transition outside of an `act` block"));
                };
                let p = parse_probability(prob.text).map_err(|m| ParseError::at(&prob, m))?;
                block.edges.push((to, p));
            }
            other => return Err(ParseError::at(first, format!("unknown keyword `{other}`"))),
        }
    }
    let eof = Token { text: "", line: last_line, column: 1 };
    if !header_seen {
        return Err(ParseError::at(&eof, format!("expected header `{HEADER}`")));
    }

    let mut b = GameBuilder::new();
    for (name, owner) in &states {
        b.state(name.text, *owner);
    }
    let resolve = |tok: &Token<'_>| -> Result<StateId, ParseError> {
        b.id(tok.text).ok_or_else(|| ParseError::at(tok, format!("undeclared state `{}`", tok.text)))
    };
    let mut ids = [0; 3];
    for (slot, kw) in ["init", "target", "sink"].iter().enumerate() {
        let tok = designations.get(kw).ok_or_else(|| ParseError::at(&eof, format!("missing `{kw}` line")))?;
        ids[slot] = resolve(tok)?;
    }
    let [initial, target, sink] = ids;
    let mut resolved = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let s = resolve(&block.state)?;
        if s == target || s == sink {
            return Err(ParseError::at(&block.state, "target and sink must not carry `act` blocks"));
        }
        if block.edges.is_empty() {
            return Err(ParseError::at(&block.label, "action without transitions"));
        }
        let dist = block.edges.iter().map(|(t, p)| Ok((resolve(t)?, p.clone()))).collect::<Result<Vec<_>, ParseError>>()?;
        resolved.push((s, block.label.text, dist));
    }
    for (s, label, dist) in resolved {
        b.action(s, label, dist);
    }
    b.initial(initial).target(target).sink(sink);
    let game = b.build_unchecked().map_err(|e| ParseError::at(&eof, e.to_string()))?;
    let report = validate_game(&game);
    if !report.is_empty() {
        return Err(ParseError::Validation(report));
    }
    preprocess_merge_unreachable(&game).map_err(|e| match e {
        ModelError::Malformed(r) => ParseError::Validation(r),
        other => ParseError::at(&eof, other.to_string()),
    })
}

/// Canonical text of a game: header, states in index order, designations,
/// then the action blocks of every non-terminal state in index order.
pub fn serialize_model(game: &StochasticGame) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for s in game.states() {
        let _ = writeln!(out, "state {} {}", game.name(s), game.owner(s));
    }
    let _ = writeln!(out, "init {}", game.name(game.initial()));
    let _ = writeln!(out, "target {}", game.name(game.target()));
    let _ = writeln!(out, "sink {}", game.name(game.sink()));
    for s in game.states().filter(|&s| !game.is_terminal(s)) {
        for a in game.actions(s) {
            let _ = writeln!(out, "act {} {}", game.name(s), a.label);
            for (t, p) in &a.distribution {
                let _ = writeln!(out, "  -> {} {}", game.name(*t), p);
            }
        }
    }
    out
}
