//! Line-oriented text formats for decks and experiments.
//!
//! ```text
//! # the three-box deck
//! var Face = K, Q, J
//! var Suit = S, D, H
//! card K H x2
//! card Q S
//! card Q D
//! card J D
//! card J S
//! ```
//!
//! The first `var` line declares the face variable and the second the suit
//! variable; label order is the canonical value order. `card FACE SUIT`
//! adds one card, and a trailing `xN` adds `N` copies. Blank lines and text
//! after `#` are ignored.
//!
//! An experiment file is a deck file plus:
//!
//! ```text
//! prepare Face=Q          # or Suit=~S
//! observe Suit?S          # partial: "is it S or not"
//! observe Face            # complete
//! postselect 2:Face=K     # ordinal optional; defaults to the last matching observation
//! ```

use std::fmt::Write as _;

use num::BigRational;
use thiserror::Error;

use crate::deck::{Deck, DeckError, Manifestation, Outcome, Pile, Schema, Variable};
use crate::exact::{ExactError, ExperimentSpec, Postselection};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Token(String),
    #[error(transparent)]
    Deck(#[from] DeckError),
    #[error(transparent)]
    Experiment(#[from] ExactError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

#[derive(Default)]
struct DeckBuilder {
    vars: Vec<(String, Vec<String>)>,
    cards: Vec<(usize, String, String, u32)>,
}

impl DeckBuilder {
    /// Consume a deck line. Returns false if the line is not a deck directive.
    fn line(&mut self, number: usize, line: &str) -> Result<bool, ParseError> {
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match keyword {
            "var" => {
                let (name, labels) = rest
                    .split_once('=')
                    .ok_or_else(|| syntax(number, "expected `var NAME = LABEL, LABEL, ...`"))?;
                let name = name.trim();
                if !is_identifier(name) {
                    return Err(syntax(number, format!("`{name}` is not a valid variable name")));
                }
                let labels: Vec<String> = labels.split(',').map(|l| l.trim().to_string()).collect();
                if let Some(bad) = labels.iter().find(|l| !is_identifier(l)) {
                    return Err(syntax(number, format!("`{bad}` is not a valid label")));
                }
                if self.vars.len() == 2 {
                    return Err(syntax(number, "a deck declares exactly two variables"));
                }
                self.vars.push((name.to_string(), labels));
                Ok(true)
            }
            "card" => {
                let words: Vec<&str> = rest.split_whitespace().collect();
                let copies = match words.as_slice() {
                    [_, _] => 1,
                    [_, _, count] => count
                        .strip_prefix('x')
                        .and_then(|n| n.parse::<u32>().ok())
                        .ok_or_else(|| syntax(number, format!("bad multiplicity `{count}`, expected xN")))?,
                    _ => return Err(syntax(number, "expected `card FACE SUIT [xN]`")),
                };
                self.cards
                    .push((number, words[0].to_string(), words[1].to_string(), copies));
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn finish(self) -> Result<Deck, ParseError> {
        let mut vars = self.vars.into_iter();
        let (Some((face, face_labels)), Some((suit, suit_labels))) = (vars.next(), vars.next()) else {
            return Err(ParseError::Token("a deck needs two `var` declarations".into()));
        };
        let schema = Schema::from_owned(face, face_labels, suit, suit_labels)?;
        let mut pile = Pile::new();
        for (number, face, suit, copies) in self.cards {
            if copies == 0 {
                return Err(syntax(number, "multiplicity must be positive"));
            }
            let card = schema.card(&face, &suit)?;
            pile.insert(card, copies);
        }
        Ok(Deck::new(schema, pile)?)
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|ch| ch.is_alphanumeric() || ch == '_' || ch == '-')
}

pub fn parse_deck(text: &str) -> Result<Deck, ParseError> {
    let mut builder = DeckBuilder::default();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if !builder.line(i + 1, line)? {
            return Err(syntax(i + 1, format!("unknown directive `{line}`")));
        }
    }
    builder.finish()
}

pub fn format_deck(deck: &Deck) -> String {
    let schema = deck.schema();
    let mut out = String::new();
    for var in Variable::BOTH {
        let _ = writeln!(out, "var {} = {}", schema.name(var), schema.labels(var).join(", "));
    }
    for (card, n) in deck.cards().iter() {
        let face = schema.label(card.value(Variable::Face));
        let suit = schema.label(card.value(Variable::Suit));
        if n == 1 {
            let _ = writeln!(out, "card {face} {suit}");
        } else {
            let _ = writeln!(out, "card {face} {suit} x{n}");
        }
    }
    out
}

/// `Face=Q` or `Suit=~S`.
pub fn parse_outcome(schema: &Schema, token: &str) -> Result<Outcome, ParseError> {
    let (name, value) = token
        .split_once('=')
        .ok_or_else(|| ParseError::Token(format!("expected VAR=VALUE or VAR=~VALUE, got `{token}`")))?;
    let variable = parse_variable(schema, name.trim())?;
    let value = value.trim();
    let (negated, label) = match value.strip_prefix('~') {
        Some(label) => (true, label),
        None => (false, value),
    };
    let v = schema
        .value(variable, label)
        .ok_or_else(|| ParseError::Token(format!("`{label}` is not a value of {}", schema.name(variable))))?;
    Ok(if negated {
        Outcome::Negated(v)
    } else {
        Outcome::Value(v)
    })
}

fn parse_variable(schema: &Schema, name: &str) -> Result<Variable, ParseError> {
    schema.variable(name).ok_or_else(|| {
        ParseError::Token(format!(
            "unknown variable `{name}` (deck has {} and {})",
            schema.name(Variable::Face),
            schema.name(Variable::Suit)
        ))
    })
}

/// `Suit` (complete) or `Suit?S` (partial on S).
pub fn parse_manifestation(schema: &Schema, token: &str) -> Result<Manifestation, ParseError> {
    match token.split_once('?') {
        None => Ok(Manifestation::Complete(parse_variable(schema, token.trim())?)),
        Some((name, label)) => {
            let variable = parse_variable(schema, name.trim())?;
            let v = schema
                .value(variable, label.trim())
                .ok_or_else(|| ParseError::Token(format!("`{label}` is not a value of {}", schema.name(variable))))?;
            Ok(Manifestation::PartialOn(v))
        }
    }
}

/// `[ORDINAL:]VAR=VALUE`.
pub fn parse_located_outcome(schema: &Schema, token: &str) -> Result<(Option<usize>, Outcome), ParseError> {
    match token.split_once(':') {
        Some((ordinal, rest)) => {
            let ordinal = ordinal
                .trim()
                .parse::<usize>()
                .map_err(|_| ParseError::Token(format!("bad ordinal in `{token}`")))?;
            Ok((Some(ordinal), parse_outcome(schema, rest)?))
        }
        None => Ok((None, parse_outcome(schema, token)?)),
    }
}

/// Ordinal of the last observation of `variable` strictly before `before`
/// (or anywhere, when `before` is `None`).
pub fn last_ordinal_of(manifestations: &[Manifestation], variable: Variable, before: Option<usize>) -> Option<usize> {
    let limit = before.map_or(manifestations.len(), |b| b.saturating_sub(1).min(manifestations.len()));
    manifestations[..limit]
        .iter()
        .rposition(|m| m.variable() == variable)
        .map(|i| i + 1)
}

/// Resolve a postselection token against the observation list.
pub fn resolve_postselection(
    manifestations: &[Manifestation],
    located: (Option<usize>, Outcome),
) -> Result<Postselection, ParseError> {
    let (ordinal, outcome) = located;
    let ordinal = match ordinal {
        Some(o) => o,
        None => last_ordinal_of(manifestations, outcome.variable(), None)
            .ok_or_else(|| ParseError::Token("no observation of the postselected variable".into()))?,
    };
    Ok(Postselection { ordinal, outcome })
}

pub fn parse_rational(token: &str) -> Result<BigRational, ParseError> {
    token
        .trim()
        .parse::<BigRational>()
        .map_err(|_| ParseError::Token(format!("`{token}` is not a rational number like 3/4")))
}

pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_experiment(text: &str) -> Result<ExperimentSpec, ParseError> {
    let mut builder = DeckBuilder::default();
    let mut prepare: Option<(usize, String)> = None;
    let mut observe: Vec<String> = Vec::new();
    let mut postselect: Option<(usize, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() || builder.line(number, line)? {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim().to_string();
        match keyword {
            "prepare" if prepare.is_none() => prepare = Some((number, rest)),
            "prepare" => return Err(syntax(number, "duplicate `prepare`")),
            "observe" => observe.push(rest),
            "postselect" if postselect.is_none() => postselect = Some((number, rest)),
            "postselect" => return Err(syntax(number, "duplicate `postselect`")),
            _ => return Err(syntax(number, format!("unknown directive `{line}`"))),
        }
    }
    let deck = builder.finish()?;
    let schema = deck.schema().clone();
    let (line, token) = prepare.ok_or_else(|| ParseError::Token("missing `prepare` line".into()))?;
    let preparation = parse_outcome(&schema, &token).map_err(|e| syntax(line, e.to_string()))?;
    let manifestations = observe
        .iter()
        .map(|t| parse_manifestation(&schema, t))
        .collect::<Result<Vec<_>, _>>()?;
    let postselection = postselect
        .map(|(line, token)| {
            parse_located_outcome(&schema, &token)
                .and_then(|loc| resolve_postselection(&manifestations, loc))
                .map_err(|e| syntax(line, e.to_string()))
        })
        .transpose()?;
    Ok(ExperimentSpec::new(deck, preparation, manifestations, postselection)?)
}

pub fn format_experiment(spec: &ExperimentSpec) -> String {
    let schema = spec.deck().schema();
    let mut out = format_deck(spec.deck());
    let _ = writeln!(out, "prepare {}", outcome_token(schema, &spec.preparation()));
    for m in spec.manifestations() {
        let _ = writeln!(out, "observe {}", schema.manifestation_label(m));
    }
    if let Some(post) = spec.postselection() {
        let _ = writeln!(
            out,
            "postselect {}:{}",
            post.ordinal,
            outcome_token(schema, &post.outcome)
        );
    }
    out
}

/// `Face=Q`, `Suit=~S`.
pub fn outcome_token(schema: &Schema, outcome: &Outcome) -> String {
    format!("{}={}", schema.name(outcome.variable()), schema.outcome_label(outcome))
}

/// The three-box deck `{(2)KH, QS, QD, JD, JS}`.
pub const THREE_BOX_DECK: &str = "\
var Face = K, Q, J
var Suit = S, D, H
card K H x2
card Q S
card Q D
card J D
card J S
";

/// `{(2)KS, KH, QS, (2)QH}`: two values per variable, three copies each.
pub const TWO_VALUE_DECK: &str = "\
var Face = K, Q
var Suit = S, H
card K S x2
card K H
card Q S
card Q H x2
";

pub fn three_box_deck() -> Deck {
    parse_deck(THREE_BOX_DECK).expect("built-in deck is valid")
}

pub fn two_value_deck() -> Deck {
    parse_deck(TWO_VALUE_DECK).expect("built-in deck is valid")
}
