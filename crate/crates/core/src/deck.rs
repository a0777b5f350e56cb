//! The card system: a deck of two-variable cards split into `These` and
//! `Others`, plus a one-slot memory holding the name of the last observed
//! variable.
//!
//! Preparing `P = p` puts every card carrying `p` into `These` and the rest
//! into `Others`. Preparing the negated value `p~` does the literal
//! opposite. Observing a variable draws one card, from `These` when the
//! memory already names that variable and from `Others` otherwise; in the
//! second case the reported outcome is then prepared.
//!
//! Randomness is not owned here. Every draw comes from a [`DrawSource`], so
//! the exact engine and the sampler run the same transition rule.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigRational, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the two marks on a card.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    Face,
    Suit,
}

impl Variable {
    pub const BOTH: [Variable; 2] = [Variable::Face, Variable::Suit];

    pub fn other(self) -> Variable {
        match self {
            Variable::Face => Variable::Suit,
            Variable::Suit => Variable::Face,
        }
    }

    fn slot(self) -> usize {
        match self {
            Variable::Face => 0,
            Variable::Suit => 1,
        }
    }
}

/// A value of one variable, stored as the position of its label in the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CardValue {
    pub variable: Variable,
    pub index: u8,
}

impl CardValue {
    pub fn new(variable: Variable, index: u8) -> Self {
        Self { variable, index }
    }
}

/// A card. Ordering is face position first, then suit position, which is the
/// canonical order used to flatten piles for drawing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Card {
    pub face: u8,
    pub suit: u8,
}

impl Card {
    pub fn new(face: u8, suit: u8) -> Self {
        Self { face, suit }
    }

    pub fn value(&self, variable: Variable) -> CardValue {
        match variable {
            Variable::Face => CardValue::new(Variable::Face, self.face),
            Variable::Suit => CardValue::new(Variable::Suit, self.suit),
        }
    }

    pub fn carries(&self, value: CardValue) -> bool {
        self.value(value.variable) == value
    }
}

/// A reported outcome, or equivalently a preparation target: either a value
/// or the negation of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Value(CardValue),
    Negated(CardValue),
}

/// Preparation uses the same two shapes as a reported outcome.
pub type PreparationTarget = Outcome;

impl Outcome {
    pub fn value(&self) -> CardValue {
        match *self {
            Outcome::Value(v) | Outcome::Negated(v) => v,
        }
    }

    pub fn variable(&self) -> Variable {
        self.value().variable
    }

    pub fn is_negated(&self) -> bool {
        matches!(self, Outcome::Negated(_))
    }

    /// Whether a card satisfies the proposition.
    pub fn admits(&self, card: &Card) -> bool {
        match *self {
            Outcome::Value(v) => card.carries(v),
            Outcome::Negated(v) => !card.carries(v),
        }
    }
}

/// How a variable is observed: all of its values can be reported, or only
/// "is it `v` or not".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Manifestation {
    Complete(Variable),
    PartialOn(CardValue),
}

/// Spec-facing name for [`Manifestation`].
pub type ManifestationSpec = Manifestation;

impl Manifestation {
    pub fn variable(&self) -> Variable {
        match *self {
            Manifestation::Complete(var) => var,
            Manifestation::PartialOn(v) => v.variable,
        }
    }

    pub fn report(&self, card: &Card) -> Outcome {
        match *self {
            Manifestation::Complete(var) => Outcome::Value(card.value(var)),
            Manifestation::PartialOn(v) if card.carries(v) => Outcome::Value(v),
            Manifestation::PartialOn(v) => Outcome::Negated(v),
        }
    }

    /// Every outcome this manifestation can report for a variable with
    /// `arity` values.
    pub fn outcomes(&self, arity: u8) -> Vec<Outcome> {
        match *self {
            Manifestation::Complete(var) => (0..arity).map(|i| Outcome::Value(CardValue::new(var, i))).collect(),
            Manifestation::PartialOn(v) => vec![Outcome::Value(v), Outcome::Negated(v)],
        }
    }
}

/// A multiset of cards with positive multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pile {
    cards: BTreeMap<Card, u32>,
}

impl Pile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, card: Card, copies: u32) {
        if copies > 0 {
            *self.cards.entry(card).or_insert(0) += copies;
        }
    }

    pub fn len(&self) -> usize {
        self.cards.values().map(|&n| n as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn multiplicity(&self, card: &Card) -> u32 {
        self.cards.get(card).copied().unwrap_or(0)
    }

    /// Distinct cards with their multiplicities, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&Card, u32)> + '_ {
        self.cards.iter().map(|(c, &n)| (c, n))
    }

    /// The card at `index` in the canonical flattened sequence.
    pub fn nth(&self, index: usize) -> Option<Card> {
        let mut remaining = index;
        for (card, &n) in &self.cards {
            let n = n as usize;
            if remaining < n {
                return Some(*card);
            }
            remaining -= n;
        }
        None
    }

    pub fn count_where(&self, pred: impl Fn(&Card) -> bool) -> usize {
        self.cards
            .iter()
            .filter(|(c, _)| pred(c))
            .map(|(_, &n)| n as usize)
            .sum()
    }

    pub fn filter(&self, pred: impl Fn(&Card) -> bool) -> Pile {
        Pile {
            cards: self
                .cards
                .iter()
                .filter(|(c, _)| pred(c))
                .map(|(c, &n)| (*c, n))
                .collect(),
        }
    }

    pub fn union(&self, other: &Pile) -> Pile {
        let mut out = self.clone();
        for (card, n) in other.iter() {
            out.insert(*card, n);
        }
        out
    }

    /// Every multiplicity multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Pile {
        let mut out = Pile::new();
        for (card, n) in self.iter() {
            out.insert(*card, n * factor);
        }
        out
    }

    /// The value of `variable` shared by every card, if there is one.
    fn common_value(&self, variable: Variable) -> Option<CardValue> {
        let mut values = self.cards.keys().map(|c| c.value(variable));
        let first = values.next()?;
        values.all(|v| v == first).then_some(first)
    }
}

impl FromIterator<(Card, u32)> for Pile {
    fn from_iter<I: IntoIterator<Item = (Card, u32)>>(iter: I) -> Self {
        let mut pile = Pile::new();
        for (card, n) in iter {
            pile.insert(card, n);
        }
        pile
    }
}

/// Names of the two variables and their ordered value labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    names: [String; 2],
    labels: [Vec<String>; 2],
}

impl Schema {
    pub fn new(
        face_name: impl Into<String>,
        face_labels: &[&str],
        suit_name: impl Into<String>,
        suit_labels: &[&str],
    ) -> Result<Self, DeckError> {
        Self::from_owned(
            face_name.into(),
            face_labels.iter().map(|s| s.to_string()).collect(),
            suit_name.into(),
            suit_labels.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn from_owned(
        face_name: String,
        face_labels: Vec<String>,
        suit_name: String,
        suit_labels: Vec<String>,
    ) -> Result<Self, DeckError> {
        if face_name == suit_name {
            return Err(DeckError::DuplicateVariable(face_name));
        }
        for (name, labels) in [(&face_name, &face_labels), (&suit_name, &suit_labels)] {
            if labels.is_empty() {
                return Err(DeckError::NoValues(name.clone()));
            }
            for (i, label) in labels.iter().enumerate() {
                if labels[..i].contains(label) {
                    return Err(DeckError::DuplicateLabel {
                        variable: name.clone(),
                        label: label.clone(),
                    });
                }
            }
        }
        if face_labels.len() != suit_labels.len() {
            return Err(DeckError::ArityMismatch {
                face: face_labels.len(),
                suit: suit_labels.len(),
            });
        }
        if face_labels.len() > u8::MAX as usize {
            return Err(DeckError::TooManyValues(face_labels.len()));
        }
        Ok(Self {
            names: [face_name, suit_name],
            labels: [face_labels, suit_labels],
        })
    }

    /// Values per variable.
    pub fn arity(&self) -> u8 {
        self.labels[0].len() as u8
    }

    pub fn name(&self, variable: Variable) -> &str {
        &self.names[variable.slot()]
    }

    pub fn labels(&self, variable: Variable) -> &[String] {
        &self.labels[variable.slot()]
    }

    pub fn label(&self, value: CardValue) -> &str {
        &self.labels[value.variable.slot()][value.index as usize]
    }

    pub fn variable(&self, name: &str) -> Option<Variable> {
        Variable::BOTH.into_iter().find(|v| self.name(*v) == name)
    }

    pub fn value(&self, variable: Variable, label: &str) -> Option<CardValue> {
        self.labels(variable)
            .iter()
            .position(|l| l == label)
            .map(|i| CardValue::new(variable, i as u8))
    }

    pub fn values(&self, variable: Variable) -> impl Iterator<Item = CardValue> {
        (0..self.arity()).map(move |i| CardValue::new(variable, i))
    }

    pub fn card(&self, face: &str, suit: &str) -> Result<Card, DeckError> {
        let f = self
            .value(Variable::Face, face)
            .ok_or_else(|| self.unknown(Variable::Face, face))?;
        let s = self
            .value(Variable::Suit, suit)
            .ok_or_else(|| self.unknown(Variable::Suit, suit))?;
        Ok(Card::new(f.index, s.index))
    }

    fn unknown(&self, variable: Variable, label: &str) -> DeckError {
        DeckError::UnknownLabel {
            variable: self.name(variable).to_string(),
            label: label.to_string(),
        }
    }

    /// `KH`-style short name: face label followed by suit label.
    pub fn card_label(&self, card: &Card) -> String {
        format!(
            "{}{}",
            self.label(card.value(Variable::Face)),
            self.label(card.value(Variable::Suit))
        )
    }

    pub fn outcome_label(&self, outcome: &Outcome) -> String {
        match outcome {
            Outcome::Value(v) => self.label(*v).to_string(),
            Outcome::Negated(v) => format!("~{}", self.label(*v)),
        }
    }

    /// `Face`, `Suit?S`.
    pub fn manifestation_label(&self, m: &Manifestation) -> String {
        match m {
            Manifestation::Complete(var) => self.name(*var).to_string(),
            Manifestation::PartialOn(v) => format!("{}?{}", self.name(v.variable), self.label(*v)),
        }
    }

    /// `(2)KH, QS`.
    pub fn pile_label(&self, pile: &Pile) -> String {
        pile.iter()
            .map(|(card, n)| {
                if n == 1 {
                    self.card_label(card)
                } else {
                    format!("({}){}", n, self.card_label(card))
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// `[These | Others]`.
    pub fn state_label(&self, state: &SystemState) -> String {
        format!(
            "[{} | {}]",
            self.pile_label(&state.these),
            self.pile_label(&state.others)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeckError {
    #[error("deck has no cards")]
    EmptyDeck,
    #[error(
        "value {value} appears {count} times, but {reference} appears {reference_count} times; \
         every value of every variable must appear equally often"
    )]
    UnequalValueCounts {
        value: String,
        count: u32,
        reference: String,
        reference_count: u32,
    },
    #[error("card {card} has multiplicity 0")]
    ZeroMultiplicity { card: String },
    #[error("unknown {variable} label `{label}`")]
    UnknownLabel { variable: String, label: String },
    #[error("label `{label}` declared twice for {variable}")]
    DuplicateLabel { variable: String, label: String },
    #[error("both variables are named `{0}`")]
    DuplicateVariable(String),
    #[error("variable {0} declares no values")]
    NoValues(String),
    #[error("variables must have the same number of values (face has {face}, suit has {suit})")]
    ArityMismatch { face: usize, suit: usize },
    #[error("{0} values per variable is more than supported")]
    TooManyValues(usize),
}

/// A validated deck: each value of each variable appears exactly `N` times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deck {
    schema: Schema,
    cards: Pile,
    copies: u32,
}

/// Build a deck from `(face, suit, multiplicity)` entries, enforcing the
/// equal-count rule.
pub fn validate_deck(schema: Schema, raw: &[(&str, &str, u32)]) -> Result<Deck, DeckError> {
    let mut cards = Pile::new();
    for &(face, suit, n) in raw {
        let card = schema.card(face, suit)?;
        if n == 0 {
            return Err(DeckError::ZeroMultiplicity {
                card: schema.card_label(&card),
            });
        }
        cards.insert(card, n);
    }
    Deck::new(schema, cards)
}

impl Deck {
    pub fn new(schema: Schema, cards: Pile) -> Result<Self, DeckError> {
        if cards.is_empty() {
            return Err(DeckError::EmptyDeck);
        }
        let reference = CardValue::new(Variable::Face, 0);
        let reference_count = cards.count_where(|c| c.carries(reference)) as u32;
        for var in Variable::BOTH {
            for value in schema.values(var) {
                let count = cards.count_where(|c| c.carries(value)) as u32;
                if count != reference_count {
                    return Err(DeckError::UnequalValueCounts {
                        value: schema.label(value).to_string(),
                        count,
                        reference: schema.label(reference).to_string(),
                        reference_count,
                    });
                }
            }
        }
        Ok(Self {
            schema,
            cards,
            copies: reference_count,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn cards(&self) -> &Pile {
        &self.cards
    }

    /// `V`.
    pub fn arity(&self) -> u8 {
        self.schema.arity()
    }

    /// `N`, the number of cards carrying any given value.
    pub fn copies(&self) -> u32 {
        self.copies
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    /// `N(p·q)`: cards carrying both values. The two values must belong to
    /// different variables.
    pub fn joint_count(&self, a: CardValue, b: CardValue) -> u32 {
        debug_assert_ne!(a.variable, b.variable);
        self.cards.count_where(|c| c.carries(a) && c.carries(b)) as u32
    }

    pub fn prepare(&self, target: PreparationTarget) -> SystemState {
        prepare(self, target)
    }
}

impl fmt::Display for Deck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.schema.pile_label(&self.cards))
    }
}

/// Which pile a draw was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PileName {
    These,
    Others,
}

/// Complete internal state of the card machine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub these: Pile,
    pub others: Pile,
    pub memory: Variable,
}

pub fn prepare(deck: &Deck, target: PreparationTarget) -> SystemState {
    SystemState::prepared(deck.cards(), target)
}

impl SystemState {
    /// Partition `cards` for the target and set the memory to its variable.
    pub fn prepared(cards: &Pile, target: PreparationTarget) -> Self {
        Self {
            these: cards.filter(|c| target.admits(c)),
            others: cards.filter(|c| !target.admits(c)),
            memory: target.variable(),
        }
    }

    /// `These ⊎ Others`.
    pub fn cards(&self) -> Pile {
        self.these.union(&self.others)
    }

    /// The pile a manifestation of `variable` draws from.
    pub fn pool(&self, variable: Variable) -> (PileName, &Pile) {
        if self.memory == variable {
            (PileName::These, &self.these)
        } else {
            (PileName::Others, &self.others)
        }
    }

    /// The value the state currently holds for `variable`, if any. Only the
    /// remembered variable can hold one: a plain value when every card in
    /// `These` carries it, a negated value when `Others` is exactly the cards
    /// carrying it.
    pub fn value_of(&self, variable: Variable) -> Option<Outcome> {
        if self.memory != variable {
            return None;
        }
        if let Some(v) = self.these.common_value(variable) {
            return Some(Outcome::Value(v));
        }
        let v = self.others.common_value(variable)?;
        (self.these.count_where(|c| c.carries(v)) == 0).then_some(Outcome::Negated(v))
    }
}

/// Supplies uniform indices into a pile of the given (non-zero) length.
pub trait DrawSource {
    fn draw(&mut self, pool_len: usize) -> usize;
}

impl<F: FnMut(usize) -> usize> DrawSource for F {
    fn draw(&mut self, pool_len: usize) -> usize {
        self(pool_len)
    }
}

/// Always returns the same index.
#[derive(Debug, Clone, Copy)]
pub struct FixedDraw(pub usize);

impl DrawSource for FixedDraw {
    fn draw(&mut self, _pool_len: usize) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObserveError {
    #[error("draw index {index} is outside a pool of {pool_len} cards")]
    DrawOutOfRange { index: usize, pool_len: usize },
    #[error("the {0:?} pile is empty")]
    EmptyPool(PileName),
}

/// Snapshot of one observation, before and after.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub manifestation: Manifestation,
    pub pool: PileName,
    pub drawn: Card,
    pub outcome: Outcome,
    pub before: SystemState,
    pub after: SystemState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub outcome: Outcome,
    pub state: SystemState,
    pub record: EventRecord,
}

pub fn observe(state: &SystemState, m: Manifestation, draw: &mut impl DrawSource) -> Result<Observation, ObserveError> {
    let (pool, drawn, outcome) = draw_card(state, m, draw)?;
    let after = successor(state, m.variable(), outcome);
    Ok(Observation {
        outcome,
        state: after.clone(),
        record: EventRecord {
            manifestation: m,
            pool,
            drawn,
            outcome,
            before: state.clone(),
            after,
        },
    })
}

/// [`observe`] without the event record, updating `state` in place.
pub fn advance(state: &mut SystemState, m: Manifestation, draw: &mut impl DrawSource) -> Result<Outcome, ObserveError> {
    let (_, _, outcome) = draw_card(state, m, draw)?;
    if state.memory != m.variable() {
        *state = SystemState::prepared(&state.cards(), outcome);
    }
    Ok(outcome)
}

fn draw_card(
    state: &SystemState,
    m: Manifestation,
    draw: &mut impl DrawSource,
) -> Result<(PileName, Card, Outcome), ObserveError> {
    let (pool_name, pool) = state.pool(m.variable());
    if pool.is_empty() {
        return Err(ObserveError::EmptyPool(pool_name));
    }
    let pool_len = pool.len();
    let index = draw.draw(pool_len);
    let drawn = pool
        .nth(index)
        .ok_or(ObserveError::DrawOutOfRange { index, pool_len })?;
    Ok((pool_name, drawn, m.report(&drawn)))
}

/// State after reporting `outcome` for an observation of `variable`.
pub(crate) fn successor(state: &SystemState, variable: Variable, outcome: Outcome) -> SystemState {
    if state.memory == variable {
        state.clone()
    } else {
        SystemState::prepared(&state.cards(), outcome)
    }
}

/// Exact single-step law: matching cards in the selected pool over its size.
/// Lists every reportable outcome, including those with probability zero.
pub fn step_distribution(state: &SystemState, m: Manifestation) -> BTreeMap<Outcome, BigRational> {
    let (_, pool) = state.pool(m.variable());
    let total = pool.len();
    let mut dist: BTreeMap<Outcome, BigRational> = match m {
        Manifestation::Complete(var) => {
            let cards = state.cards();
            cards
                .iter()
                .map(|(c, _)| (Outcome::Value(c.value(var)), BigRational::zero()))
                .collect()
        }
        Manifestation::PartialOn(v) => [Outcome::Value(v), Outcome::Negated(v)]
            .into_iter()
            .map(|o| (o, BigRational::zero()))
            .collect(),
    };
    if total == 0 {
        return dist;
    }
    for (card, n) in pool.iter() {
        let entry = dist.entry(m.report(card)).or_insert_with(BigRational::zero);
        *entry += BigRational::new(n.into(), total.into());
    }
    dist
}

/// Sum of a distribution's probabilities.
pub fn total_probability<'a>(dist: impl IntoIterator<Item = &'a BigRational>) -> BigRational {
    dist.into_iter().fold(BigRational::zero(), |acc, p| acc + p)
}

/// Whether a distribution sums to exactly one.
pub fn is_normalized<'a>(dist: impl IntoIterator<Item = &'a BigRational>) -> bool {
    total_probability(dist).is_one()
}
