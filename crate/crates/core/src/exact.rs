//! Exact probabilities by full enumeration of outcome sequences.
//!
//! An experiment is a preparation (ordinal 0) followed by up to
//! [`MAX_MANIFESTATIONS`] observations (ordinals 1, 2, ...), optionally
//! postselected on the outcome at one ordinal. Because the post-state of an
//! observation depends only on the reported outcome, each node of the tree
//! has one child per reportable outcome, zero-probability ones included.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, Integer, One, Signed, Zero};
use thiserror::Error;

use crate::deck::{
    step_distribution, successor, CardValue, Deck, Manifestation, Outcome, Pile, PreparationTarget, SystemState,
    Variable,
};

/// Longest observation sequence the enumerator accepts.
pub const MAX_MANIFESTATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("{len} observations requested; at most {max} are supported")]
    SequenceTooLong { len: usize, max: usize },
    #[error("a deck needs at least two values per variable to run experiments")]
    DegenerateDeck,
    #[error("invalid postselection: {0}")]
    InvalidPostselection(String),
    #[error("experiment has no postselection")]
    MissingPostselection,
    #[error("ordinal {ordinal} is not valid here (allowed: {allowed})")]
    InvalidOrdinal { ordinal: usize, allowed: String },
    #[error("conditional probability undefined: the condition has probability 0")]
    UndefinedConditional,
    #[error("invalid closed-form arguments: {0}")]
    InvalidArguments(String),
    #[error("mixture weights sum to {0}, not 1")]
    WeightsNotNormalized(String),
    #[error("mixture weight {0} is not positive")]
    InvalidWeight(String),
    #[error("mixture components remember different variables")]
    MemoryMismatch,
}

/// Postselect runs whose outcome at `ordinal` equals `outcome`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Postselection {
    pub ordinal: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentSpec {
    deck: Deck,
    preparation: PreparationTarget,
    manifestations: Vec<Manifestation>,
    postselection: Option<Postselection>,
}

impl ExperimentSpec {
    pub fn new(
        deck: Deck,
        preparation: PreparationTarget,
        manifestations: Vec<Manifestation>,
        postselection: Option<Postselection>,
    ) -> Result<Self, ExactError> {
        if deck.arity() < 2 {
            return Err(ExactError::DegenerateDeck);
        }
        if manifestations.len() > MAX_MANIFESTATIONS {
            return Err(ExactError::SequenceTooLong {
                len: manifestations.len(),
                max: MAX_MANIFESTATIONS,
            });
        }
        let arity = deck.arity();
        let in_schema = |v: CardValue| v.index < arity;
        if !in_schema(preparation.value())
            || manifestations.iter().any(|m| match m {
                Manifestation::PartialOn(v) => !in_schema(*v),
                Manifestation::Complete(_) => false,
            })
        {
            return Err(ExactError::InvalidArguments("value outside the deck schema".into()));
        }
        if let Some(post) = postselection {
            let Some(m) = post.ordinal.checked_sub(1).and_then(|i| manifestations.get(i)) else {
                return Err(ExactError::InvalidPostselection(format!(
                    "ordinal {} does not name an observation (1..={})",
                    post.ordinal,
                    manifestations.len()
                )));
            };
            if m.variable() != post.outcome.variable() || !in_schema(post.outcome.value()) {
                return Err(ExactError::InvalidPostselection(format!(
                    "observation {} does not report values of that variable",
                    post.ordinal
                )));
            }
        }
        Ok(Self {
            deck,
            preparation,
            manifestations,
            postselection,
        })
    }

    pub fn deck(&self) -> &Deck {
        &self.deck
    }

    pub fn preparation(&self) -> PreparationTarget {
        self.preparation
    }

    pub fn manifestations(&self) -> &[Manifestation] {
        &self.manifestations
    }

    pub fn postselection(&self) -> Option<Postselection> {
        self.postselection
    }

    /// The postselection as a pattern; `Always` when there is none.
    pub fn acceptance_pattern(&self) -> Pattern {
        match self.postselection {
            Some(p) => Pattern::at(p.ordinal, p.outcome),
            None => Pattern::Always,
        }
    }

    pub fn with_postselection(&self, postselection: Option<Postselection>) -> Result<Self, ExactError> {
        Self::new(
            self.deck.clone(),
            self.preparation,
            self.manifestations.clone(),
            postselection,
        )
    }
}

/// A proposition over an outcome sequence. Atoms compare the reported
/// outcome literally: `~S` matches only a reported `~S`, never `H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Always,
    /// The outcome at an ordinal. Ordinal 0 is the preparation.
    At {
        ordinal: usize,
        outcome: Outcome,
    },
    And(Box<Pattern>, Box<Pattern>),
    Or(Box<Pattern>, Box<Pattern>),
    Not(Box<Pattern>),
}

impl Pattern {
    pub fn at(ordinal: usize, outcome: Outcome) -> Self {
        Pattern::At { ordinal, outcome }
    }

    pub fn and(self, other: Pattern) -> Self {
        Pattern::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Pattern) -> Self {
        Pattern::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Self {
        Pattern::Not(Box::new(self))
    }

    /// `sequence[0]` is the preparation.
    pub fn matches(&self, sequence: &[Outcome]) -> bool {
        match self {
            Pattern::Always => true,
            Pattern::At { ordinal, outcome } => sequence.get(*ordinal) == Some(outcome),
            Pattern::And(a, b) => a.matches(sequence) && b.matches(sequence),
            Pattern::Or(a, b) => a.matches(sequence) || b.matches(sequence),
            Pattern::Not(a) => !a.matches(sequence),
        }
    }

    fn max_ordinal(&self) -> usize {
        match self {
            Pattern::Always => 0,
            Pattern::At { ordinal, .. } => *ordinal,
            Pattern::And(a, b) | Pattern::Or(a, b) => a.max_ordinal().max(b.max_ordinal()),
            Pattern::Not(a) => a.max_ordinal(),
        }
    }
}

/// A node of the outcome tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchNode {
    pub state: SystemState,
    /// Preparation followed by every outcome reported so far.
    pub outcomes: Vec<Outcome>,
    /// Conditional probability of the last step given the parent.
    pub step: BigRational,
    /// Probability of the whole path from the root.
    pub probability: BigRational,
    pub children: Vec<BranchNode>,
}

impl BranchNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchTree {
    pub root: BranchNode,
    pub depth: usize,
}

pub fn enumerate(spec: &ExperimentSpec) -> BranchTree {
    let root = BranchNode {
        state: spec.deck.prepare(spec.preparation),
        outcomes: vec![spec.preparation],
        step: BigRational::one(),
        probability: BigRational::one(),
        children: Vec::new(),
    };
    BranchTree {
        root: expand(root, &spec.manifestations),
        depth: spec.manifestations.len(),
    }
}

fn expand(mut node: BranchNode, remaining: &[Manifestation]) -> BranchNode {
    let Some((&m, rest)) = remaining.split_first() else {
        return node;
    };
    node.children = step_distribution(&node.state, m)
        .into_iter()
        .map(|(outcome, step)| {
            let mut outcomes = node.outcomes.clone();
            outcomes.push(outcome);
            let child = BranchNode {
                state: successor(&node.state, m.variable(), outcome),
                outcomes,
                probability: &node.probability * &step,
                step,
                children: Vec::new(),
            };
            expand(child, rest)
        })
        .collect();
    node
}

impl BranchTree {
    pub fn leaves(&self) -> Vec<&BranchNode> {
        fn walk<'a>(node: &'a BranchNode, out: &mut Vec<&'a BranchNode>) {
            if node.is_leaf() {
                out.push(node);
            }
            for child in &node.children {
                walk(child, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    fn check_ordinals(&self, pattern: &Pattern) -> Result<(), ExactError> {
        let ordinal = pattern.max_ordinal();
        if ordinal > self.depth {
            return Err(ExactError::InvalidOrdinal {
                ordinal,
                allowed: format!("0..={}", self.depth),
            });
        }
        Ok(())
    }

    /// Total probability of the leaves matching `pattern`.
    pub fn probability(&self, pattern: &Pattern) -> Result<BigRational, ExactError> {
        self.check_ordinals(pattern)?;
        Ok(self
            .leaves()
            .into_iter()
            .filter(|leaf| pattern.matches(&leaf.outcomes))
            .fold(BigRational::zero(), |acc, leaf| acc + &leaf.probability))
    }

    /// `Pr(target ∧ condition) / Pr(condition)`, undefined when the condition
    /// never occurs.
    pub fn conditional(&self, target: &Pattern, condition: &Pattern) -> Result<BigRational, ExactError> {
        let denominator = self.probability(condition)?;
        if denominator.is_zero() {
            return Err(ExactError::UndefinedConditional);
        }
        let joint = self.probability(&target.clone().and(condition.clone()))?;
        Ok(joint / denominator)
    }

    /// Distribution over complete outcome sequences (preparation excluded).
    pub fn leaf_distribution(&self) -> Vec<(Vec<Outcome>, BigRational)> {
        self.leaves()
            .into_iter()
            .map(|leaf| (leaf.outcomes[1..].to_vec(), leaf.probability.clone()))
            .collect()
    }
}

pub fn conditional_probability(
    spec: &ExperimentSpec,
    target: &Pattern,
    condition: &Pattern,
) -> Result<BigRational, ExactError> {
    enumerate(spec).conditional(target, condition)
}

/// Probability that the observation at `ordinal` reported `value`, given the
/// postselected outcome.
pub fn retrodict_exact(spec: &ExperimentSpec, ordinal: usize, value: Outcome) -> Result<BigRational, ExactError> {
    let post = spec.postselection.ok_or(ExactError::MissingPostselection)?;
    if ordinal == 0 || ordinal >= post.ordinal {
        return Err(ExactError::InvalidOrdinal {
            ordinal,
            allowed: format!("1..{}", post.ordinal),
        });
    }
    conditional_probability(spec, &Pattern::at(ordinal, value), &spec.acceptance_pattern())
}

fn delta(a: CardValue, b: CardValue) -> BigRational {
    if a == b {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

fn ratio(n: impl Into<BigInt>, d: impl Into<BigInt>) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Single-step probabilities of the card system in closed form, in terms of
/// `N`, `V` and the joint counts `N(p·q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    /// `Pr_{p_j}[p_k] = δ_jk`.
    SameVar { prepared: CardValue, queried: CardValue },
    /// `Pr_{p_j}[q_k] = (N − N(p_j·q_k)) / (N(V−1))`.
    CrossVar { prepared: CardValue, queried: CardValue },
    /// `Pr_{p_k~}[p_j] = (1 − δ_jk) / (V−1)`.
    NegatedSameVar { negated: CardValue, queried: CardValue },
    /// `Pr_{p_j~}[q_k] = N(p_j·q_k) / N`.
    NegatedCrossVar { negated: CardValue, queried: CardValue },
    /// `Pr_s[p~] = 1 − Pr_s[p]`.
    NegationComplement { probability: BigRational },
}

pub fn closed_form(deck: &Deck, formula: &Formula) -> Result<BigRational, ExactError> {
    let arity = deck.arity();
    let valid = |v: &CardValue| v.index < arity;
    let n = deck.copies();
    let v = u32::from(arity);
    let check = |a: &CardValue, b: &CardValue, same: bool| {
        if !valid(a) || !valid(b) {
            return Err(ExactError::InvalidArguments("value outside the deck schema".into()));
        }
        if (a.variable == b.variable) != same {
            let want = if same {
                "the same variable"
            } else {
                "different variables"
            };
            return Err(ExactError::InvalidArguments(format!("values must belong to {want}")));
        }
        if v < 2 {
            return Err(ExactError::DegenerateDeck);
        }
        Ok(())
    };
    match formula {
        Formula::SameVar { prepared, queried } => {
            check(prepared, queried, true)?;
            Ok(delta(*prepared, *queried))
        }
        Formula::CrossVar { prepared, queried } => {
            check(prepared, queried, false)?;
            Ok(ratio(n - deck.joint_count(*prepared, *queried), n * (v - 1)))
        }
        Formula::NegatedSameVar { negated, queried } => {
            check(negated, queried, true)?;
            Ok((BigRational::one() - delta(*negated, *queried)) / ratio(v - 1, 1))
        }
        Formula::NegatedCrossVar { negated, queried } => {
            check(negated, queried, false)?;
            Ok(ratio(deck.joint_count(*negated, *queried), n))
        }
        Formula::NegationComplement { probability } => {
            if probability.is_negative() || probability > &BigRational::one() {
                return Err(ExactError::InvalidArguments(format!(
                    "{probability} is not a probability"
                )));
            }
            Ok(BigRational::one() - probability)
        }
    }
}

/// Single-step distribution from a freshly prepared deck, assembled purely
/// from [`closed_form`] expressions.
pub fn closed_form_step(
    deck: &Deck,
    preparation: PreparationTarget,
    m: Manifestation,
) -> Result<BTreeMap<Outcome, BigRational>, ExactError> {
    let same = preparation.variable() == m.variable();
    let formula_for = |queried: CardValue| match (preparation, same) {
        (Outcome::Value(p), true) => Formula::SameVar { prepared: p, queried },
        (Outcome::Value(p), false) => Formula::CrossVar { prepared: p, queried },
        (Outcome::Negated(p), true) => Formula::NegatedSameVar { negated: p, queried },
        (Outcome::Negated(p), false) => Formula::NegatedCrossVar { negated: p, queried },
    };
    let mut out = BTreeMap::new();
    match m {
        Manifestation::Complete(var) => {
            for value in deck.schema().values(var) {
                out.insert(Outcome::Value(value), closed_form(deck, &formula_for(value))?);
            }
        }
        Manifestation::PartialOn(value) => {
            let hit = closed_form(deck, &formula_for(value))?;
            let miss = closed_form(
                deck,
                &Formula::NegationComplement {
                    probability: hit.clone(),
                },
            )?;
            out.insert(Outcome::Value(value), hit);
            out.insert(Outcome::Negated(value), miss);
        }
    }
    Ok(out)
}

/// A weighted collection of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureState {
    pub components: Vec<(SystemState, BigRational)>,
}

/// Merge a mixture into one enlarged `[These | Others]` partition with
/// integer multiplicities. Each pile of each component is repeated in
/// proportion to `weight / pile size`, scaled to the smallest integers, so
/// every draw from the merged pile has the weighted-average law. When all
/// components have equal pile sizes this is plain scaling by the least
/// common denominator of the weights.
pub fn mixture_combine(mixture: &MixtureState) -> Result<SystemState, ExactError> {
    let total = mixture
        .components
        .iter()
        .fold(BigRational::zero(), |acc, (_, w)| acc + w);
    if let Some((_, w)) = mixture.components.iter().find(|(_, w)| !w.is_positive()) {
        return Err(ExactError::InvalidWeight(w.to_string()));
    }
    if !total.is_one() {
        return Err(ExactError::WeightsNotNormalized(total.to_string()));
    }
    let memory = mixture.components[0].0.memory;
    if mixture.components.iter().any(|(s, _)| s.memory != memory) {
        return Err(ExactError::MemoryMismatch);
    }
    let these = merge_piles(mixture.components.iter().map(|(s, w)| (&s.these, w)));
    let others = merge_piles(mixture.components.iter().map(|(s, w)| (&s.others, w)));
    Ok(SystemState { these, others, memory })
}

/// Integer repetition factor per pile, proportional to weight / size.
pub fn mixture_factors<'a>(piles: impl Iterator<Item = (&'a Pile, &'a BigRational)>) -> Vec<u32> {
    let shares: Vec<BigRational> = piles
        .map(|(pile, w)| {
            if pile.is_empty() {
                BigRational::zero()
            } else {
                w / ratio(pile.len() as u64, 1u32)
            }
        })
        .collect();
    let lcm = shares
        .iter()
        .filter(|s| !s.is_zero())
        .fold(BigInt::one(), |acc, s| acc.lcm(s.denom()));
    let ints: Vec<BigInt> = shares
        .iter()
        .map(|s| (s * ratio(lcm.clone(), 1)).to_integer())
        .collect();
    let gcd = ints
        .iter()
        .filter(|i| !i.is_zero())
        .fold(BigInt::zero(), |acc, i| acc.gcd(i));
    ints.iter()
        .map(|i| {
            if i.is_zero() {
                0
            } else {
                u32::try_from(i / &gcd).expect("mixture factor fits in u32")
            }
        })
        .collect()
}

fn merge_piles<'a>(piles: impl Iterator<Item = (&'a Pile, &'a BigRational)> + Clone) -> Pile {
    let factors = mixture_factors(piles.clone());
    let mut out = Pile::new();
    for ((pile, _), factor) in piles.zip(factors) {
        out = out.union(&pile.scaled(factor));
    }
    out
}

/// Every value of both variables, plain and negated.
pub fn preparation_targets(deck: &Deck) -> Vec<PreparationTarget> {
    Variable::BOTH
        .into_iter()
        .flat_map(|var| deck.schema().values(var).collect::<Vec<_>>())
        .flat_map(|v| [Outcome::Value(v), Outcome::Negated(v)])
        .collect()
}

/// Every complete and partial manifestation the deck supports.
pub fn all_manifestations(deck: &Deck) -> Vec<Manifestation> {
    Variable::BOTH
        .into_iter()
        .flat_map(|var| {
            std::iter::once(Manifestation::Complete(var))
                .chain(deck.schema().values(var).map(Manifestation::PartialOn))
                .collect::<Vec<_>>()
        })
        .collect()
}
