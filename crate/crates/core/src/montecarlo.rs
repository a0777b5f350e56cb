//! Seeded sampling of experiments through the card machine's transition rule.
//!
//! Draw generator (`chacha8-stream/v1`): trial `t` of a run with seed `s`
//! uses ChaCha8 keyed by `seed_from_u64(s)` on stream `t`. The draw for
//! step `k` starts at word position `16·k`, one 64-byte block per step, and
//! maps to `0..len` with `random_range` over `u64`. Each draw is therefore a
//! pure function of `(seed, trial, step)`, so trials can run in any order or
//! in parallel.

use std::collections::BTreeMap;

use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::deck::{advance, observe, DrawSource, EventRecord, Outcome};
use crate::exact::{ExperimentSpec, Pattern};

/// Name and version of the draw generator.
pub const GENERATOR: &str = "chacha8-stream/v1";

const WORDS_PER_STEP: u128 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonteCarloError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("experiment has no postselection")]
    MissingPostselection,
    #[error("ordinal {ordinal} is not valid here (allowed: {allowed})")]
    InvalidOrdinal { ordinal: usize, allowed: String },
    #[error("no trial passed the condition in {trials} trials")]
    NoAcceptedTrials { trials: u64 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub trials: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(spec: ExperimentSpec, trials: u64, seed: u64) -> Result<Self, MonteCarloError> {
        if trials == 0 {
            return Err(MonteCarloError::NoTrials);
        }
        Ok(Self { spec, trials, seed })
    }
}

/// Per-trial draw stream.
#[derive(Debug, Clone)]
pub struct TrialDraws {
    rng: ChaCha8Rng,
    step: u64,
}

impl TrialDraws {
    pub fn new(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Self { rng, step: 0 }
    }
}

impl DrawSource for TrialDraws {
    fn draw(&mut self, pool_len: usize) -> usize {
        self.rng.set_word_pos(u128::from(self.step) * WORDS_PER_STEP);
        self.step += 1;
        self.rng.random_range(0..pool_len as u64) as usize
    }
}

/// Run one trial and return its outcome sequence with the event records.
pub fn run_trial_traced(spec: &ExperimentSpec, seed: u64, trial: u64) -> (Vec<Outcome>, Vec<EventRecord>) {
    let mut draws = TrialDraws::new(seed, trial);
    let mut state = spec.deck().prepare(spec.preparation());
    let mut outcomes = Vec::with_capacity(spec.manifestations().len());
    let mut records = Vec::with_capacity(spec.manifestations().len());
    for &m in spec.manifestations() {
        // Experiment validation rules out empty pools.
        let obs = observe(&state, m, &mut draws).expect("pools of a valid experiment are non-empty");
        outcomes.push(obs.outcome);
        records.push(obs.record);
        state = obs.state;
    }
    (outcomes, records)
}

/// Outcome sequence of one trial; same draws as [`run_trial_traced`].
pub fn run_trial(spec: &ExperimentSpec, seed: u64, trial: u64) -> Vec<Outcome> {
    let mut draws = TrialDraws::new(seed, trial);
    let mut state = spec.deck().prepare(spec.preparation());
    spec.manifestations()
        .iter()
        .map(|&m| advance(&mut state, m, &mut draws).expect("pools of a valid experiment are non-empty"))
        .collect()
}

/// Outcome-sequence counts of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub trials: u64,
    pub seed: u64,
    pub preparation: Outcome,
    /// Observed sequences (preparation excluded) and their counts.
    pub counts: BTreeMap<Vec<Outcome>, u64>,
    /// Trials that passed the postselection; equals `trials` without one.
    pub accepted: u64,
}

/// A binomial proportion with its normal-approximation standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
    pub hits: u64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, samples: u64) -> Self {
        let n = samples as f64;
        let p = hits as f64 / n;
        Self {
            value: p,
            standard_error: (p * (1.0 - p) / n).sqrt(),
            hits,
            samples,
        }
    }

    /// Whether `expected` lies within `k` standard errors. A zero standard
    /// error (all or none of the samples hit) demands exact agreement.
    pub fn within(&self, expected: f64, k: f64) -> bool {
        (self.value - expected).abs() <= k * self.standard_error
    }
}

/// Merge two count tables. Associative and commutative.
fn merge_counts(mut a: BTreeMap<Vec<Outcome>, u64>, b: BTreeMap<Vec<Outcome>, u64>) -> BTreeMap<Vec<Outcome>, u64> {
    for (seq, n) in b {
        *a.entry(seq).or_insert(0) += n;
    }
    a
}

/// Build a table from the given trial indices, in the order given.
pub fn tabulate(cfg: &RunConfig, trials: impl IntoIterator<Item = u64>) -> FrequencyTable {
    let mut counts = BTreeMap::new();
    let mut n = 0;
    for t in trials {
        *counts.entry(run_trial(&cfg.spec, cfg.seed, t)).or_insert(0) += 1;
        n += 1;
    }
    FrequencyTable::from_counts(&cfg.spec, cfg.seed, n, counts)
}

pub fn simulate(cfg: &RunConfig) -> FrequencyTable {
    let counts = (0..cfg.trials)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, t| {
            *acc.entry(run_trial(&cfg.spec, cfg.seed, t)).or_insert(0) += 1;
            acc
        })
        .reduce(BTreeMap::new, merge_counts);
    FrequencyTable::from_counts(&cfg.spec, cfg.seed, cfg.trials, counts)
}

impl FrequencyTable {
    fn from_counts(spec: &ExperimentSpec, seed: u64, trials: u64, counts: BTreeMap<Vec<Outcome>, u64>) -> Self {
        let preparation = spec.preparation();
        let acceptance = spec.acceptance_pattern();
        let accepted = count_matching(&counts, preparation, &acceptance);
        Self {
            trials,
            seed,
            preparation,
            counts,
            accepted,
        }
    }

    pub fn count(&self, pattern: &Pattern) -> u64 {
        count_matching(&self.counts, self.preparation, pattern)
    }

    /// Unconditional frequency of a pattern over all trials.
    pub fn estimate(&self, pattern: &Pattern) -> Estimate {
        Estimate::from_counts(self.count(pattern), self.trials)
    }

    /// Frequency of `target` among trials matching `condition`.
    pub fn conditional(&self, target: &Pattern, condition: &Pattern) -> Result<Estimate, MonteCarloError> {
        let samples = self.count(condition);
        if samples == 0 {
            return Err(MonteCarloError::NoAcceptedTrials { trials: self.trials });
        }
        let hits = self.count(&target.clone().and(condition.clone()));
        Ok(Estimate::from_counts(hits, samples))
    }

    pub fn acceptance(&self) -> Estimate {
        Estimate::from_counts(self.accepted, self.trials)
    }
}

fn count_matching(counts: &BTreeMap<Vec<Outcome>, u64>, preparation: Outcome, pattern: &Pattern) -> u64 {
    let mut sequence = Vec::new();
    counts
        .iter()
        .filter(|(seq, _)| {
            sequence.clear();
            sequence.push(preparation);
            sequence.extend_from_slice(seq);
            pattern.matches(&sequence)
        })
        .map(|(_, &n)| n)
        .sum()
}

/// Empirical retrodiction: frequency of `value` at `ordinal` among accepted
/// trials, plus the acceptance rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrodictionEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub accepted: u64,
    pub trials: u64,
    pub acceptance: Estimate,
}

pub fn estimate_retrodiction(
    cfg: &RunConfig,
    ordinal: usize,
    value: Outcome,
) -> Result<RetrodictionEstimate, MonteCarloError> {
    let post = cfg.spec.postselection().ok_or(MonteCarloError::MissingPostselection)?;
    if ordinal == 0 || ordinal >= post.ordinal {
        return Err(MonteCarloError::InvalidOrdinal {
            ordinal,
            allowed: format!("1..{}", post.ordinal),
        });
    }
    let table = simulate(cfg);
    retrodiction_from_table(&table, &cfg.spec, ordinal, value)
}

/// Same as [`estimate_retrodiction`] on an already simulated table.
pub fn retrodiction_from_table(
    table: &FrequencyTable,
    spec: &ExperimentSpec,
    ordinal: usize,
    value: Outcome,
) -> Result<RetrodictionEstimate, MonteCarloError> {
    let est = table.conditional(&Pattern::at(ordinal, value), &spec.acceptance_pattern())?;
    Ok(RetrodictionEstimate {
        estimate: est.value,
        standard_error: est.standard_error,
        accepted: table.accepted,
        trials: table.trials,
        acceptance: table.acceptance(),
    })
}

/// Convert an exact probability for comparison with an estimate.
pub fn to_f64(p: &num::BigRational) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::{validate_deck, Deck, Manifestation, Schema, Variable};
    use crate::exact::Postselection;

    fn three_box() -> Deck {
        let schema = Schema::new("Face", &["K", "Q", "J"], "Suit", &["S", "D", "H"]).unwrap();
        validate_deck(
            schema,
            &[
                ("K", "H", 2),
                ("Q", "S", 1),
                ("Q", "D", 1),
                ("J", "D", 1),
                ("J", "S", 1),
            ],
        )
        .unwrap()
    }

    fn paradox_spec(partial_on: &str, post: bool) -> ExperimentSpec {
        let deck = three_box();
        let schema = deck.schema().clone();
        let v = schema.value(Variable::Suit, partial_on).unwrap();
        let k = schema.value(Variable::Face, "K").unwrap();
        let q = schema.value(Variable::Face, "Q").unwrap();
        ExperimentSpec::new(
            deck,
            Outcome::Value(q),
            vec![Manifestation::PartialOn(v), Manifestation::Complete(Variable::Face)],
            post.then_some(Postselection {
                ordinal: 2,
                outcome: Outcome::Value(k),
            }),
        )
        .unwrap()
    }

    #[test]
    fn fast_path_matches_traced_run() {
        let spec = paradox_spec("S", true);
        for t in 0..200 {
            assert_eq!(run_trial(&spec, 9, t), run_trial_traced(&spec, 9, t).0);
        }
    }

    #[test]
    fn draws_are_keyed_by_seed_trial_and_step() {
        let mut a = TrialDraws::new(9, 3);
        let first: Vec<usize> = (0..5).map(|_| a.draw(1000)).collect();
        let mut b = TrialDraws::new(9, 3);
        let again: Vec<usize> = (0..5).map(|_| b.draw(1000)).collect();
        assert_eq!(first, again);
        // A step's draw does not depend on the pool sizes of earlier steps.
        let mut c = TrialDraws::new(9, 3);
        c.draw(7);
        assert_eq!(c.draw(1000), first[1]);
        let mut other = TrialDraws::new(9, 4);
        let other: Vec<usize> = (0..5).map(|_| other.draw(1000)).collect();
        assert_ne!(first, other);
        assert!(first.iter().all(|&i| i < 1000));
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(
            RunConfig::new(paradox_spec("S", true), 0, 1).unwrap_err(),
            MonteCarloError::NoTrials
        );
    }

    #[test]
    fn same_seed_same_table() {
        let cfg = RunConfig::new(paradox_spec("S", true), 2_000, 42).unwrap();
        assert_eq!(simulate(&cfg), simulate(&cfg));
        let other = RunConfig::new(paradox_spec("S", true), 2_000, 43).unwrap();
        assert_ne!(simulate(&cfg).counts, simulate(&other).counts);
    }

    #[test]
    fn order_independent() {
        let cfg = RunConfig::new(paradox_spec("D", false), 500, 5).unwrap();
        let forward = simulate(&cfg);
        let backward = tabulate(&cfg, (0..500).rev());
        assert_eq!(forward, backward);
    }

    #[test]
    fn counts_sum_to_trials() {
        let cfg = RunConfig::new(paradox_spec("S", true), 3_000, 11).unwrap();
        let table = simulate(&cfg);
        assert_eq!(table.counts.values().sum::<u64>(), 3_000);
        assert!(table.accepted <= table.trials);
    }

    #[test]
    fn paradox_retrodiction_is_certain() {
        let cfg = RunConfig::new(paradox_spec("S", true), 20_000, 42).unwrap();
        let s = cfg.spec.deck().schema().value(Variable::Suit, "S").unwrap();
        let est = estimate_retrodiction(&cfg, 1, Outcome::Value(s)).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert!(est.acceptance.within(0.125, 5.0));
    }

    #[test]
    fn retrodiction_errors() {
        let cfg = RunConfig::new(paradox_spec("S", false), 10, 1).unwrap();
        let s = cfg.spec.deck().schema().value(Variable::Suit, "S").unwrap();
        assert_eq!(
            estimate_retrodiction(&cfg, 1, Outcome::Value(s)),
            Err(MonteCarloError::MissingPostselection)
        );
        let cfg = RunConfig::new(paradox_spec("S", true), 10, 1).unwrap();
        assert!(matches!(
            estimate_retrodiction(&cfg, 2, Outcome::Value(s)),
            Err(MonteCarloError::InvalidOrdinal { .. })
        ));

        // Preparing K and then observing Face twice can never end on Q.
        let deck = three_box();
        let schema = deck.schema().clone();
        let spec = ExperimentSpec::new(
            deck,
            Outcome::Value(schema.value(Variable::Face, "K").unwrap()),
            vec![Manifestation::Complete(Variable::Face); 2],
            Some(Postselection {
                ordinal: 2,
                outcome: Outcome::Value(schema.value(Variable::Face, "Q").unwrap()),
            }),
        )
        .unwrap();
        let cfg = RunConfig::new(spec, 100, 1).unwrap();
        let k = schema.value(Variable::Face, "K").unwrap();
        assert_eq!(
            estimate_retrodiction(&cfg, 1, Outcome::Value(k)),
            Err(MonteCarloError::NoAcceptedTrials { trials: 100 })
        );
    }
}
