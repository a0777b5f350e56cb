//! Closed-form retrodiction, independent of any particular system.
//!
//! Both formulas take raw probabilities, so the same code can be fed exact
//! rationals from the card enumeration or Born-rule floats from the quantum
//! module.

use num::{BigRational, Num};
use thiserror::Error;

/// Absolute tolerance used when the probability type is a float.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// A number that can play the role of a probability.
pub trait Probability: Num + Clone + PartialOrd {
    /// Equality: exact for rationals, within [`FLOAT_TOLERANCE`] for floats.
    fn close_to(&self, other: &Self) -> bool;

    fn in_unit_interval(&self) -> bool {
        let zero = Self::zero();
        let one = Self::one();
        (*self >= zero || self.close_to(&zero)) && (*self <= one || self.close_to(&one))
    }
}

impl Probability for BigRational {
    fn close_to(&self, other: &Self) -> bool {
        self == other
    }
}

impl Probability for f64 {
    fn close_to(&self, other: &Self) -> bool {
        (self - other).abs() <= FLOAT_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("denominator vanishes: the postselected outcome is impossible")]
    ZeroDenominator,
    #[error("{likelihoods} likelihoods but {priors} priors")]
    LengthMismatch { likelihoods: usize, priors: usize },
    #[error("index {index} out of range for {len} terms")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0}")]
    InvalidInputs(&'static str),
}

/// Inputs to the partial-observation retrodiction: the likelihood of the
/// final outcome given `p_j` and given `p_j~`, and the prior of each.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrodictionInputs<T> {
    pub likelihood_j: T,
    pub prior_j: T,
    pub likelihood_neg: T,
    pub prior_neg: T,
}

impl<T: Probability> RetrodictionInputs<T> {
    pub fn new(likelihood_j: T, prior_j: T, likelihood_neg: T, prior_neg: T) -> Self {
        Self {
            likelihood_j,
            prior_j,
            likelihood_neg,
            prior_neg,
        }
    }

    pub fn validate(&self) -> Result<(), FormulaError> {
        let all = [&self.likelihood_j, &self.prior_j, &self.likelihood_neg, &self.prior_neg];
        if !all.iter().all(|p| p.in_unit_interval()) {
            return Err(FormulaError::InvalidInputs("probabilities must lie in [0, 1]"));
        }
        if !(self.prior_j.clone() + self.prior_neg.clone()).close_to(&T::one()) {
            return Err(FormulaError::InvalidInputs("prior_j + prior_neg must equal 1"));
        }
        Ok(())
    }
}

/// `L_j π_j / (L_j π_j + L_~ π_~)`: probability that a partial observation
/// "is it `p_j` or not" found `p_j`, given the preparation and the
/// postselected final outcome.
pub fn retrodict_partial<T: Probability>(inputs: &RetrodictionInputs<T>) -> Result<T, FormulaError> {
    inputs.validate()?;
    let hit = inputs.likelihood_j.clone() * inputs.prior_j.clone();
    let miss = inputs.likelihood_neg.clone() * inputs.prior_neg.clone();
    let denominator = hit.clone() + miss;
    if denominator.is_zero() {
        return Err(FormulaError::ZeroDenominator);
    }
    Ok(hit / denominator)
}

/// `L_j π_j / Σ_t L_t π_t` for a complete intermediate observation.
pub fn retrodict_complete<T: Probability>(likelihoods: &[T], priors: &[T], j: usize) -> Result<T, FormulaError> {
    if likelihoods.len() != priors.len() {
        return Err(FormulaError::LengthMismatch {
            likelihoods: likelihoods.len(),
            priors: priors.len(),
        });
    }
    if j >= priors.len() {
        return Err(FormulaError::IndexOutOfRange {
            index: j,
            len: priors.len(),
        });
    }
    if !likelihoods.iter().chain(priors).all(Probability::in_unit_interval) {
        return Err(FormulaError::InvalidInputs("probabilities must lie in [0, 1]"));
    }
    let prior_total = priors.iter().cloned().fold(T::zero(), |a, b| a + b);
    if !prior_total.close_to(&T::one()) {
        return Err(FormulaError::InvalidInputs("priors must sum to 1"));
    }
    let denominator = likelihoods
        .iter()
        .zip(priors)
        .map(|(l, p)| l.clone() * p.clone())
        .fold(T::zero(), |a, b| a + b);
    if denominator.is_zero() {
        return Err(FormulaError::ZeroDenominator);
    }
    Ok(likelihoods[j].clone() * priors[j].clone() / denominator)
}
