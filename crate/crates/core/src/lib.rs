//! Classical card model of pre- and post-selected retrodiction.
//!
//! A deck of two-variable cards, split into `These` and `Others` with a
//! one-variable memory, reproduces the statistics of the quantum three-box
//! experiment: under the right pre- and postselection, two disjoint partial
//! observations each succeed with certainty. The crate computes every such
//! claim three ways:
//!
//! * [`exact`] enumerates all outcome sequences with rational arithmetic;
//! * [`montecarlo`] samples the same transition rule with a seeded,
//!   counter-based generator;
//! * [`quantum`] evaluates the corresponding Hilbert-space expressions
//!   (Born rule, sandwich formula, complete and partial ABL retrodiction).
//!
//! [`formulas`] holds the substrate-neutral retrodiction formulas that
//! arbitrate between the classical and quantum sides, and [`scenarios`]
//! packages the worked examples as checkable reports.

pub mod deck;
pub mod deckfile;
pub mod exact;
pub mod formulas;
pub mod montecarlo;
pub mod quantum;
pub mod report;
pub mod scenarios;

pub use deck::{
    observe, prepare, step_distribution, validate_deck, Card, CardValue, Deck, DeckError, DrawSource, EventRecord,
    FixedDraw, Manifestation, Outcome, Pile, Schema, SystemState, Variable,
};
pub use exact::{enumerate, BranchTree, ExperimentSpec, Pattern};
pub use formulas::{retrodict_complete, retrodict_partial, RetrodictionInputs};
pub use montecarlo::{simulate, FrequencyTable, RunConfig};
pub use scenarios::ScenarioReport;
