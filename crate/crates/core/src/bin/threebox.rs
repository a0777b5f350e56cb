//! `threebox`: command-line front end.
//!
//! Exit status: 0 on success, 1 when a scenario claim fails, 2 on usage or
//! validation errors.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num::BigRational;

use threebox::deck::{Deck, Manifestation, Outcome, Variable};
use threebox::deckfile::{
    last_ordinal_of, parse_deck, parse_experiment, parse_located_outcome, parse_manifestation, parse_outcome,
    parse_rational, resolve_postselection, three_box_deck, two_value_deck,
};
use threebox::exact::{closed_form_step, enumerate, ExperimentSpec, Pattern};
use threebox::formulas::{retrodict_complete, retrodict_partial, RetrodictionInputs};
use threebox::montecarlo::{simulate, RetrodictionEstimate, RunConfig};
use threebox::quantum::{
    self, abl_complete, abl_partial, born_probability, sandwich_probability, three_slit_design,
    threebox_condition_check, Projector, QState, C64,
};
use threebox::report::{
    emit_report, DistributionReport, Field, Format, FrequencyReport, Report, TreeReport, ValueReport,
};
use threebox::scenarios::{self, counterfactual_trace, run_scenario, ScenarioOptions, SCENARIOS};

#[derive(Parser)]
#[command(
    name = "threebox",
    version,
    about = "Card-deck and quantum models of pre- and post-selected retrodiction"
)]
struct Cli {
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Emit JSON.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV.
    #[arg(long, global = true)]
    csv: bool,
}

impl OutputArgs {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Text
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check that a deck (or experiment) file is well formed.
    Validate(Source),
    /// Exact probabilities by enumerating every outcome sequence.
    Exact(ExperimentArgs),
    /// Seeded Monte Carlo run of an experiment.
    Simulate {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Evaluate the retrodiction formulas or the closed-form step probabilities.
    #[command(subcommand)]
    Formula(FormulaCommand),
    /// Quantum-mechanical counterparts.
    #[command(subcommand)]
    Quantum(QuantumCommand),
    /// Run a named worked example, or `all`.
    Scenario {
        /// One of the scenario names, or `all`.
        name: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Deck for `counterfactual-trace`.
        #[arg(long)]
        deck: Option<String>,
    },
}

#[derive(Args)]
struct Source {
    /// Deck file, or the built-in `three-box` / `two-value` deck.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    deck: Option<String>,
    /// Experiment file (deck plus prepare/observe/postselect lines).
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: Source,
    /// Preparation, e.g. `Face=Q` or `Suit=~S`.
    #[arg(long)]
    prepare: Option<String>,
    /// Observation, in order: `Face` (complete) or `Suit?S` (partial).
    #[arg(long)]
    observe: Vec<String>,
    /// Postselected outcome `[ORDINAL:]VAR=VALUE`; the ordinal defaults to the
    /// last observation of VAR.
    #[arg(long)]
    postselect: Option<String>,
    /// Outcome whose probability is wanted, `[ORDINAL:]VAR=VALUE`. With a
    /// postselection this is a retrodiction.
    #[arg(long)]
    query: Option<String>,
    /// Extra condition for `--query`, `[ORDINAL:]VAR=VALUE`.
    #[arg(long, requires = "query")]
    given: Option<String>,
}

#[derive(Subcommand)]
enum FormulaCommand {
    /// Partial-observation retrodiction `LjPj / (LjPj + LnPn)`.
    Partial {
        /// `Lj,Pj,Ln,Pn` as rationals (`1/2`) or decimals.
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<String>,
    },
    /// Complete-observation retrodiction `LjPj / Σ LtPt`.
    Complete {
        #[arg(long, value_delimiter = ',', required = true)]
        likelihoods: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        priors: Vec<String>,
        /// 1-based index; all indices when omitted.
        #[arg(long)]
        index: Option<usize>,
    },
    /// Single-step distribution from the closed-form expressions.
    Closed {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        prepare: String,
        #[arg(long)]
        observe: String,
    },
}

#[derive(Subcommand)]
enum QuantumCommand {
    /// `|<v|s>|²`.
    Born {
        #[arg(long)]
        state: String,
        #[arg(long)]
        onto: String,
    },
    /// `Tr(ρ P Q P)` for rank-one projectors.
    Sandwich {
        #[arg(long)]
        state: String,
        #[arg(long)]
        first: String,
        #[arg(long)]
        then: String,
    },
    /// ABL retrodiction of basis vector `--index` (1-based).
    Abl {
        #[arg(long)]
        state: String,
        #[arg(long)]
        post: String,
        #[arg(long)]
        index: usize,
        /// Basis vectors separated by `;` (standard basis when omitted).
        #[arg(long)]
        basis: Option<String>,
        /// Partial observation of the basis vector versus its complement.
        #[arg(long)]
        partial: bool,
    },
    /// Three-slit geometry making slits 2 and 3 cancel at the detector.
    Slit {
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        wavelength: f64,
    },
    /// Partial versus complete retrodiction between `(x1+x2)/√2` and `(x2+x3)/√2`.
    Aad {
        #[arg(long, default_value = "0.7071067811865476")]
        alpha: String,
        #[arg(long, default_value = "0.7071067811865476")]
        beta: String,
    },
    /// Whether `<q|x_j><x_j|s>` takes the three-box pattern `(a, a, −a)` in the standard basis.
    ThreeboxCheck {
        #[arg(long)]
        state: String,
        #[arg(long)]
        post: String,
    },
}

/// Usage or validation failure (exit 2).
struct Failure(String);

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CliResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.output.format();
    match run(cli.command, format) {
        Ok(code) => code,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn emit(report: &dyn Report, format: Format) {
    print!("{}", emit_report(report, format));
}

fn run(command: Command, format: Format) -> CliResult {
    match command {
        Command::Validate(source) => validate(&source, format),
        Command::Exact(args) => exact(&args, format),
        Command::Simulate {
            experiment,
            trials,
            seed,
        } => simulate_cmd(&experiment, trials, seed, format),
        Command::Formula(f) => formula(f, format),
        Command::Quantum(q) => quantum_cmd(q, format),
        Command::Scenario {
            name,
            trials,
            seed,
            deck,
        } => scenario(&name, ScenarioOptions { trials, seed }, deck.as_deref(), format),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("cannot read {}: {e}", path.display())))
}

fn load_deck(name: &str) -> Result<Deck, Failure> {
    let path = Path::new(name);
    if !path.exists() {
        match name {
            "three-box" => return Ok(three_box_deck()),
            "two-value" => return Ok(two_value_deck()),
            _ => {}
        }
    }
    parse_deck(&read(path)?).map_err(|e| Failure(format!("{name}: {e}")))
}

fn validate(source: &Source, format: Format) -> CliResult {
    let deck = match (&source.deck, &source.spec) {
        (Some(d), _) => load_deck(d)?,
        (None, Some(s)) => parse_experiment(&read(s)?)
            .map_err(|e| Failure(format!("{}: {e}", s.display())))?
            .deck()
            .clone(),
        (None, None) => return Err(Failure("--deck or --spec is required".into())),
    };
    let schema = deck.schema();
    emit(
        &ValueReport {
            fields: vec![
                ("valid".into(), Field::Flag(true)),
                ("deck".into(), Field::Text(deck.to_string())),
                (
                    "variables".into(),
                    Field::Text(format!(
                        "{}, {}",
                        schema.name(Variable::Face),
                        schema.name(Variable::Suit)
                    )),
                ),
                ("values_per_variable".into(), Field::Text(deck.arity().to_string())),
                ("copies_per_value".into(), Field::Text(deck.copies().to_string())),
                ("cards".into(), Field::Text(deck.len().to_string())),
            ],
        },
        format,
    );
    Ok(ExitCode::SUCCESS)
}

/// Build the experiment from `--spec` or from `--deck` plus flags; flags
/// given alongside `--spec` override the file.
fn experiment(args: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let base = match (&args.source.deck, &args.source.spec) {
        (_, Some(path)) => {
            Some(parse_experiment(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))?)
        }
        _ => None,
    };
    let deck = match (&base, &args.source.deck) {
        (Some(spec), _) => spec.deck().clone(),
        (None, Some(d)) => load_deck(d)?,
        (None, None) => return Err(Failure("--deck or --spec is required".into())),
    };
    let schema = deck.schema().clone();
    let prep = match (&args.prepare, &base) {
        (Some(p), _) => parse_outcome(&schema, p).map_err(|e| Failure(format!("--prepare: {e}")))?,
        (None, Some(spec)) => spec.preparation(),
        (None, None) => return Err(Failure("--prepare is required".into())),
    };
    let manifestations = if args.observe.is_empty() {
        base.as_ref().map(|s| s.manifestations().to_vec()).unwrap_or_default()
    } else {
        args.observe
            .iter()
            .map(|t| parse_manifestation(&schema, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure(format!("--observe: {e}")))?
    };
    if manifestations.is_empty() {
        return Err(Failure("at least one --observe is required".into()));
    }
    let post = match (&args.postselect, &base) {
        (Some(p), _) => Some(
            parse_located_outcome(&schema, p)
                .and_then(|loc| resolve_postselection(&manifestations, loc))
                .map_err(|e| Failure(format!("--postselect: {e}")))?,
        ),
        (None, Some(spec)) if args.observe.is_empty() => spec.postselection(),
        _ => None,
    };
    ExperimentSpec::new(deck, prep, manifestations, post).map_err(Failure::from)
}

/// Resolve `[ORD:]VAR=VALUE` to a pattern. Without an ordinal the last
/// observation of VAR is used, before the postselection when there is one.
fn located_pattern(spec: &ExperimentSpec, flag: &str, token: &str) -> Result<(Pattern, String), Failure> {
    let schema = spec.deck().schema();
    let (ordinal, outcome) = parse_located_outcome(schema, token).map_err(|e| Failure(format!("{flag}: {e}")))?;
    let ms = spec.manifestations();
    let ordinal = match ordinal {
        Some(o) if o <= ms.len() => o,
        Some(o) => {
            return Err(Failure(format!(
                "{flag}: ordinal {o} exceeds the {} observations",
                ms.len()
            )))
        }
        None => {
            let before = spec.postselection().map(|p| p.ordinal);
            last_ordinal_of(ms, outcome.variable(), before)
                .or_else(|| last_ordinal_of(ms, outcome.variable(), None))
                .ok_or_else(|| Failure(format!("{flag}: no observation of {}", schema.name(outcome.variable()))))?
        }
    };
    if ordinal > 0 && !observable(ms[ordinal - 1], outcome) {
        return Err(Failure(format!(
            "{flag}: observation {ordinal} ({}) cannot report {}",
            schema.manifestation_label(&ms[ordinal - 1]),
            schema.outcome_label(&outcome)
        )));
    }
    let label = format!(
        "{ordinal}:{}={}",
        schema.name(outcome.variable()),
        schema.outcome_label(&outcome)
    );
    Ok((Pattern::at(ordinal, outcome), label))
}

fn observable(m: Manifestation, outcome: Outcome) -> bool {
    match m {
        Manifestation::Complete(v) => !outcome.is_negated() && outcome.variable() == v,
        Manifestation::PartialOn(v) => outcome.value() == v,
    }
}

/// The query pattern and the condition it is evaluated under.
fn query(spec: &ExperimentSpec, args: &ExperimentArgs) -> Result<Option<(Pattern, Pattern, String)>, Failure> {
    let Some(q) = &args.query else { return Ok(None) };
    let (target, mut label) = located_pattern(spec, "--query", q)?;
    let mut condition = if spec.postselection().is_some() {
        spec.acceptance_pattern()
    } else {
        Pattern::Always
    };
    if let Some(g) = &args.given {
        let (given, given_label) = located_pattern(spec, "--given", g)?;
        condition = condition.and(given);
        label = format!("{label} | {given_label}");
    }
    Ok(Some((target, condition, label)))
}

fn exact(args: &ExperimentArgs, format: Format) -> CliResult {
    let spec = experiment(args)?;
    let tree = enumerate(&spec);
    match query(&spec, args)? {
        Some((target, condition, label)) => {
            let p = tree.conditional(&target, &condition)?;
            emit(&ValueReport::single(label, Field::Rational(p)), format);
        }
        None => emit(
            &TreeReport {
                schema: spec.deck().schema(),
                tree: &tree,
            },
            format,
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate_cmd(args: &ExperimentArgs, trials: u64, seed: u64, format: Format) -> CliResult {
    let spec = experiment(args)?;
    let q = query(&spec, args)?;
    let cfg = RunConfig::new(spec, trials, seed)?;
    let table = simulate(&cfg);
    let retrodiction = match q {
        Some((target, condition, label)) => {
            let est = table.conditional(&target, &condition)?;
            Some((
                label,
                RetrodictionEstimate {
                    estimate: est.value,
                    standard_error: est.standard_error,
                    accepted: table.accepted,
                    trials: table.trials,
                    acceptance: table.acceptance(),
                },
            ))
        }
        None => None,
    };
    emit(
        &FrequencyReport {
            schema: cfg.spec.deck().schema(),
            table: &table,
            retrodiction,
        },
        format,
    );
    Ok(ExitCode::SUCCESS)
}

/// Rationals when every token is one, otherwise floats.
enum Numbers {
    Exact(Vec<BigRational>),
    Real(Vec<f64>),
}

fn numbers(tokens: &[String]) -> Result<Numbers, Failure> {
    if let Ok(exact) = tokens.iter().map(|t| parse_rational(t)).collect::<Result<Vec<_>, _>>() {
        return Ok(Numbers::Exact(exact));
    }
    tokens
        .iter()
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure(format!("`{t}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Numbers::Real)
}

fn formula(command: FormulaCommand, format: Format) -> CliResult {
    match command {
        FormulaCommand::Partial { inputs } => {
            let value = match numbers(&inputs)? {
                Numbers::Exact(v) => {
                    let [lj, pj, ln, pn] =
                        <[_; 4]>::try_from(v).map_err(|_| Failure("--inputs needs 4 values".into()))?;
                    Field::Rational(retrodict_partial(&RetrodictionInputs::new(lj, pj, ln, pn))?)
                }
                Numbers::Real(v) => {
                    let [lj, pj, ln, pn] =
                        <[_; 4]>::try_from(v).map_err(|_| Failure("--inputs needs 4 values".into()))?;
                    Field::Float(retrodict_partial(&RetrodictionInputs::new(lj, pj, ln, pn))?)
                }
            };
            emit(&ValueReport::single("retrodiction", value), format);
        }
        FormulaCommand::Complete {
            likelihoods,
            priors,
            index,
        } => {
            let n = likelihoods.len();
            let indices: Vec<usize> = match index {
                Some(0) => return Err(Failure("--index is 1-based".into())),
                Some(i) => vec![i - 1],
                None => (0..n).collect(),
            };
            let mut fields = Vec::new();
            match (numbers(&likelihoods)?, numbers(&priors)?) {
                (Numbers::Exact(l), Numbers::Exact(p)) => {
                    for j in indices {
                        fields.push((
                            format!("retrodiction_{}", j + 1),
                            Field::Rational(retrodict_complete(&l, &p, j)?),
                        ));
                    }
                }
                (l, p) => {
                    let (l, p) = (as_floats(l), as_floats(p));
                    for j in indices {
                        fields.push((
                            format!("retrodiction_{}", j + 1),
                            Field::Float(retrodict_complete(&l, &p, j)?),
                        ));
                    }
                }
            }
            emit(&ValueReport { fields }, format);
        }
        FormulaCommand::Closed {
            source,
            prepare,
            observe,
        } => {
            let deck = match (&source.deck, &source.spec) {
                (Some(d), _) => load_deck(d)?,
                (None, Some(s)) => parse_experiment(&read(s)?)?.deck().clone(),
                (None, None) => return Err(Failure("--deck or --spec is required".into())),
            };
            let schema = deck.schema();
            let prep = parse_outcome(schema, &prepare).map_err(|e| Failure(format!("--prepare: {e}")))?;
            let m = parse_manifestation(schema, &observe).map_err(|e| Failure(format!("--observe: {e}")))?;
            let dist = closed_form_step(&deck, prep, m)?;
            emit(
                &DistributionReport {
                    title: format!(
                        "prepare {}, observe {}",
                        schema.outcome_label(&prep),
                        schema.manifestation_label(&m)
                    ),
                    entries: dist.into_iter().map(|(o, p)| (schema.outcome_label(&o), p)).collect(),
                },
                format,
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn as_floats(n: Numbers) -> Vec<f64> {
    match n {
        Numbers::Exact(v) => v.iter().map(threebox::montecarlo::to_f64).collect(),
        Numbers::Real(v) => v,
    }
}

fn complex(token: &str) -> Result<C64, Failure> {
    let t = token.trim().replace(' ', "");
    C64::from_str(&t).map_err(|_| Failure(format!("`{token}` is not a complex number like 0.5 or 0.5-0.5i")))
}

/// Comma-separated amplitudes, normalized.
fn state(flag: &str, token: &str) -> Result<QState, Failure> {
    let amplitudes = token.split(',').map(complex).collect::<Result<Vec<_>, _>>()?;
    QState::normalized(amplitudes).map_err(|e| Failure(format!("{flag}: {e}")))
}

fn basis(token: Option<&str>, dim: usize) -> Result<Vec<QState>, Failure> {
    match token {
        None => Ok(QState::standard_basis(dim)),
        Some(t) => t.split(';').map(|v| state("--basis", v)).collect(),
    }
}

fn quantum_cmd(command: QuantumCommand, format: Format) -> CliResult {
    let report = match command {
        QuantumCommand::Born { state: s, onto } => {
            let p = born_probability(&state("--state", &s)?, &state("--onto", &onto)?)?;
            ValueReport::single("probability", Field::Float(p))
        }
        QuantumCommand::Sandwich { state: s, first, then } => {
            let p = sandwich_probability(
                &state("--state", &s)?,
                &Projector::onto(&state("--first", &first)?),
                &Projector::onto(&state("--then", &then)?),
            )?;
            ValueReport::single("probability", Field::Float(p))
        }
        QuantumCommand::Abl {
            state: s,
            post,
            index,
            basis: b,
            partial,
        } => {
            let s = state("--state", &s)?;
            let q = state("--post", &post)?;
            let basis = basis(b.as_deref(), s.dim())?;
            let j = index
                .checked_sub(1)
                .ok_or_else(|| Failure("--index is 1-based".into()))?;
            let p = if partial {
                abl_partial(&s, &basis, j, &q)?
            } else {
                abl_complete(&s, &basis, j, &q)?
            };
            ValueReport::single("retrodiction", Field::Float(p))
        }
        QuantumCommand::Slit { separation, wavelength } => {
            let g = three_slit_design(separation, wavelength)?;
            let [l1, l2, l3] = g.path_lengths();
            ValueReport {
                fields: vec![
                    ("distance".into(), Field::Float(g.distance)),
                    ("path_1".into(), Field::Float(l1)),
                    ("path_2".into(), Field::Float(l2)),
                    ("path_3".into(), Field::Float(l3)),
                    ("half_wave_residual".into(), Field::Float(g.half_wave_residual())),
                    ("pair_2_3_magnitude".into(), Field::Float(g.pair_amplitude(1, 2).norm())),
                ],
            }
        }
        QuantumCommand::Aad { alpha, beta } => {
            let (alpha, beta) = (complex(&alpha)?, complex(&beta)?);
            let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
            if norm == 0.0 {
                return Err(Failure("--alpha and --beta cannot both be zero".into()));
            }
            let (alpha, beta) = (alpha / norm, beta / norm);
            let a = quantum::aad_analysis(alpha, beta)?;
            ValueReport {
                fields: vec![
                    ("partial_x".into(), Field::Float(a.x_partial)),
                    ("partial_q".into(), Field::Float(a.partial_result)),
                    ("complete_x".into(), Field::Float(a.x_complete)),
                    ("complete_q".into(), Field::Float(a.complete_result)),
                    (
                        "complete_q_closed_form".into(),
                        Field::Float(scenarios::aad_complete_expected(alpha, beta)),
                    ),
                ],
            }
        }
        QuantumCommand::ThreeboxCheck { state: s, post } => {
            let s = state("--state", &s)?;
            let q = state("--post", &post)?;
            let ok = threebox_condition_check(&s, &q, &QState::standard_basis(s.dim()))?;
            ValueReport::single("three_box_condition", Field::Flag(ok))
        }
    };
    emit(&report, format);
    Ok(ExitCode::SUCCESS)
}

fn scenario(name: &str, opts: ScenarioOptions, deck: Option<&str>, format: Format) -> CliResult {
    let names: Vec<&str> = match name {
        "all" => SCENARIOS.to_vec(),
        n if SCENARIOS.contains(&n) => vec![n],
        n => {
            return Err(Failure(format!(
                "unknown scenario `{n}` (available: {}, all)",
                SCENARIOS.join(", ")
            )))
        }
    };
    if deck.is_some() && !names.contains(&"counterfactual-trace") {
        return Err(Failure("--deck applies only to counterfactual-trace".into()));
    }
    let mut reports = Vec::new();
    for n in names {
        let report = match (n, deck) {
            ("counterfactual-trace", Some(d)) => counterfactual_trace(&load_deck(d)?, opts)?,
            _ => run_scenario(n, opts)?,
        };
        reports.push(report);
    }
    let pass = reports.iter().all(|r| r.pass());
    match (format, reports.as_slice()) {
        (_, [one]) => emit(one, format),
        (Format::Json, many) => {
            let all: Vec<_> = many.iter().map(Report::to_json).collect();
            println!("{}", serde_json::to_string_pretty(&all)?);
        }
        (Format::Csv, many) => {
            let mut first = true;
            for r in many {
                let text = emit_report(r, Format::Csv);
                // Keep a single header row.
                let body = if first {
                    text.as_str()
                } else {
                    text.split_once('\n').map_or("", |(_, b)| b)
                };
                print!("{body}");
                first = false;
            }
        }
        (Format::Text, many) => many.iter().for_each(|r| emit(r, format)),
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
