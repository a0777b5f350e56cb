//! Serialization of results as JSON, CSV or plain text.
//!
//! Rationals are always written as `num/den` strings (`1/1`, `0/1`), floats
//! with at most 12 significant digits.

use num::BigRational;
use serde_json::{json, Value};

use crate::deck::{Outcome, Schema};
use crate::deckfile::format_rational;
use crate::exact::BranchTree;
use crate::montecarlo::{Estimate, FrequencyTable, RetrodictionEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Something that can be emitted in every [`Format`].
pub trait Report {
    fn to_json(&self) -> Value;
    /// Header row first.
    fn csv_rows(&self) -> Vec<Vec<String>>;
    fn to_text(&self) -> String;
}

pub fn emit_report(report: &dyn Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.to_json()).expect("JSON values serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in report.csv_rows() {
                writer.write_record(&row).expect("writing to memory");
            }
            String::from_utf8(writer.into_inner().expect("flush to memory")).expect("utf-8 input")
        }
        Format::Text => report.to_text(),
    }
}

/// At most 12 significant digits, trailing zeros trimmed.
pub fn format_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let s = format!("{:.11e}", x);
    let value: f64 = s.parse().expect("round-trips");
    let magnitude = value.abs().log10().floor() as i32;
    if (-5..15).contains(&magnitude) {
        let decimals = (11 - magnitude).max(0) as usize;
        let fixed = format!("{:.*}", decimals, value);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let (mantissa, exponent) = s.split_once('e').expect("scientific form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exponent}")
    }
}

/// A float rounded to 12 significant digits as a JSON number.
pub fn json_float(x: f64) -> Value {
    let rounded: f64 = format_float(x).parse().unwrap_or(x);
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

pub fn json_rational(r: &BigRational) -> Value {
    Value::String(format_rational(r))
}

fn sequence_label(schema: &Schema, seq: &[Outcome]) -> String {
    seq.iter()
        .map(|o| schema.outcome_label(o))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A labelled list of exact probabilities.
pub struct DistributionReport {
    pub title: String,
    pub entries: Vec<(String, BigRational)>,
}

impl Report for DistributionReport {
    fn to_json(&self) -> Value {
        json!({
            "title": self.title,
            "probabilities": self.entries.iter().map(|(k, p)| json!({
                "outcome": k,
                "probability": json_rational(p),
            })).collect::<Vec<_>>(),
        })
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        std::iter::once(vec!["outcome".to_string(), "probability".to_string()])
            .chain(self.entries.iter().map(|(k, p)| vec![k.clone(), format_rational(p)]))
            .collect()
    }

    fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.title);
        for (k, p) in &self.entries {
            out.push_str(&format!("  {k:<16} {}\n", format_rational(p)));
        }
        out
    }
}

/// One named value in a [`ValueReport`].
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Rational(BigRational),
    Float(f64),
    Flag(bool),
    Text(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Rational(r) => format_rational(r),
            Field::Float(x) => format_float(*x),
            Field::Flag(b) => b.to_string(),
            Field::Text(t) => t.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Field::Rational(r) => json_rational(r),
            Field::Float(x) => json_float(*x),
            Field::Flag(b) => Value::Bool(*b),
            Field::Text(t) => Value::String(t.clone()),
        }
    }
}

/// Named scalar results. A report with a single field renders as the bare
/// value in text form, so `threebox exact ... --query` prints just `1/1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueReport {
    pub fields: Vec<(String, Field)>,
}

impl ValueReport {
    pub fn single(name: impl Into<String>, value: Field) -> Self {
        Self {
            fields: vec![(name.into(), value)],
        }
    }
}

impl Report for ValueReport {
    fn to_json(&self) -> Value {
        let map: serde_json::Map<String, Value> = self.fields.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        Value::Object(map)
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        std::iter::once(vec!["name".to_string(), "value".to_string()])
            .chain(self.fields.iter().map(|(k, v)| vec![k.clone(), v.render()]))
            .collect()
    }

    fn to_text(&self) -> String {
        match self.fields.as_slice() {
            [(_, only)] => format!("{}\n", only.render()),
            fields => fields
                .iter()
                .map(|(k, v)| format!("{k:<24} {}\n", v.render()))
                .collect(),
        }
    }
}

/// Leaf sequences of a branch tree with their probabilities.
pub struct TreeReport<'a> {
    pub schema: &'a Schema,
    pub tree: &'a BranchTree,
}

impl TreeReport<'_> {
    fn entries(&self) -> Vec<(String, BigRational)> {
        self.tree
            .leaf_distribution()
            .into_iter()
            .map(|(seq, p)| (sequence_label(self.schema, &seq), p))
            .collect()
    }
}

impl Report for TreeReport<'_> {
    fn to_json(&self) -> Value {
        let leaves: Vec<Value> = self
            .tree
            .leaves()
            .into_iter()
            .map(|leaf| {
                json!({
                    "sequence": leaf.outcomes[1..].iter().map(|o| self.schema.outcome_label(o)).collect::<Vec<_>>(),
                    "probability": json_rational(&leaf.probability),
                    "state": self.schema.state_label(&leaf.state),
                })
            })
            .collect();
        json!({ "depth": self.tree.depth, "leaves": leaves })
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        DistributionReport {
            title: String::new(),
            entries: self.entries(),
        }
        .csv_rows()
    }

    fn to_text(&self) -> String {
        DistributionReport {
            title: format!("{} leaves", self.tree.leaves().len()),
            entries: self.entries(),
        }
        .to_text()
    }
}

/// Counts of a Monte Carlo run, with an optional retrodiction estimate.
pub struct FrequencyReport<'a> {
    pub schema: &'a Schema,
    pub table: &'a FrequencyTable,
    pub retrodiction: Option<(String, RetrodictionEstimate)>,
}

fn estimate_json(e: &Estimate) -> Value {
    json!({
        "estimate": json_float(e.value),
        "standard_error": json_float(e.standard_error),
        "hits": e.hits,
        "samples": e.samples,
    })
}

impl Report for FrequencyReport<'_> {
    fn to_json(&self) -> Value {
        let n = self.table.trials;
        let counts: Vec<Value> = self
            .table
            .counts
            .iter()
            .map(|(seq, &c)| {
                json!({
                    "sequence": seq.iter().map(|o| self.schema.outcome_label(o)).collect::<Vec<_>>(),
                    "count": c,
                    "frequency": estimate_json(&Estimate::from_counts(c, n)),
                })
            })
            .collect();
        let mut out = json!({
            "trials": n,
            "seed": self.table.seed,
            "generator": crate::montecarlo::GENERATOR,
            "counts": counts,
            "accepted": self.table.accepted,
            "acceptance_rate": estimate_json(&self.table.acceptance()),
        });
        if let Some((query, r)) = &self.retrodiction {
            out["retrodiction"] = json!({
                "query": query,
                "estimate": json_float(r.estimate),
                "standard_error": json_float(r.standard_error),
                "accepted": r.accepted,
            });
        }
        out
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let n = self.table.trials;
        let mut rows = vec![vec![
            "sequence".to_string(),
            "count".to_string(),
            "frequency".to_string(),
            "standard_error".to_string(),
        ]];
        for (seq, &c) in &self.table.counts {
            let e = Estimate::from_counts(c, n);
            rows.push(vec![
                sequence_label(self.schema, seq),
                c.to_string(),
                format_float(e.value),
                format_float(e.standard_error),
            ]);
        }
        rows
    }

    fn to_text(&self) -> String {
        let n = self.table.trials;
        let mut out = format!("{} trials, seed {}\n", n, self.table.seed);
        for (seq, &c) in &self.table.counts {
            let e = Estimate::from_counts(c, n);
            out.push_str(&format!(
                "  {:<16} {:>10}  {} ± {}\n",
                sequence_label(self.schema, seq),
                c,
                format_float(e.value),
                format_float(e.standard_error)
            ));
        }
        let a = self.table.acceptance();
        out.push_str(&format!(
            "accepted {} ({} ± {})\n",
            self.table.accepted,
            format_float(a.value),
            format_float(a.standard_error)
        ));
        if let Some((query, r)) = &self.retrodiction {
            out.push_str(&format!(
                "{query}: {} ± {}\n",
                format_float(r.estimate),
                format_float(r.standard_error)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_twelve_significant_digits() {
        assert_eq!(format_float(0.25), "0.25");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_float(99.75), "99.75");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.125), "-0.125");
        assert_eq!(format_float(1.0e-12 / 3.0), "3.33333333333e-13");
        assert_eq!(json_float(1.0 / 3.0).to_string(), "0.333333333333");
    }

    #[test]
    fn distribution_formats() {
        let r = DistributionReport {
            title: "Suit".into(),
            entries: vec![
                ("S".into(), BigRational::new(1.into(), 4.into())),
                ("~S".into(), BigRational::new(3.into(), 4.into())),
            ],
        };
        assert_eq!(emit_report(&r, Format::Csv), "outcome,probability\nS,1/4\n~S,3/4\n");
        let json: Value = serde_json::from_str(&emit_report(&r, Format::Json)).unwrap();
        assert_eq!(json["probabilities"][0]["probability"], "1/4");
        assert!(emit_report(&r, Format::Text).contains("3/4"));
    }

    #[test]
    fn single_value_renders_bare() {
        let one = ValueReport::single("retrodiction", Field::Rational(BigRational::from_integer(1.into())));
        assert_eq!(emit_report(&one, Format::Text), "1/1\n");
        assert_eq!(emit_report(&one, Format::Json), "{\n  \"retrodiction\": \"1/1\"\n}\n");
        let two = ValueReport {
            fields: vec![("a".into(), Field::Float(0.2)), ("b".into(), Field::Flag(true))],
        };
        assert_eq!(emit_report(&two, Format::Csv), "name,value\na,0.2\nb,true\n");
    }
}
