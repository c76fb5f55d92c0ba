//! Report rows and their CSV form.
//!
//! Columns, in order: `node, tau, tau_max, tau_max2, bound_method, bound_value,
//! exact_value, gap, preconditions, soundness`. Rationals are written `num/den`;
//! empty cells mean "not applicable to this row".

use std::io::Write;

use maxleak::rational::{fmt_rational, fmt_sig, to_f64, Rational};

pub const COLUMNS: [&str; 10] = [
    "node",
    "tau",
    "tau_max",
    "tau_max2",
    "bound_method",
    "bound_value",
    "exact_value",
    "gap",
    "preconditions",
    "soundness",
];

/// Marker written in `bound_value` when a method's preconditions fail.
pub const INAPPLICABLE: &str = "inapplicable";

#[derive(Debug, Clone, PartialEq)]
pub enum Soundness {
    NotChecked,
    Ok,
    Violated,
}

impl Soundness {
    fn cell(&self) -> &'static str {
        match self {
            Soundness::NotChecked => "",
            Soundness::Ok => "OK",
            Soundness::Violated => "VIOLATED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundCell {
    Empty,
    Value(Rational),
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub node: String,
    pub tau: Option<Rational>,
    pub tau_max: Option<Rational>,
    pub tau_max2: Option<Rational>,
    pub bound_method: String,
    pub bound_value: BoundCell,
    pub exact_value: Option<Rational>,
    pub preconditions: Vec<String>,
    pub soundness: Soundness,
}

impl ReportRow {
    pub fn measures(node: String, tau: Rational, tau_max: Rational, tau_max2: Option<Rational>) -> Self {
        Self {
            node,
            tau: Some(tau),
            tau_max: Some(tau_max),
            tau_max2,
            bound_method: String::new(),
            bound_value: BoundCell::Empty,
            exact_value: None,
            preconditions: Vec::new(),
            soundness: Soundness::NotChecked,
        }
    }

    pub fn gap(&self) -> Option<Rational> {
        match (&self.bound_value, &self.exact_value) {
            (BoundCell::Value(b), Some(e)) => Some(b - e),
            _ => None,
        }
    }

    fn cells(&self) -> Vec<String> {
        let opt = |r: &Option<Rational>| r.as_ref().map(fmt_rational).unwrap_or_default();
        vec![
            self.node.clone(),
            opt(&self.tau),
            opt(&self.tau_max),
            opt(&self.tau_max2),
            self.bound_method.clone(),
            match &self.bound_value {
                BoundCell::Empty => String::new(),
                BoundCell::Value(v) => fmt_rational(v),
                BoundCell::Inapplicable => INAPPLICABLE.to_string(),
            },
            opt(&self.exact_value),
            opt(&self.gap()),
            self.preconditions.join(";"),
            self.soundness.cell().to_string(),
        ]
    }
}

pub fn write_csv(rows: &[ReportRow], out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    w.flush()
}

/// `ln` of a positive rational with 12 significant digits.
pub fn log_text(r: &Rational) -> String {
    fmt_sig(to_f64(r).ln(), 12)
}

pub fn float_text(x: f64) -> String {
    fmt_sig(x, 12)
}
