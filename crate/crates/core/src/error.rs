use thiserror::Error;

use crate::bayes_net::Issue;
use crate::rational::{fmt_rational, Rational};

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("subset of inputs must be non-empty")]
    EmptySubset,

    #[error("second-largest value is undefined for a channel with a single input")]
    SecondMaxUndefined,

    #[error("capacity exceeded: {what} needs {needed} states, limit is {limit}")]
    Capacity {
        what: String,
        needed: u128,
        limit: usize,
    },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("coupling condition fails: {lhs_text} < {rhs_text}", lhs_text = fmt_rational(.lhs), rhs_text = fmt_rational(.rhs))]
    ConditionFails { lhs: Box<Rational>, rhs: Box<Rational> },

    #[error("precondition failed: {name} = {value_text}", value_text = fmt_rational(.value))]
    Precondition { name: String, value: Rational },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("invalid network: {}", issues_text(.0))]
    InvalidNetwork(Vec<Issue>),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("topology mismatch: {0}")]
    Topology(String),
}

fn issues_text(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
