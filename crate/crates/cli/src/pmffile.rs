//! JSON files holding a family of PMFs or of joint PMFs.
//!
//! ```json
//! { "format_version": 1, "alphabet": ["a", "b"], "pmfs": [["1/2", "1/2"], ["1", "0"]] }
//! { "format_version": 1, "x_alphabet": 2, "y_alphabet": 2,
//!   "joints": [[["1/4", "1/4"], ["1/4", "1/4"]], [["1/2", "0"], ["0", "1/2"]]] }
//! ```
//! Joint tables are indexed `[x][y]`.

use std::path::Path;

use maxleak::measures::default_alphabet;
use maxleak::rational::Rational;
use maxleak::{JointPmf, Pmf};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::expr::{eval, Params};
use crate::netfile::{read_text, AlphabetSpec, Entry, FORMAT_VERSION};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    format_version: u32,
    alphabet: Option<AlphabetSpec>,
    pmfs: Option<Vec<Vec<Entry>>>,
    x_alphabet: Option<AlphabetSpec>,
    y_alphabet: Option<AlphabetSpec>,
    joints: Option<Vec<Vec<Vec<Entry>>>>,
}

#[derive(Debug, Clone)]
pub enum Family {
    Pmfs(Vec<Pmf>),
    Joints(Vec<JointPmf>),
}

impl Family {
    /// The PMFs themselves, or the `Y`-marginals of the joints.
    pub fn y_family(&self) -> Vec<Pmf> {
        match self {
            Family::Pmfs(p) => p.clone(),
            Family::Joints(j) => j.iter().map(JointPmf::y_marginal).collect(),
        }
    }

    /// The joints, or each PMF paired with a single-symbol `X`.
    pub fn joints(&self) -> Result<Vec<JointPmf>> {
        match self {
            Family::Joints(j) => Ok(j.clone()),
            Family::Pmfs(p) => p
                .iter()
                .map(|pmf| {
                    Ok(JointPmf::new(
                        vec![maxleak::bayes_net::EMPTY_CONFIG.to_string()],
                        pmf.alphabet().to_vec(),
                        vec![pmf.masses().to_vec()],
                    )?)
                })
                .collect(),
        }
    }
}

fn labels(spec: &Option<AlphabetSpec>, len: usize) -> Vec<String> {
    match spec {
        Some(AlphabetSpec::Labels(l)) => l.clone(),
        Some(AlphabetSpec::Size(k)) => default_alphabet(*k),
        None => default_alphabet(len),
    }
}

fn row(entries: &[Entry]) -> Result<Vec<Rational>> {
    entries
        .iter()
        .map(|e| match e {
            Entry::Text(s) => eval(s, &Params::new()),
            Entry::Number(n) => eval(&n.to_string(), &Params::new()),
        })
        .collect()
}

pub fn parse_family(text: &str, path: &Path) -> Result<Family> {
    let raw: RawFile = serde_json::from_str(text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if raw.format_version != FORMAT_VERSION {
        return Err(CliError::Format(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            raw.format_version
        )));
    }
    match (&raw.pmfs, &raw.joints) {
        (Some(pmfs), None) => {
            let width = pmfs.first().map_or(0, Vec::len);
            let alphabet = labels(&raw.alphabet, width);
            let out = pmfs
                .iter()
                .map(|r| Ok(Pmf::new(alphabet.clone(), row(r)?)?))
                .collect::<Result<Vec<_>>>()?;
            if out.is_empty() {
                return Err(CliError::Format("`pmfs` is empty".into()));
            }
            Ok(Family::Pmfs(out))
        }
        (None, Some(joints)) => {
            let nx = joints.first().map_or(0, Vec::len);
            let ny = joints.first().and_then(|j| j.first()).map_or(0, Vec::len);
            let xa = labels(&raw.x_alphabet, nx);
            let ya = labels(&raw.y_alphabet, ny);
            let out = joints
                .iter()
                .map(|table| {
                    let mass = table.iter().map(|r| row(r)).collect::<Result<Vec<_>>>()?;
                    Ok(JointPmf::new(xa.clone(), ya.clone(), mass)?)
                })
                .collect::<Result<Vec<_>>>()?;
            if out.is_empty() {
                return Err(CliError::Format("`joints` is empty".into()));
            }
            Ok(Family::Joints(out))
        }
        _ => Err(CliError::Format("expected exactly one of `pmfs` or `joints`".into())),
    }
}

pub fn load_family(path: &Path) -> Result<Family> {
    parse_family(&read_text(path)?, path)
}
