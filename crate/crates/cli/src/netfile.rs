//! JSON network files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "source": "X",
//!   "nodes": [
//!     { "id": "X", "alphabet": 2 },
//!     { "id": "Y", "alphabet": ["a", "b"], "parents": ["X"],
//!       "cpt": [["3/4", "1/4"], ["0.25", "0.75"]] }
//!   ]
//! }
//! ```
//!
//! CPT rows follow the parent configurations with the first parent most significant.
//! Entries are exact expressions; templates may name parameters (`"1 - delta"`).

use std::path::Path;

use maxleak::measures::default_alphabet;
use maxleak::rational::fmt_rational;
use maxleak::{BayesNet, Node};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::expr::{eval, Params};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub format_version: u32,
    pub source: String,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub alphabet: AlphabetSpec,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub cpt: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphabetSpec {
    Size(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Text(String),
    Number(serde_json::Number),
}

impl Entry {
    fn text(&self) -> String {
        match self {
            Entry::Text(s) => s.clone(),
            Entry::Number(n) => n.to_string(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_file(text: &str, path: &Path) -> Result<NetworkFile> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(CliError::Format(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file)
}

/// Nodes with every entry evaluated; the network itself is not validated here.
pub fn to_nodes(file: &NetworkFile, params: &Params) -> Result<Vec<Node>> {
    file.nodes
        .iter()
        .map(|n| {
            let alphabet = match &n.alphabet {
                AlphabetSpec::Size(k) => default_alphabet(*k),
                AlphabetSpec::Labels(l) => l.clone(),
            };
            let cpt = n
                .cpt
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    row.iter()
                        .map(|e| {
                            eval(&e.text(), params).map_err(|err| {
                                CliError::Format(format!("node `{}` row {r}: {err}", n.id))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Node {
                id: n.id.clone(),
                alphabet,
                parents: n.parents.clone(),
                cpt,
            })
        })
        .collect()
}

/// Reads, evaluates and validates a network file.
pub fn load(path: &Path, params: &Params) -> Result<BayesNet> {
    let file = parse_file(&read_text(path)?, path)?;
    Ok(BayesNet::new(to_nodes(&file, params)?, file.source.clone())?)
}

/// Canonical form: explicit labels, `num/den` entries, declared node order.
pub fn to_file(net: &BayesNet) -> NetworkFile {
    NetworkFile {
        format_version: FORMAT_VERSION,
        source: net.source().to_string(),
        nodes: net
            .nodes()
            .iter()
            .map(|n| NodeSpec {
                id: n.id.clone(),
                alphabet: AlphabetSpec::Labels(n.alphabet.clone()),
                parents: n.parents.clone(),
                cpt: n
                    .cpt
                    .iter()
                    .map(|row| row.iter().map(|v| Entry::Text(fmt_rational(v))).collect())
                    .collect(),
            })
            .collect(),
    }
}

pub fn write_network(net: &BayesNet) -> String {
    let mut s = serde_json::to_string_pretty(&to_file(net)).expect("network files always serialize");
    s.push('\n');
    s
}

/// Parses canonical text produced by [`write_network`] (or any file without parameters).
pub fn parse_network(text: &str) -> Result<BayesNet> {
    let file = parse_file(text, Path::new("<memory>"))?;
    Ok(BayesNet::new(to_nodes(&file, &Params::new())?, file.source.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "format_version": 1,
        "source": "X",
        "nodes": [
            {"id": "X", "alphabet": 2},
            {"id": "Y", "alphabet": ["a", "b"], "parents": ["X"], "cpt": [["3/4", "0.25"], [0.5, "1/2"]]}
        ]
    }"#;

    #[test]
    fn round_trip() {
        let net = parse_network(SMALL).unwrap();
        let text = write_network(&net);
        assert!(text.contains("\"1/4\""));
        let again = parse_network(&text).unwrap();
        assert_eq!(net, again);
        assert_eq!(text, write_network(&again));
    }

    #[test]
    fn rejects_unknown_version_and_fields() {
        assert!(parse_network(&SMALL.replace("\"format_version\": 1", "\"format_version\": 2")).is_err());
        assert!(parse_network(&SMALL.replace("\"source\"", "\"extra\": 0, \"source\"")).is_err());
    }
}
