//! Discrete Bayesian networks with exact brute-force inference.
//!
//! A CPT row is indexed by the parent configuration, with parents taken in
//! declared order and the first parent most significant. The designated source
//! has no parents and its prior, if any, is ignored by every leakage computation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::coupling::for_each_product;
use crate::error::{Error, Result};
use crate::measures::{DiscreteChannel, Pmf};
use crate::rational::{fmt_rational, Rational};
use crate::simultaneous::JointPmf;

/// Default cap on enumerated joint states.
pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

/// Label of the single configuration of an empty parent set.
pub const EMPTY_CONFIG: &str = "()";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub alphabet: Vec<String>,
    pub parents: Vec<String>,
    /// One row per parent configuration. May be empty for the source.
    pub cpt: Vec<Vec<Rational>>,
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    DuplicateId(String),
    EmptyAlphabet(String),
    UnknownParent { node: String, parent: String },
    Cycle(Vec<String>),
    UnknownSource(String),
    SourceHasParents(String),
    RowCount { node: String, expected: usize, got: usize },
    RowLength { node: String, row: usize, expected: usize, got: usize },
    NegativeEntry { node: String, row: usize, column: String },
    RowSum { node: String, row: usize, config: String, sum: Rational },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateId(id) => write!(f, "duplicate node id `{id}`"),
            Issue::EmptyAlphabet(id) => write!(f, "node `{id}` has an empty alphabet"),
            Issue::UnknownParent { node, parent } => {
                write!(f, "node `{node}` lists unknown parent `{parent}`")
            }
            Issue::Cycle(ids) => write!(f, "cycle: {} -> {}", ids.join(" -> "), ids[0]),
            Issue::UnknownSource(id) => write!(f, "source `{id}` is not a node"),
            Issue::SourceHasParents(id) => write!(f, "source `{id}` must not have parents"),
            Issue::RowCount { node, expected, got } => {
                write!(f, "node `{node}`: CPT has {got} rows, expected {expected}")
            }
            Issue::RowLength {
                node,
                row,
                expected,
                got,
            } => write!(f, "node `{node}` row {row}: {got} entries, expected {expected}"),
            Issue::NegativeEntry { node, row, column } => {
                write!(f, "node `{node}` row {row}: negative entry at `{column}`")
            }
            Issue::RowSum {
                node,
                row,
                config,
                sum,
            } => write!(
                f,
                "node `{node}` row {row} ({config}): sums to {}",
                fmt_rational(sum)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BayesNet {
    nodes: Vec<Node>,
    source: String,
    index: BTreeMap<String, usize>,
    state_limit: usize,
}

impl BayesNet {
    /// Builds and validates.
    pub fn new(nodes: Vec<Node>, source: impl Into<String>) -> Result<Self> {
        let net = Self::new_unchecked(nodes, source);
        let issues = net.validate();
        if issues.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNetwork(issues))
        }
    }

    /// Builds without validation, for diagnostics.
    pub fn new_unchecked(nodes: Vec<Node>, source: impl Into<String>) -> Self {
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id.clone()).or_insert(i);
        }
        Self {
            nodes,
            source: source.into(),
            index,
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }

    pub fn with_state_limit(mut self, limit: usize) -> Self {
        self.state_limit = limit;
        self
    }

    pub fn state_limit(&self) -> usize {
        self.state_limit
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn node(&self, id: &str) -> Result<&Node> {
        self.index
            .get(id)
            .map(|&i| &self.nodes[i])
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    fn idx(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// All violations, in a fixed order: identities, parents, cycles, then CPTs.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                issues.push(Issue::DuplicateId(n.id.clone()));
            }
            if n.alphabet.is_empty() {
                issues.push(Issue::EmptyAlphabet(n.id.clone()));
            }
        }
        match self.index.get(&self.source) {
            None => issues.push(Issue::UnknownSource(self.source.clone())),
            Some(&i) if !self.nodes[i].parents.is_empty() => {
                issues.push(Issue::SourceHasParents(self.source.clone()))
            }
            _ => {}
        }
        let mut parents_ok = true;
        for n in &self.nodes {
            for p in &n.parents {
                if !self.index.contains_key(p) {
                    parents_ok = false;
                    issues.push(Issue::UnknownParent {
                        node: n.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        if parents_ok {
            if let Some(cycle) = self.find_cycle() {
                issues.push(Issue::Cycle(cycle));
            }
        }
        if !parents_ok {
            return issues;
        }
        for n in &self.nodes {
            let is_source = n.id == self.source;
            if is_source && n.cpt.is_empty() {
                continue;
            }
            let configs = self.parent_configs(n);
            if n.cpt.len() != configs.len() {
                issues.push(Issue::RowCount {
                    node: n.id.clone(),
                    expected: configs.len(),
                    got: n.cpt.len(),
                });
                continue;
            }
            for (r, row) in n.cpt.iter().enumerate() {
                if row.len() != n.alphabet.len() {
                    issues.push(Issue::RowLength {
                        node: n.id.clone(),
                        row: r,
                        expected: n.alphabet.len(),
                        got: row.len(),
                    });
                    continue;
                }
                if let Some(c) = row.iter().position(|v| v.is_negative()) {
                    issues.push(Issue::NegativeEntry {
                        node: n.id.clone(),
                        row: r,
                        column: n.alphabet[c].clone(),
                    });
                }
                let sum: Rational = row.iter().sum();
                if !sum.is_one() {
                    issues.push(Issue::RowSum {
                        node: n.id.clone(),
                        row: r,
                        config: configs[r].clone(),
                        sum,
                    });
                }
            }
        }
        issues
    }

    /// Labels of the parent configurations of `n`, e.g. `X=0,Y1=1`.
    fn parent_configs(&self, n: &Node) -> Vec<String> {
        if n.parents.is_empty() {
            return vec![EMPTY_CONFIG.to_string()];
        }
        let alphabets: Vec<&[String]> = n
            .parents
            .iter()
            .map(|p| self.index.get(p).map(|&i| self.nodes[i].alphabet.as_slice()).unwrap_or(&[]))
            .collect();
        let sets: Vec<Vec<usize>> = alphabets.iter().map(|a| (0..a.len()).collect()).collect();
        let mut out = Vec::new();
        for_each_product(&sets, |t| {
            let parts: Vec<String> = t
                .iter()
                .zip(&n.parents)
                .zip(&alphabets)
                .map(|((&v, p), a)| format!("{p}={}", a[v]))
                .collect();
            out.push(parts.join(","));
        });
        out
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // 0 unvisited, 1 on stack, 2 done.
        let mut state = vec![0u8; self.nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        fn dfs(net: &BayesNet, v: usize, state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<String>> {
            state[v] = 1;
            stack.push(v);
            for p in &net.nodes[v].parents {
                let Some(&u) = net.index.get(p) else { continue };
                if state[u] == 1 {
                    let start = stack.iter().position(|&s| s == u).expect("on stack");
                    // Stack runs child to parent; report in edge direction.
                    let mut cyc: Vec<String> = stack[start..].iter().map(|&s| net.nodes[s].id.clone()).collect();
                    cyc.reverse();
                    return Some(cyc);
                }
                if state[u] == 0 {
                    if let Some(c) = dfs(net, u, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| self.nodes[a].id.cmp(&self.nodes[b].id));
        for v in order {
            if state[v] == 0 {
                if let Some(c) = dfs(self, v, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Kahn's algorithm; among ready nodes the smallest id goes first.
    pub fn topological_sort(&self) -> Result<Vec<String>> {
        Ok(self.topo_indices()?.into_iter().map(|i| self.nodes[i].id.clone()).collect())
    }

    fn topo_indices(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, node) in self.nodes.iter().enumerate() {
            for p in &node.parents {
                let u = self.idx(p)?;
                indegree[v] += 1;
                children[u].push(v);
            }
        }
        let mut ready: BTreeSet<(&str, usize)> = (0..n)
            .filter(|&v| indegree[v] == 0)
            .map(|v| (self.nodes[v].id.as_str(), v))
            .collect();
        let mut out = Vec::with_capacity(n);
        while let Some(first) = ready.pop_first() {
            let v = first.1;
            out.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert((self.nodes[c].id.as_str(), c));
                }
            }
        }
        if out.len() != n {
            let cycle = self.find_cycle().unwrap_or_default();
            return Err(Error::InvalidNetwork(vec![Issue::Cycle(cycle)]));
        }
        Ok(out)
    }

    /// Position of each node in the topological order.
    pub fn topo_rank(&self) -> Result<BTreeMap<String, usize>> {
        Ok(self
            .topological_sort()?
            .into_iter()
            .enumerate()
            .map(|(r, id)| (id, r))
            .collect())
    }

    /// The CPT of `id` as a channel from its parent configurations.
    pub fn cpt_channel(&self, id: &str) -> Result<DiscreteChannel> {
        let n = self.node(id)?;
        if n.cpt.is_empty() {
            return Err(Error::InvalidQuery(format!("node `{id}` has no CPT")));
        }
        DiscreteChannel::new(self.parent_configs(n), n.alphabet.clone(), n.cpt.clone())
    }

    /// True if a directed path leads from `from` to `to` (a node reaches itself).
    pub fn reaches(&self, from: &str, to: &str) -> Result<bool> {
        let start = self.idx(from)?;
        let goal = self.idx(to)?;
        let mut stack = vec![goal];
        let mut seen = vec![false; self.nodes.len()];
        // Walk parents upward from `to`.
        while let Some(v) = stack.pop() {
            if v == start {
                return Ok(true);
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            for p in &self.nodes[v].parents {
                stack.push(self.idx(p)?);
            }
        }
        Ok(false)
    }

    /// `targets` and all their ancestors, in topological order.
    fn ancestral(&self, targets: &[usize]) -> Result<Vec<usize>> {
        let mut keep = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = targets.to_vec();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut keep[v], true) {
                continue;
            }
            for p in &self.nodes[v].parents {
                stack.push(self.idx(p)?);
            }
        }
        Ok(self.topo_indices()?.into_iter().filter(|&v| keep[v]).collect())
    }

    fn source_index(&self) -> Result<usize> {
        self.idx(&self.source)
    }

    /// Enumerates assignments of `order` (topological) with the source fixed to `x`,
    /// calling `f(values, weight)` on each assignment of positive weight.
    fn enumerate(&self, order: &[usize], x: usize, mut f: impl FnMut(&[usize], &Rational)) -> Result<()> {
        let src = self.source_index()?;
        let sizes: Vec<usize> = order
            .iter()
            .map(|&v| if v == src { 1 } else { self.nodes[v].alphabet.len() })
            .collect();
        let needed: u128 = sizes.iter().map(|&s| s as u128).product();
        if needed > self.state_limit as u128 {
            return Err(Error::Capacity {
                what: "network joint states".into(),
                needed,
                limit: self.state_limit,
            });
        }
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(p, &v)| (v, p)).collect();
        let parent_pos: Vec<Vec<(usize, usize)>> = order
            .iter()
            .map(|&v| {
                self.nodes[v]
                    .parents
                    .iter()
                    .map(|p| {
                        let u = self.index[p];
                        (pos[&u], self.nodes[u].alphabet.len())
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![0usize; order.len()];
        let mut weights = vec![Rational::one(); order.len() + 1];
        self.descend(order, src, x, &parent_pos, 0, &mut values, &mut weights, &mut f);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        order: &[usize],
        src: usize,
        x: usize,
        parent_pos: &[Vec<(usize, usize)>],
        depth: usize,
        values: &mut Vec<usize>,
        weights: &mut Vec<Rational>,
        f: &mut impl FnMut(&[usize], &Rational),
    ) {
        if depth == order.len() {
            f(values, &weights[depth]);
            return;
        }
        let v = order[depth];
        if v == src {
            values[depth] = x;
            weights[depth + 1] = weights[depth].clone();
            self.descend(order, src, x, parent_pos, depth + 1, values, weights, f);
            return;
        }
        let row = parent_pos[depth]
            .iter()
            .fold(0usize, |acc, &(p, size)| acc * size + values[p]);
        let cpt_row = &self.nodes[v].cpt[row];
        for (val, p) in cpt_row.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            values[depth] = val;
            weights[depth + 1] = &weights[depth] * p;
            self.descend(order, src, x, parent_pos, depth + 1, values, weights, f);
        }
    }

    /// Joint PMF of all non-source nodes (in declared order) given source value `x`.
    /// Labels join the node values with commas.
    pub fn joint_distribution(&self, x: usize) -> Result<Pmf> {
        let src = self.source_index()?;
        let targets: Vec<String> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != src)
            .map(|(_, n)| n.id.clone())
            .collect();
        if x >= self.nodes[src].alphabet.len() {
            return Err(Error::InvalidQuery(format!("source value {x} is out of range")));
        }
        let ch = self.composite_channel(&targets)?;
        Ok(ch.row_pmf(x))
    }

    /// Product alphabet of `targets`, first target most significant.
    pub fn product_alphabet(&self, targets: &[String]) -> Result<Vec<String>> {
        let alphabets = targets
            .iter()
            .map(|t| Ok(self.node(t)?.alphabet.clone()))
            .collect::<Result<Vec<_>>>()?;
        if alphabets.is_empty() {
            return Ok(vec![EMPTY_CONFIG.to_string()]);
        }
        let sets: Vec<Vec<usize>> = alphabets.iter().map(|a| (0..a.len()).collect()).collect();
        let mut out = Vec::new();
        for_each_product(&sets, |t| {
            let parts: Vec<&str> = t.iter().zip(&alphabets).map(|(&v, a)| a[v].as_str()).collect();
            out.push(parts.join(","));
        });
        Ok(out)
    }

    /// `P_{S|X}` for the target list `S`. The source and repeated targets are allowed.
    pub fn composite_channel(&self, targets: &[String]) -> Result<DiscreteChannel> {
        let src = self.source_index()?;
        let tix = targets.iter().map(|t| self.idx(t)).collect::<Result<Vec<_>>>()?;
        let out_alphabet = self.product_alphabet(targets)?;
        if out_alphabet.len() > self.state_limit {
            return Err(Error::Capacity {
                what: "composite output alphabet".into(),
                needed: out_alphabet.len() as u128,
                limit: self.state_limit,
            });
        }
        let order = self.ancestral(&tix)?;
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(p, &v)| (v, p)).collect();
        let sizes: Vec<usize> = tix.iter().map(|&t| self.nodes[t].alphabet.len()).collect();
        let n_in = self.nodes[src].alphabet.len();
        let mut rows = Vec::with_capacity(n_in);
        for x in 0..n_in {
            let mut row = vec![Rational::zero(); out_alphabet.len()];
            self.enumerate(&order, x, |vals, w| {
                let k = tix
                    .iter()
                    .zip(&sizes)
                    .fold(0usize, |acc, (t, &s)| acc * s + vals[pos[t]]);
                row[k] += w;
            })?;
            rows.push(row);
        }
        DiscreteChannel::new(self.nodes[src].alphabet.clone(), out_alphabet, rows)
    }

    /// For each source value `i`, the joint PMF of (`x_targets`, `y_targets`) given `X = i`.
    pub fn composite_joint(&self, x_targets: &[String], y_targets: &[String]) -> Result<Vec<JointPmf>> {
        let all: Vec<String> = x_targets.iter().chain(y_targets).cloned().collect();
        let ch = self.composite_channel(&all)?;
        let xa = self.product_alphabet(x_targets)?;
        let ya = self.product_alphabet(y_targets)?;
        ch.rows()
            .iter()
            .map(|row| {
                let mass = (0..xa.len())
                    .map(|x| row[x * ya.len()..(x + 1) * ya.len()].to_vec())
                    .collect();
                JointPmf::new(xa.clone(), ya.clone(), mass)
            })
            .collect()
    }
}

/// Query `(X, V, U)` with `U` not in `V` and no directed path from `U` into `V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeQuery {
    pub source: String,
    pub v_set: Vec<String>,
    pub u: String,
}

impl NodeQuery {
    pub fn new(net: &BayesNet, v_set: Vec<String>, u: impl Into<String>) -> Result<Self> {
        let u = u.into();
        net.node(&u)?;
        if u == net.source() {
            return Err(Error::InvalidQuery("U must not be the source".into()));
        }
        if v_set.is_empty() {
            return Err(Error::InvalidQuery("V must be non-empty".into()));
        }
        for v in &v_set {
            net.node(v)?;
            if v == &u {
                return Err(Error::InvalidQuery(format!("U = `{u}` is also in V")));
            }
            if v == net.source() {
                return Err(Error::InvalidQuery("V must not contain the source".into()));
            }
            if net.reaches(&u, v)? {
                return Err(Error::InvalidQuery(format!("directed path from U = `{u}` into V at `{v}`")));
            }
        }
        let mut seen = BTreeSet::new();
        if let Some(d) = v_set.iter().find(|v| !seen.insert(v.as_str())) {
            return Err(Error::InvalidQuery(format!("`{d}` appears twice in V")));
        }
        Ok(Self {
            source: net.source().to_string(),
            v_set,
            u,
        })
    }
}
