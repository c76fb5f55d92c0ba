//! PMFs, channels and the scalar leakage measures computed from them.
//!
//! Every quantity here is a column-wise statistic of the channel matrix:
//!
//! | function | per-column statistic |
//! |----------|----------------------|
//! | [`tau_max`] | largest entry (leakage exponent) |
//! | [`tau_max2`] | second-largest entry, counted with multiplicity |
//! | [`doeblin`] | smallest entry |
//! | [`tau_subset`] | smallest entry among a subset of rows |
//!
//! Everything is exact; [`maximal_leakage`] is the only function that returns a float.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{int, is_probability, to_f64, Rational};

/// Labels `"0"`, `"1"`, ... used when no alphabet is given.
pub fn default_alphabet(size: usize) -> Vec<String> {
    (0..size).map(|i| i.to_string()).collect()
}

fn check_alphabet(alphabet: &[String]) -> Result<()> {
    if alphabet.is_empty() {
        return Err(Error::InvalidPmf("empty alphabet".into()));
    }
    let mut seen = HashSet::new();
    for label in alphabet {
        if !seen.insert(label.as_str()) {
            return Err(Error::InvalidPmf(format!("duplicate symbol `{label}`")));
        }
    }
    Ok(())
}

/// A probability vector over an ordered alphabet. Masses are exact and sum to one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pmf {
    alphabet: Vec<String>,
    mass: Vec<Rational>,
}

impl Pmf {
    pub fn new(alphabet: Vec<String>, mass: Vec<Rational>) -> Result<Self> {
        check_alphabet(&alphabet)?;
        if alphabet.len() != mass.len() {
            return Err(Error::InvalidPmf(format!(
                "{} symbols but {} masses",
                alphabet.len(),
                mass.len()
            )));
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !is_probability(m)) {
            return Err(Error::InvalidPmf(format!(
                "mass of `{}` is {m}, outside [0, 1]",
                alphabet[i]
            )));
        }
        let total: Rational = mass.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidPmf(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { alphabet, mass })
    }

    /// A PMF over the default alphabet `"0".."k-1"`.
    pub fn from_masses(mass: Vec<Rational>) -> Result<Self> {
        Self::new(default_alphabet(mass.len()), mass)
    }

    pub fn point(alphabet: Vec<String>, index: usize) -> Result<Self> {
        let mut mass = vec![Rational::zero(); alphabet.len()];
        *mass
            .get_mut(index)
            .ok_or_else(|| Error::InvalidPmf(format!("point index {index} out of range")))? =
            Rational::one();
        Self::new(alphabet, mass)
    }

    pub fn uniform(alphabet: Vec<String>) -> Result<Self> {
        let k = alphabet.len() as i64;
        let mass = vec![Rational::new(1.into(), k.max(1).into()); alphabet.len()];
        Self::new(alphabet, mass)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn get(&self, index: usize) -> &Rational {
        &self.mass[index]
    }

    pub fn mass_of(&self, label: &str) -> Option<&Rational> {
        self.alphabet
            .iter()
            .position(|l| l == label)
            .map(|i| &self.mass[i])
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_positive())
            .map(|(i, _)| i)
    }
}

/// A row-stochastic matrix `P_{Y|X}` with one exact PMF per input symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteChannel {
    input_alphabet: Vec<String>,
    output_alphabet: Vec<String>,
    rows: Vec<Vec<Rational>>,
}

impl DiscreteChannel {
    pub fn new(
        input_alphabet: Vec<String>,
        output_alphabet: Vec<String>,
        rows: Vec<Vec<Rational>>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidChannel("channel needs at least one row".into()));
        }
        if input_alphabet.len() != rows.len() {
            return Err(Error::InvalidChannel(format!(
                "{} input symbols but {} rows",
                input_alphabet.len(),
                rows.len()
            )));
        }
        check_alphabet(&input_alphabet).map_err(|e| Error::InvalidChannel(e.to_string()))?;
        for (i, row) in rows.iter().enumerate() {
            // Reuse the PMF checks; the clone is dropped immediately.
            Pmf::new(output_alphabet.clone(), row.clone()).map_err(|e| {
                Error::InvalidChannel(format!("row `{}`: {e}", input_alphabet[i]))
            })?;
        }
        Ok(Self {
            input_alphabet,
            output_alphabet,
            rows,
        })
    }

    /// Stacks PMFs that share an alphabet; inputs are labelled `"0".."n-1"`.
    pub fn from_pmfs(pmfs: &[Pmf]) -> Result<Self> {
        let first = pmfs
            .first()
            .ok_or_else(|| Error::InvalidChannel("channel needs at least one row".into()))?;
        if let Some(p) = pmfs.iter().find(|p| p.alphabet != first.alphabet) {
            return Err(Error::AlphabetMismatch(format!(
                "{:?} vs {:?}",
                first.alphabet, p.alphabet
            )));
        }
        Ok(Self {
            input_alphabet: default_alphabet(pmfs.len()),
            output_alphabet: first.alphabet.clone(),
            rows: pmfs.iter().map(|p| p.mass.clone()).collect(),
        })
    }

    pub fn input_alphabet(&self) -> &[String] {
        &self.input_alphabet
    }

    pub fn output_alphabet(&self) -> &[String] {
        &self.output_alphabet
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.rows[i]
    }

    pub fn row_pmf(&self, i: usize) -> Pmf {
        Pmf {
            alphabet: self.output_alphabet.clone(),
            mass: self.rows[i].clone(),
        }
    }

    pub fn pmfs(&self) -> Vec<Pmf> {
        (0..self.rows.len()).map(|i| self.row_pmf(i)).collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_alphabet.len()
    }

    /// The channel restricted to its distinct rows, first occurrence kept.
    pub fn distinct_rows(&self) -> DiscreteChannel {
        let mut inputs = Vec::new();
        let mut rows: Vec<Vec<Rational>> = Vec::new();
        for (label, row) in self.input_alphabet.iter().zip(&self.rows) {
            if !rows.contains(row) {
                inputs.push(label.clone());
                rows.push(row.clone());
            }
        }
        DiscreteChannel {
            input_alphabet: inputs,
            output_alphabet: self.output_alphabet.clone(),
            rows,
        }
    }

    fn column(&self, y: usize) -> impl Iterator<Item = &Rational> + '_ {
        self.rows.iter().map(move |r| &r[y])
    }
}

/// The four channel-level measures together.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSet {
    pub tau: Rational,
    pub tau_max: Rational,
    /// `None` when the channel has a single input.
    pub tau_max2: Option<Rational>,
    pub leakage_log: f64,
}

impl MeasureSet {
    pub fn of(channel: &DiscreteChannel) -> Self {
        let tau_max = tau_max(channel);
        Self {
            tau: doeblin(channel),
            tau_max2: tau_max2(channel).ok(),
            leakage_log: to_f64(&tau_max).ln(),
            tau_max,
        }
    }
}

/// Leakage exponent: sum over outputs of the column maximum.
pub fn tau_max(channel: &DiscreteChannel) -> Rational {
    (0..channel.n_outputs())
        .map(|y| channel.column(y).max().cloned().unwrap_or_default())
        .sum()
}

/// Sum over outputs of the second-largest column entry. Ties count with
/// multiplicity, so two equal maxima make the second maximum equal to the maximum.
pub fn tau_max2(channel: &DiscreteChannel) -> Result<Rational> {
    if channel.n_inputs() < 2 {
        return Err(Error::SecondMaxUndefined);
    }
    Ok((0..channel.n_outputs())
        .map(|y| second_largest(channel.column(y)))
        .sum())
}

fn second_largest<'a>(values: impl Iterator<Item = &'a Rational>) -> Rational {
    let mut first: Option<&Rational> = None;
    let mut second: Option<&Rational> = None;
    for v in values {
        if first.is_none_or(|f| v > f) {
            second = first;
            first = Some(v);
        } else if second.is_none_or(|s| v > s) {
            second = Some(v);
        }
    }
    second.cloned().unwrap_or_default()
}

/// Doeblin coefficient: sum over outputs of the column minimum.
pub fn doeblin(channel: &DiscreteChannel) -> Rational {
    (0..channel.n_outputs())
        .map(|y| channel.column(y).min().cloned().unwrap_or_default())
        .sum()
}

/// `Σ_y min_{i ∈ subset} P_i(y)`.
pub fn tau_subset(channel: &DiscreteChannel, subset: &[usize]) -> Result<Rational> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= channel.n_inputs()) {
        return Err(Error::InvalidParameter(format!(
            "row index {i} out of range for {} inputs",
            channel.n_inputs()
        )));
    }
    Ok((0..channel.n_outputs())
        .map(|y| {
            subset
                .iter()
                .map(|&i| &channel.rows[i][y])
                .min()
                .cloned()
                .unwrap_or_default()
        })
        .sum())
}

/// Sum of `tau_subset` over all subsets of exactly `k` rows.
/// `k = 2` gives the pair sum and `k = 3` the triplet sum.
pub fn tau_k_sum(channel: &DiscreteChannel, k: usize) -> Result<Rational> {
    if k == 0 {
        return Err(Error::EmptySubset);
    }
    let n = channel.n_inputs();
    let mut total = Rational::zero();
    for subset in k_subsets(n, k) {
        total += tau_subset(channel, &subset)?;
    }
    Ok(total)
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Maximal leakage in nats: the natural log of [`tau_max`].
///
/// Assumes every input has positive prior probability, which makes the value prior-free.
pub fn maximal_leakage(channel: &DiscreteChannel) -> f64 {
    to_f64(&tau_max(channel)).ln()
}

fn check_probability(name: &str, p: &Rational) -> Result<()> {
    if !is_probability(p) {
        return Err(Error::InvalidParameter(format!("{name} = {p} is outside [0, 1]")));
    }
    Ok(())
}

/// q-ary symmetric channel: `1 - delta` on the diagonal, `delta / (q - 1)` elsewhere.
pub fn make_q_ary_symmetric(q: usize, delta: &Rational) -> Result<DiscreteChannel> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q = {q}, need q >= 2")));
    }
    check_probability("delta", delta)?;
    let off = delta / int(q as i64 - 1);
    let on = Rational::one() - delta;
    let rows = (0..q)
        .map(|x| {
            (0..q)
                .map(|y| if x == y { on.clone() } else { off.clone() })
                .collect()
        })
        .collect();
    DiscreteChannel::new(default_alphabet(q), default_alphabet(q), rows)
}

/// Erasure channel: the input survives with probability `1 - eps`, otherwise `"e"` is output.
pub fn make_erasure(q: usize, eps: &Rational) -> Result<DiscreteChannel> {
    if q < 1 {
        return Err(Error::InvalidParameter("q = 0, need q >= 1".into()));
    }
    check_probability("eps", eps)?;
    let inputs = default_alphabet(q);
    let mut outputs = inputs.clone();
    outputs.push("e".to_string());
    let keep = Rational::one() - eps;
    let rows = (0..q)
        .map(|x| {
            let mut row = vec![Rational::zero(); q + 1];
            row[x] = keep.clone();
            row[q] = eps.clone();
            row
        })
        .collect();
    DiscreteChannel::new(inputs, outputs, rows)
}
