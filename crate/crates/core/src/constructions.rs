//! Closed-form minimal couplings.
//!
//! * [`maximal_coupling_pair`]: the classical two-marginal maximal coupling.
//! * [`layered_coupling`]: any number of marginals with `tau_max2 <= 1`.
//! * [`build_n4_coupling`]: four marginals under the relaxed pairwise condition
//!   checked by [`n4_condition`], which admits some families with `tau_max2 > 1`.
//!
//! All three place mass `min_{i ∈ I} P_i(y)` on every intersection event
//! `∩_{i ∈ I} {Y_i = y}`. By the maximum–minimum identity the union events then
//! have mass `max_i P_i(y)`, so the union mass equals `tau_max`.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::coupling::{add_mass, for_each_product, Coupling, Tuple};
use crate::error::{Error, Result};
use crate::measures::{doeblin, tau_k_sum, tau_max, tau_max2, tau_subset, DiscreteChannel, Pmf};
use crate::rational::{fmt_rational, Rational};

/// Unordered pairs of `0..4`, in the order 12, 13, 14, 23, 24, 34.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Complementary pair splits `{12|34}`, `{13|24}`, `{14|23}`.
pub const SPLITS: [((usize, usize), (usize, usize)); 3] =
    [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];

fn complement(pair: (usize, usize)) -> (usize, usize) {
    let rest: Vec<usize> = (0..4).filter(|&k| k != pair.0 && k != pair.1).collect();
    (rest[0], rest[1])
}

fn split_of(pair: (usize, usize)) -> usize {
    SPLITS
        .iter()
        .position(|&(a, b)| a == pair || b == pair)
        .expect("every pair belongs to one split")
}

/// Classical maximal coupling of two PMFs: diagonal mass `min{p(y), q(y)}`, the
/// normalized residuals coupled independently.
pub fn maximal_coupling_pair(p: &Pmf, q: &Pmf) -> Result<Coupling> {
    let ch = DiscreteChannel::from_pmfs(&[p.clone(), q.clone()])?;
    let k = ch.n_outputs();
    let overlap = doeblin(&ch);
    let mut mass = BTreeMap::new();
    for y in 0..k {
        add_mass(&mut mass, vec![y, y], p.get(y).min(q.get(y)).clone());
    }
    let rest = Rational::one() - &overlap;
    if rest.is_positive() {
        for a in 0..k {
            let ra = p.get(a) - p.get(a).min(q.get(a));
            if ra.is_zero() {
                continue;
            }
            for b in 0..k {
                let rb = q.get(b) - p.get(b).min(q.get(b));
                if !rb.is_zero() {
                    add_mass(&mut mass, vec![a, b], &ra * &rb / &rest);
                }
            }
        }
    }
    Coupling::new(vec![p.clone(), q.clone()], mass)
}

/// Minimal coupling of any number of PMFs with `tau_max2 <= 1`.
///
/// For each symbol the rows are ranked by mass (ties by index). With probability
/// `P_(k)(y) - P_(k+1)(y)` the top `k` coordinates are tied at `y`; every other
/// coordinate `i` draws independently from its residual
/// `R_i ∝ (P_i(y) - P_(2)(y))·1{i ranks first at y}`. The remaining weight
/// `1 - tau_max2` draws every coordinate from its residual. Residual supports are
/// disjoint, so free coordinates never collide.
pub fn layered_coupling(pmfs: &[Pmf]) -> Result<Coupling> {
    let ch = DiscreteChannel::from_pmfs(pmfs)?;
    let n = ch.n_inputs();
    let k = ch.n_outputs();
    let mut mass = BTreeMap::new();
    if n == 1 {
        for y in 0..k {
            add_mass(&mut mass, vec![y], pmfs[0].get(y).clone());
        }
        return Coupling::new(pmfs.to_vec(), mass);
    }
    let second = tau_max2(&ch)?;
    if second > Rational::one() {
        return Err(Error::Precondition {
            name: "tau_max2 <= 1".into(),
            value: second,
        });
    }

    let order: Vec<Vec<usize>> = (0..k)
        .map(|y| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| ch.row(b)[y].cmp(&ch.row(a)[y]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let sorted = |y: usize, rank: usize| -> Rational {
        order[y]
            .get(rank)
            .map(|&i| ch.row(i)[y].clone())
            .unwrap_or_default()
    };
    let mut numer = vec![vec![Rational::zero(); k]; n];
    for y in 0..k {
        numer[order[y][0]][y] = sorted(y, 0) - sorted(y, 1);
    }
    let norms: Vec<Rational> = numer.iter().map(|r| r.iter().sum()).collect();
    let supports: Vec<Vec<usize>> = numer
        .iter()
        .map(|r| (0..k).filter(|&y| r[y].is_positive()).collect())
        .collect();

    let mut emit = |weight: Rational, fixed: &[(usize, usize)], free: &[usize]| -> Result<()> {
        if let Some(&i) = free.iter().find(|&&i| norms[i].is_zero()) {
            return Err(Error::Construction(format!(
                "coordinate {i} is free with weight {} but has no residual mass",
                fmt_rational(&weight)
            )));
        }
        let sets: Vec<Vec<usize>> = free.iter().map(|&i| supports[i].clone()).collect();
        for_each_product(&sets, |vals| {
            let mut t: Tuple = vec![0; n];
            for &(i, y) in fixed {
                t[i] = y;
            }
            let mut w = weight.clone();
            for (&i, &y) in free.iter().zip(vals) {
                t[i] = y;
                w = w * &numer[i][y] / &norms[i];
            }
            add_mass(&mut mass, t, w);
        });
        Ok(())
    };

    for y in 0..k {
        for level in 2..=n {
            let weight = sorted(y, level - 1) - sorted(y, level);
            if weight.is_zero() {
                continue;
            }
            let fixed: Vec<(usize, usize)> = order[y][..level].iter().map(|&i| (i, y)).collect();
            emit(weight, &fixed, &order[y][level..])?;
        }
    }
    let spread = Rational::one() - &second;
    if spread.is_positive() {
        let all: Vec<usize> = (0..n).collect();
        emit(spread, &[], &all)?;
    }
    Coupling::new(pmfs.to_vec(), mass)
}

/// Every quantity the four-marginal construction is assembled from.
///
/// Subsets are 0-based: `tau_subsets[&vec![0, 1]]` is `τ_12`.
#[derive(Debug, Clone, PartialEq)]
pub struct N4Ingredients {
    pub pmfs: Vec<Pmf>,
    pub tau: Rational,
    pub tau_max: Rational,
    pub tau_max2: Rational,
    pub tau_pair: Rational,
    pub tau_trip: Rational,
    pub tau_subsets: BTreeMap<Vec<usize>, Rational>,
    /// `P_min(y)`.
    pub p_min: Vec<Rational>,
    /// Unnormalized residual `P_i(y) - min{P_i(y), max_{j≠i} P_j(y)}`.
    pub residual_numerators: Vec<Vec<Rational>>,
    /// `N_{R_i} = 1 - Σ_{j≠i} τ_ij + Σ_{j<k; j,k≠i} τ_ijk - τ`.
    pub residual_norms: Vec<Rational>,
    /// Pair mass `T_ij(y)` for each pair in [`PAIRS`].
    pub t: BTreeMap<(usize, usize), Vec<Rational>>,
    /// `N_ij = Σ_y T_ij(y)`.
    pub n: BTreeMap<(usize, usize), Rational>,
}

impl N4Ingredients {
    pub fn tau_of(&self, subset: &[usize]) -> &Rational {
        &self.tau_subsets[subset]
    }

    /// `τ_{jkl}` for the triple that excludes `i`.
    pub fn tau_without(&self, i: usize) -> &Rational {
        let rest: Vec<usize> = (0..4).filter(|&j| j != i).collect();
        self.tau_of(&rest)
    }

    pub fn pair_norm(&self, pair: (usize, usize)) -> &Rational {
        &self.n[&pair]
    }

    /// Capacity of each split: `min{N_12, N_34}`, `min{N_13, N_24}`, `min{N_14, N_23}`.
    pub fn split_capacities(&self) -> [Rational; 3] {
        SPLITS.map(|(a, b)| self.n[&a].clone().min(self.n[&b].clone()))
    }

    pub fn condition_lhs(&self) -> Rational {
        self.split_capacities().iter().sum()
    }

    pub fn condition_rhs(&self) -> Rational {
        &self.tau_max2 - Rational::one()
    }

    pub fn condition_holds(&self) -> bool {
        self.condition_lhs() >= self.condition_rhs()
    }

    /// Normalized residual `R_i`, or `None` when its normalizer is zero.
    pub fn residual(&self, i: usize) -> Option<Pmf> {
        let norm = &self.residual_norms[i];
        if norm.is_zero() {
            return None;
        }
        let mass = self.residual_numerators[i].iter().map(|v| v / norm).collect();
        Pmf::new(self.pmfs[0].alphabet().to_vec(), mass).ok()
    }
}

/// Computes all ingredients and checks their structural invariants exactly.
pub fn n4_ingredients(pmfs: &[Pmf]) -> Result<N4Ingredients> {
    if pmfs.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "the four-marginal construction needs 4 PMFs, got {}",
            pmfs.len()
        )));
    }
    let ch = DiscreteChannel::from_pmfs(pmfs)?;
    let k = ch.n_outputs();
    let col_min = |set: &[usize], y: usize| -> Rational {
        set.iter().map(|&i| &ch.row(i)[y]).min().cloned().unwrap_or_default()
    };
    let mut tau_subsets = BTreeMap::new();
    for size in [2, 3] {
        for s in crate::measures::k_subsets(4, size) {
            let v = tau_subset(&ch, &s)?;
            tau_subsets.insert(s, v);
        }
    }
    let tau = doeblin(&ch);
    let p_min: Vec<Rational> = (0..k).map(|y| col_min(&[0, 1, 2, 3], y)).collect();

    let mut residual_numerators = Vec::with_capacity(4);
    let mut residual_norms = Vec::with_capacity(4);
    for i in 0..4 {
        let others: Vec<usize> = (0..4).filter(|&j| j != i).collect();
        let numer: Vec<Rational> = (0..k)
            .map(|y| {
                let p = &ch.row(i)[y];
                let max_other = others.iter().map(|&j| &ch.row(j)[y]).max().expect("three others");
                p - p.min(max_other)
            })
            .collect();
        let mut norm = Rational::one() - &tau;
        for &j in &others {
            norm -= &tau_subsets[&sorted(&[i, j])];
        }
        for (a, &j) in others.iter().enumerate() {
            for &l in &others[a + 1..] {
                norm += &tau_subsets[&sorted(&[i, j, l])];
            }
        }
        let total: Rational = numer.iter().sum();
        if total != norm {
            return Err(Error::Construction(format!(
                "residual {} sums to {} but its normalizer is {}",
                i + 1,
                fmt_rational(&total),
                fmt_rational(&norm)
            )));
        }
        residual_numerators.push(numer);
        residual_norms.push(norm);
    }

    let mut t = BTreeMap::new();
    let mut n = BTreeMap::new();
    for &(i, j) in &PAIRS {
        let (a, b) = complement((i, j));
        let vals: Vec<Rational> = (0..k)
            .map(|y| {
                col_min(&[i, j], y) - col_min(&sorted(&[i, j, a]), y) - col_min(&sorted(&[i, j, b]), y)
                    + &p_min[y]
            })
            .collect();
        if let Some(y) = vals.iter().position(|v| v.is_negative()) {
            return Err(Error::Construction(format!(
                "T_{}{}({}) is negative",
                i + 1,
                j + 1,
                pmfs[0].alphabet()[y]
            )));
        }
        n.insert((i, j), vals.iter().sum());
        t.insert((i, j), vals);
    }

    Ok(N4Ingredients {
        pmfs: pmfs.to_vec(),
        tau,
        tau_max: tau_max(&ch),
        tau_max2: tau_max2(&ch)?,
        tau_pair: tau_k_sum(&ch, 2)?,
        tau_trip: tau_k_sum(&ch, 3)?,
        tau_subsets,
        p_min,
        residual_numerators,
        residual_norms,
        t,
        n,
    })
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Evaluates `min{N12,N34} + min{N13,N24} + min{N14,N23} >= tau_max2 - 1`.
pub fn n4_condition(pmfs: &[Pmf]) -> Result<(bool, N4Ingredients)> {
    let ing = n4_ingredients(pmfs)?;
    Ok((ing.condition_holds(), ing))
}

/// Mixture weights of the four-marginal construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights {
    /// `α_12, α_13, α_14`, one per split.
    pub alpha: [Rational; 3],
    /// `β_ij` for each pair in [`PAIRS`].
    pub beta: BTreeMap<(usize, usize), Rational>,
    pub abc: (Rational, Rational, Rational),
    /// Weight `1 - tau_max2` on the product of all four residuals (zero once `tau_max2 >= 1`).
    pub residual_product: Rational,
}

impl MixtureWeights {
    /// Sum of every component weight, including the diagonal and single-residual parts.
    pub fn total(&self, ing: &N4Ingredients) -> Rational {
        let singles: Rational = (0..4).map(|i| ing.tau_without(i) - &ing.tau).sum();
        &ing.tau
            + singles
            + self.beta.values().sum::<Rational>()
            + self.alpha.iter().sum::<Rational>()
            + &self.residual_product
    }
}

/// Splits the budget `tau_max2 - 1` across the three splits by greedy water-filling
/// in the order 12|34, 13|24, 14|23.
pub fn choose_abc(ing: &N4Ingredients) -> Result<(Rational, Rational, Rational)> {
    let budget = ing.condition_rhs();
    if !budget.is_positive() {
        return Ok((Rational::one(), Rational::zero(), Rational::zero()));
    }
    let [c1, c2, c3] = ing.split_capacities();
    let a = (c1 / &budget).min(Rational::one());
    let b = (c2 / &budget).min(Rational::one() - &a);
    let c = Rational::one() - &a - &b;
    if &c * &budget > c3 {
        return Err(Error::ConditionFails {
            lhs: Box::new(ing.condition_lhs()),
            rhs: Box::new(budget),
        });
    }
    Ok((a, b, c))
}

fn mixture_weights(ing: &N4Ingredients) -> Result<MixtureWeights> {
    let (a, b, c) = choose_abc(ing)?;
    let budget = ing.condition_rhs();
    let pos_budget = if budget.is_positive() { budget.clone() } else { Rational::zero() };
    let alpha = [&a * &pos_budget, &b * &pos_budget, &c * &pos_budget];
    let mut beta = BTreeMap::new();
    for &pair in &PAIRS {
        let v = &ing.n[&pair] - &alpha[split_of(pair)];
        if v.is_negative() {
            return Err(Error::Construction(format!(
                "beta_{}{} is negative",
                pair.0 + 1,
                pair.1 + 1
            )));
        }
        beta.insert(pair, v);
    }
    let residual_product = if budget.is_negative() { -budget } else { Rational::zero() };
    Ok(MixtureWeights {
        alpha,
        beta,
        abc: (a, b, c),
        residual_product,
    })
}

/// Output of [`build_n4_coupling`].
#[derive(Debug, Clone)]
pub struct N4Coupling {
    pub coupling: Coupling,
    pub ingredients: N4Ingredients,
    pub weights: MixtureWeights,
}

/// Assembles the four-marginal mixture. Components with zero weight are skipped
/// before any normalization, so their undefined fractions are never formed.
pub fn build_n4_coupling(pmfs: &[Pmf]) -> Result<N4Coupling> {
    let ing = n4_ingredients(pmfs)?;
    if !ing.condition_holds() {
        return Err(Error::ConditionFails {
            lhs: Box::new(ing.condition_lhs()),
            rhs: Box::new(ing.condition_rhs()),
        });
    }
    let w = mixture_weights(&ing)?;

    let total = w.total(&ing);
    if !total.is_one() {
        return Err(Error::Construction(format!(
            "mixture weights sum to {}",
            fmt_rational(&total)
        )));
    }
    // Each residual absorbs its singles, the β of pairs avoiding it, and the product term.
    for i in 0..4 {
        let mut lhs = ing.tau_without(i) - &ing.tau + &w.residual_product;
        for (&(a, b), v) in &w.beta {
            if a != i && b != i {
                lhs += v;
            }
        }
        if lhs != ing.residual_norms[i] {
            return Err(Error::Construction(format!(
                "triplet constraint for residual {} fails: {} != {}",
                i + 1,
                fmt_rational(&lhs),
                fmt_rational(&ing.residual_norms[i])
            )));
        }
    }

    let k = pmfs[0].len();
    let ch = DiscreteChannel::from_pmfs(pmfs)?;
    let supports: Vec<Vec<usize>> = ing
        .residual_numerators
        .iter()
        .map(|r| (0..k).filter(|&y| r[y].is_positive()).collect())
        .collect();
    let r = |i: usize, y: usize| -> Result<Rational> {
        let norm = &ing.residual_norms[i];
        if norm.is_zero() {
            return Err(Error::Construction(format!("residual {} used with zero normalizer", i + 1)));
        }
        Ok(&ing.residual_numerators[i][y] / norm)
    };
    let mut mass = BTreeMap::new();

    for y in 0..k {
        add_mass(&mut mass, vec![y; 4], ing.p_min[y].clone());
    }
    // One coordinate drawn from its residual, the other three tied.
    for i in 0..4 {
        if (ing.tau_without(i) - &ing.tau).is_zero() {
            continue;
        }
        let others: Vec<usize> = (0..4).filter(|&j| j != i).collect();
        for y in 0..k {
            let tied = others.iter().map(|&j| &ch.row(j)[y]).min().expect("three") - &ing.p_min[y];
            if tied.is_zero() {
                continue;
            }
            for &yi in &supports[i] {
                let mut t = vec![y; 4];
                t[i] = yi;
                add_mass(&mut mass, t, r(i, yi)? * &tied);
            }
        }
    }
    // A tied pair drawn from T_ij / N_ij, the complementary pair from residuals.
    for (&pair, beta) in &w.beta {
        if beta.is_zero() {
            continue;
        }
        let (k1, k2) = complement(pair);
        let tv = &ing.t[&pair];
        let np = &ing.n[&pair];
        for y in 0..k {
            if tv[y].is_zero() {
                continue;
            }
            let base = beta * &tv[y] / np;
            for &a in &supports[k1] {
                for &b in &supports[k2] {
                    let mut t = vec![y; 4];
                    t[k1] = a;
                    t[k2] = b;
                    add_mass(&mut mass, t, &base * r(k1, a)? * r(k2, b)?);
                }
            }
        }
    }
    // Both pairs of a split tied, each at its own symbol.
    for (s, &(p, q)) in SPLITS.iter().enumerate() {
        let alpha = &w.alpha[s];
        if alpha.is_zero() {
            continue;
        }
        for y in 0..k {
            if ing.t[&p][y].is_zero() {
                continue;
            }
            for y2 in 0..k {
                if ing.t[&q][y2].is_zero() {
                    continue;
                }
                let mut t = vec![0; 4];
                t[p.0] = y;
                t[p.1] = y;
                t[q.0] = y2;
                t[q.1] = y2;
                let v = alpha * &ing.t[&p][y] / &ing.n[&p] * &ing.t[&q][y2] / &ing.n[&q];
                add_mass(&mut mass, t, v);
            }
        }
    }
    if w.residual_product.is_positive() {
        let mut err = None;
        for_each_product(&supports, |vals| {
            let mut v = w.residual_product.clone();
            for (i, &y) in vals.iter().enumerate() {
                match r(i, y) {
                    Ok(x) => v *= x,
                    Err(e) => err = Some(e),
                }
            }
            add_mass(&mut mass, vals.to_vec(), v);
        });
        if let Some(e) = err {
            return Err(e);
        }
    }

    let coupling = Coupling::new(pmfs.to_vec(), mass)?;
    Ok(N4Coupling {
        coupling,
        ingredients: ing,
        weights: w,
    })
}

/// First place where the intersection property fails.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionViolation {
    pub coords: Vec<usize>,
    pub symbol: usize,
    pub got: Rational,
    pub expected: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionCheck {
    pub holds: bool,
    pub counterexample: Option<IntersectionViolation>,
}

/// Checks `P(∩_{i ∈ I} {Y_i = y}) = min_{i ∈ I} P_i(y)` for all `|I| >= 2` and all `y`.
pub fn verify_intersection_property(c: &Coupling, pmfs: &[Pmf]) -> IntersectionCheck {
    let m = c.arity();
    let k = c.alphabet().len();
    let ok = IntersectionCheck {
        holds: true,
        counterexample: None,
    };
    if pmfs.len() != m || m >= usize::BITS as usize {
        return IntersectionCheck {
            holds: false,
            counterexample: None,
        };
    }
    // table[y][mask]: mass of tuples whose coordinates equal to y are exactly `mask`.
    let masks = 1usize << m;
    let mut table = vec![vec![Rational::zero(); masks]; k];
    for (t, w) in c.mass() {
        let mut seen: Vec<usize> = Vec::new();
        for &y in t {
            if seen.contains(&y) {
                continue;
            }
            seen.push(y);
            let mask = t
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == y)
                .fold(0usize, |acc, (i, _)| acc | (1 << i));
            table[y][mask] += w;
        }
    }
    for subset in 1..masks {
        if subset.count_ones() < 2 {
            continue;
        }
        let coords: Vec<usize> = (0..m).filter(|i| subset & (1 << i) != 0).collect();
        for y in 0..k {
            let got: Rational = (0..masks)
                .filter(|mask| mask & subset == subset)
                .map(|mask| &table[y][mask])
                .sum();
            let expected = coords
                .iter()
                .map(|&i| pmfs[i].get(y))
                .min()
                .cloned()
                .unwrap_or_default();
            if got != expected {
                return IntersectionCheck {
                    holds: false,
                    counterexample: Some(IntersectionViolation {
                        coords,
                        symbol: y,
                        got,
                        expected,
                    }),
                };
            }
        }
    }
    ok
}

/// Which closed form produced a minimal coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    Diagonal,
    MaximalPair,
    FourMarginal,
    Layered,
}

/// Minimal coupling from the closed forms, after merging identical marginals.
///
/// Identical marginals are coupled as exact copies, so the conditions are checked on
/// the distinct PMFs only. The result always has diagonal mass `min_i P_i(y)`.
pub fn closed_form_minimal_coupling(pmfs: &[Pmf]) -> Result<(Coupling, ClosedForm)> {
    let mut distinct: Vec<Pmf> = Vec::new();
    let mut map = Vec::with_capacity(pmfs.len());
    for p in pmfs {
        match distinct.iter().position(|d| d == p) {
            Some(i) => map.push(i),
            None => {
                map.push(distinct.len());
                distinct.push(p.clone());
            }
        }
    }
    let (base, form) = match distinct.len() {
        0 => return Err(Error::InvalidParameter("no marginals".into())),
        1 => (layered_coupling(&distinct)?, ClosedForm::Diagonal),
        2 => (maximal_coupling_pair(&distinct[0], &distinct[1])?, ClosedForm::MaximalPair),
        4 if n4_ingredients(&distinct)?.condition_holds() => {
            (build_n4_coupling(&distinct)?.coupling, ClosedForm::FourMarginal)
        }
        _ => (layered_coupling(&distinct)?, ClosedForm::Layered),
    };
    Ok((base.expand(&map, pmfs.to_vec())?, form))
}
