//! Joint distributions over `m` copies of one alphabet with declared marginals.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::measures::{DiscreteChannel, Pmf};
use crate::rational::{fmt_rational, Rational};

/// Tuple of symbol indices, one per coordinate.
pub type Tuple = Vec<usize>;

/// A coupling of `m` PMFs over a shared alphabet, stored sparsely.
///
/// Construction through [`Coupling::new`] checks nonnegativity, normalization and
/// every declared marginal exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coupling {
    marginals: Vec<Pmf>,
    mass: BTreeMap<Tuple, Rational>,
}

impl Coupling {
    pub fn new(marginals: Vec<Pmf>, mass: BTreeMap<Tuple, Rational>) -> Result<Self> {
        let c = Self::from_parts(marginals, mass)?;
        c.check()?;
        Ok(c)
    }

    /// Builds without the exact checks. Zero entries are dropped.
    pub(crate) fn from_parts(marginals: Vec<Pmf>, mut mass: BTreeMap<Tuple, Rational>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidParameter("coupling needs at least one marginal".into()));
        }
        DiscreteChannel::from_pmfs(&marginals)?;
        mass.retain(|_, w| !w.is_zero());
        Ok(Self { marginals, mass })
    }

    /// The product of the marginals.
    pub fn independent(marginals: Vec<Pmf>) -> Result<Self> {
        let mut mass = BTreeMap::new();
        let supports: Vec<Vec<usize>> = marginals.iter().map(|p| p.support().collect()).collect();
        for_each_product(&supports, |t| {
            let w: Rational = t
                .iter()
                .zip(&marginals)
                .map(|(&y, p)| p.get(y).clone())
                .product();
            mass.insert(t.to_vec(), w);
        });
        Self::new(marginals, mass)
    }

    /// Exact invariant check: masses nonnegative, total one, marginals as declared.
    pub fn check(&self) -> Result<()> {
        let k = self.alphabet().len();
        let mut total = Rational::zero();
        let mut sums = vec![vec![Rational::zero(); k]; self.arity()];
        for (t, w) in &self.mass {
            if t.len() != self.arity() || t.iter().any(|&y| y >= k) {
                return Err(Error::Construction(format!("malformed tuple {t:?}")));
            }
            if w.is_negative() {
                return Err(Error::Construction(format!(
                    "negative mass {} at tuple {t:?}",
                    fmt_rational(w)
                )));
            }
            total += w;
            for (i, &y) in t.iter().enumerate() {
                sums[i][y] += w;
            }
        }
        if !total.is_one() {
            return Err(Error::Construction(format!(
                "coupling mass sums to {}",
                fmt_rational(&total)
            )));
        }
        for (i, (got, p)) in sums.iter().zip(&self.marginals).enumerate() {
            if let Some(y) = (0..k).find(|&y| got[y] != *p.get(y)) {
                return Err(Error::Construction(format!(
                    "marginal {i} at `{}` is {}, expected {}",
                    p.alphabet()[y],
                    fmt_rational(&got[y]),
                    fmt_rational(p.get(y))
                )));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.marginals.len()
    }

    pub fn alphabet(&self) -> &[String] {
        self.marginals[0].alphabet()
    }

    pub fn marginals(&self) -> &[Pmf] {
        &self.marginals
    }

    /// Nonzero entries in lexicographic tuple order.
    pub fn mass(&self) -> &BTreeMap<Tuple, Rational> {
        &self.mass
    }

    pub fn get(&self, tuple: &[usize]) -> Rational {
        self.mass.get(tuple).cloned().unwrap_or_default()
    }

    pub fn diagonal_mass(&self, y: usize) -> Rational {
        self.get(&vec![y; self.arity()])
    }

    /// `Σ_y P(∪_i {Y_i = y})`.
    pub fn union_mass(&self) -> Rational {
        union_mass(self)
    }

    /// `P(∩_{i ∈ coords} {Y_i = y})`.
    pub fn intersection_mass(&self, coords: &[usize], y: usize) -> Rational {
        self.mass
            .iter()
            .filter(|(t, _)| coords.iter().all(|&i| t[i] == y))
            .map(|(_, w)| w)
            .sum()
    }

    /// Copies coordinates: output coordinate `j` is input coordinate `map[j]`.
    pub(crate) fn expand(&self, map: &[usize], marginals: Vec<Pmf>) -> Result<Coupling> {
        let mass = self
            .mass
            .iter()
            .map(|(t, w)| (map.iter().map(|&i| t[i]).collect(), w.clone()))
            .collect();
        Coupling::from_parts(marginals, mass)
    }
}

/// Number of distinct values in a tuple.
pub fn distinct_count(t: &[usize]) -> usize {
    let mut seen: Vec<usize> = Vec::with_capacity(t.len());
    for &y in t {
        if !seen.contains(&y) {
            seen.push(y);
        }
    }
    seen.len()
}

/// `Σ_y P(∪_i {Y_i = y})`, computed as the expected number of distinct coordinate values.
///
/// Each distinct value `y` in a tuple triggers the event `∪_i {Y_i = y}` exactly once,
/// which is what makes the minimal-union problem linear in the tuple masses.
pub fn union_mass(c: &Coupling) -> Rational {
    c.mass
        .iter()
        .map(|(t, w)| w * Rational::from_integer(distinct_count(t).into()))
        .sum()
}

/// Calls `f` on every tuple of the cartesian product of `sets`, lexicographically.
pub(crate) fn for_each_product(sets: &[Vec<usize>], mut f: impl FnMut(&[usize])) {
    if sets.iter().any(|s| s.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; sets.len()];
    let mut cur: Vec<usize> = sets.iter().map(|s| s[0]).collect();
    loop {
        f(&cur);
        let mut pos = sets.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sets[pos].len() {
                cur[pos] = sets[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            cur[pos] = sets[pos][0];
        }
    }
}

pub(crate) fn product_size(sets: &[Vec<usize>]) -> u128 {
    sets.iter().map(|s| s.len() as u128).product()
}

pub(crate) fn add_mass(mass: &mut BTreeMap<Tuple, Rational>, t: Tuple, w: Rational) {
    if w.is_zero() {
        return;
    }
    *mass.entry(t).or_default() += w;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn pmf(v: &[(i64, i64)]) -> Pmf {
        Pmf::from_masses(v.iter().map(|&(n, d)| rat(n, d)).collect()).unwrap()
    }

    #[test]
    fn diagonal_of_identical_marginals() {
        let p = pmf(&[(1, 3), (2, 3)]);
        let mut mass = BTreeMap::new();
        mass.insert(vec![0, 0, 0], rat(1, 3));
        mass.insert(vec![1, 1, 1], rat(2, 3));
        let c = Coupling::new(vec![p.clone(), p.clone(), p], mass).unwrap();
        assert_eq!(c.union_mass(), int(1));
        assert_eq!(c.diagonal_mass(1), rat(2, 3));
        assert_eq!(c.intersection_mass(&[0, 2], 0), rat(1, 3));
    }

    #[test]
    fn independent_disjoint() {
        let c = Coupling::independent(vec![pmf(&[(1, 1), (0, 1)]), pmf(&[(0, 1), (1, 1)])]).unwrap();
        assert_eq!(c.union_mass(), int(2));
        assert_eq!(c.mass().len(), 1);
    }

    #[test]
    fn rejects_wrong_marginal() {
        let p = pmf(&[(1, 2), (1, 2)]);
        let mut mass = BTreeMap::new();
        mass.insert(vec![0, 0], int(1));
        let err = Coupling::new(vec![p.clone(), p], mass).unwrap_err();
        assert!(err.to_string().contains("marginal 0"), "{err}");
    }

    #[test]
    fn rejects_negative_mass() {
        let p = pmf(&[(1, 2), (1, 2)]);
        let mut mass = BTreeMap::new();
        mass.insert(vec![0, 0], int(1));
        mass.insert(vec![1, 1], int(1));
        mass.insert(vec![0, 1], rat(-1, 2));
        mass.insert(vec![1, 0], rat(-1, 2));
        let err = Coupling::new(vec![p.clone(), p], mass).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
    }

    #[test]
    fn product_enumeration_order() {
        let mut seen = Vec::new();
        for_each_product(&[vec![0, 2], vec![1], vec![3, 4]], |t| seen.push(t.to_vec()));
        assert_eq!(
            seen,
            vec![vec![0, 1, 3], vec![0, 1, 4], vec![2, 1, 3], vec![2, 1, 4]]
        );
        let mut none = 0;
        for_each_product(&[vec![0], vec![]], |_| none += 1);
        assert_eq!(none, 0);
        assert_eq!(distinct_count(&[3, 1, 3, 1]), 2);
    }
}
