//! Simultaneous coupling of joint PMFs `P_{X_i, Y_i}` whose `Y` part is a minimal
//! union coupling.
//!
//! The coupling is the mixture `c_XY·G1 + (c_Y − c_XY)·G2 + (1 − c_Y)·G3`:
//! `G1` ties every coordinate, `G2` ties the `Y` coordinates and draws each `X_i`
//! from a conditional residual, and `G3` draws `Y` from the excess of a minimal
//! `Y`-coupling over its diagonal and each `X_i` from its conditional residual.
//! It is stored in that factored form; [`SimulCoupling::materialize`] expands it.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::constructions::{closed_form_minimal_coupling, n4_ingredients, ClosedForm};
use crate::coupling::{distinct_count, for_each_product, product_size, Coupling, Tuple};
use crate::error::{Error, Result};
use crate::lp::min_union_coupling_diag;
use crate::measures::{tau_max, tau_max2, DiscreteChannel, Pmf};
use crate::rational::{fmt_rational, Rational};

/// Exact joint PMF over `X × Y`, stored as `mass[x][y]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointPmf {
    x_alphabet: Vec<String>,
    y_alphabet: Vec<String>,
    mass: Vec<Vec<Rational>>,
}

impl JointPmf {
    pub fn new(x_alphabet: Vec<String>, y_alphabet: Vec<String>, mass: Vec<Vec<Rational>>) -> Result<Self> {
        if x_alphabet.is_empty() || y_alphabet.is_empty() {
            return Err(Error::InvalidPmf("joint PMF needs non-empty alphabets".into()));
        }
        if mass.len() != x_alphabet.len() || mass.iter().any(|r| r.len() != y_alphabet.len()) {
            return Err(Error::InvalidPmf(format!(
                "joint mass table must be {}x{}",
                x_alphabet.len(),
                y_alphabet.len()
            )));
        }
        let mut total = Rational::zero();
        for (x, row) in mass.iter().enumerate() {
            for (y, v) in row.iter().enumerate() {
                if v.is_negative() {
                    return Err(Error::InvalidPmf(format!(
                        "negative mass {} at ({}, {})",
                        fmt_rational(v),
                        x_alphabet[x],
                        y_alphabet[y]
                    )));
                }
                total += v;
            }
        }
        if !total.is_one() {
            return Err(Error::InvalidPmf(format!("joint masses sum to {}", fmt_rational(&total))));
        }
        Ok(Self {
            x_alphabet,
            y_alphabet,
            mass,
        })
    }

    pub fn x_alphabet(&self) -> &[String] {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &[String] {
        &self.y_alphabet
    }

    pub fn get(&self, x: usize, y: usize) -> &Rational {
        &self.mass[x][y]
    }

    pub fn table(&self) -> &[Vec<Rational>] {
        &self.mass
    }

    pub fn y_marginal(&self) -> Pmf {
        let mass = (0..self.y_alphabet.len())
            .map(|y| self.mass.iter().map(|r| &r[y]).sum())
            .collect();
        Pmf::new(self.y_alphabet.clone(), mass).expect("marginal of a valid joint")
    }

    pub fn x_marginal(&self) -> Pmf {
        let mass = self.mass.iter().map(|r| r.iter().sum()).collect();
        Pmf::new(self.x_alphabet.clone(), mass).expect("marginal of a valid joint")
    }
}

/// Where the minimal `Y`-coupling ingredient comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngredientSource {
    /// Closed forms, after merging identical marginals.
    #[default]
    Auto,
    /// The exact LP with diagonal floor `P(y, …, y) >= min_i P_i(y)`.
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngredientKind {
    ClosedForm(ClosedForm),
    Lp,
}

/// One `(x^m, y^m)` atom of a materialized coupling.
pub type Atom = (Tuple, Tuple);

#[derive(Debug, Clone)]
pub struct SimulCoupling {
    sources: Vec<JointPmf>,
    c_xy: Rational,
    c_y: Rational,
    p_min: Vec<Vec<Rational>>,
    p_y_min: Vec<Rational>,
    g2_weight: Vec<Rational>,
    // residual[i][y]: conditional residual r_i(· | y), absent where its normalizer is 0.
    residual: Vec<Vec<Option<Vec<Rational>>>>,
    ingredient: Coupling,
    ingredient_kind: IngredientKind,
    // (1 − c_Y)·H: ingredient mass minus the diagonal floor.
    excess: BTreeMap<Tuple, Rational>,
}

/// Checks that the `Y`-marginals admit a minimal coupling reaching `tau_max`.
///
/// Identical marginals are merged first. The test passes for at most two distinct
/// marginals, for `tau_max2 <= 1`, and for four distinct marginals satisfying the
/// four-marginal pairwise condition.
pub fn coupling_hypothesis(pmfs: &[Pmf]) -> Result<()> {
    let mut distinct: Vec<Pmf> = Vec::new();
    for p in pmfs {
        if !distinct.contains(p) {
            distinct.push(p.clone());
        }
    }
    if distinct.len() <= 2 {
        return Ok(());
    }
    let second = tau_max2(&DiscreteChannel::from_pmfs(&distinct)?)?;
    if second <= Rational::one() {
        return Ok(());
    }
    if distinct.len() == 4 && n4_ingredients(&distinct)?.condition_holds() {
        return Ok(());
    }
    Err(Error::Precondition {
        name: "tau_max2 of the Y-marginals <= 1".into(),
        value: second,
    })
}

pub fn build_simultaneous_coupling(sources: &[JointPmf], ingredient: IngredientSource) -> Result<SimulCoupling> {
    let Some(first) = sources.first() else {
        return Err(Error::InvalidParameter("no sources".into()));
    };
    for (i, s) in sources.iter().enumerate() {
        if s.x_alphabet != first.x_alphabet || s.y_alphabet != first.y_alphabet {
            return Err(Error::AlphabetMismatch(format!("source {i} differs from source 0")));
        }
    }
    let nx = first.x_alphabet.len();
    let ny = first.y_alphabet.len();
    let y_marginals: Vec<Pmf> = sources.iter().map(JointPmf::y_marginal).collect();
    coupling_hypothesis(&y_marginals)?;

    let p_min: Vec<Vec<Rational>> = (0..nx)
        .map(|x| {
            (0..ny)
                .map(|y| sources.iter().map(|s| &s.mass[x][y]).min().cloned().expect("non-empty"))
                .collect()
        })
        .collect();
    let p_y_min: Vec<Rational> = (0..ny)
        .map(|y| y_marginals.iter().map(|p| p.get(y)).min().cloned().expect("non-empty"))
        .collect();
    let col_min: Vec<Rational> = (0..ny).map(|y| p_min.iter().map(|r| &r[y]).sum()).collect();
    let c_xy: Rational = col_min.iter().sum();
    let c_y: Rational = p_y_min.iter().sum();
    let g2_weight: Vec<Rational> = (0..ny).map(|y| &p_y_min[y] - &col_min[y]).collect();

    let residual = sources
        .iter()
        .zip(&y_marginals)
        .map(|(s, py)| {
            (0..ny)
                .map(|y| {
                    let norm = py.get(y) - &col_min[y];
                    if norm.is_zero() {
                        return None;
                    }
                    Some((0..nx).map(|x| (&s.mass[x][y] - &p_min[x][y]) / &norm).collect())
                })
                .collect()
        })
        .collect();

    let (coupling, kind) = match ingredient {
        IngredientSource::Auto => {
            let (c, form) = closed_form_minimal_coupling(&y_marginals)?;
            (c, IngredientKind::ClosedForm(form))
        }
        IngredientSource::Lp if sources.len() == 1 => {
            let (c, form) = closed_form_minimal_coupling(&y_marginals)?;
            (c, IngredientKind::ClosedForm(form))
        }
        IngredientSource::Lp => (min_union_coupling_diag(&y_marginals)?.witness, IngredientKind::Lp),
    };
    let target = tau_max(&DiscreteChannel::from_pmfs(&y_marginals)?);
    let got = coupling.union_mass();
    if got != target {
        return Err(Error::Construction(format!(
            "Y-coupling has union mass {} but tau_max is {}",
            fmt_rational(&got),
            fmt_rational(&target)
        )));
    }
    let mut excess = coupling.mass().clone();
    for (y, floor) in p_y_min.iter().enumerate() {
        if floor.is_zero() {
            continue;
        }
        let key = vec![y; sources.len()];
        let entry = excess.entry(key).or_default();
        *entry -= floor;
        if entry.is_negative() {
            return Err(Error::Construction(format!(
                "Y-coupling diagonal at `{}` is below the minimum marginal; a diagonal-constrained ingredient is required",
                first.y_alphabet[y]
            )));
        }
    }
    excess.retain(|_, w| !w.is_zero());

    Ok(SimulCoupling {
        sources: sources.to_vec(),
        c_xy,
        c_y,
        p_min,
        p_y_min,
        g2_weight,
        residual,
        ingredient: coupling,
        ingredient_kind: kind,
        excess,
    })
}

impl SimulCoupling {
    pub fn sources(&self) -> &[JointPmf] {
        &self.sources
    }

    pub fn arity(&self) -> usize {
        self.sources.len()
    }

    pub fn c_xy(&self) -> &Rational {
        &self.c_xy
    }

    pub fn c_y(&self) -> &Rational {
        &self.c_y
    }

    /// Weights of `G1`, `G2`, `G3`.
    pub fn mixture_weights(&self) -> [Rational; 3] {
        [
            self.c_xy.clone(),
            &self.c_y - &self.c_xy,
            Rational::one() - &self.c_y,
        ]
    }

    pub fn p_min(&self, x: usize, y: usize) -> &Rational {
        &self.p_min[x][y]
    }

    pub fn p_y_min(&self, y: usize) -> &Rational {
        &self.p_y_min[y]
    }

    /// The minimal `Y`-coupling the construction was built on.
    pub fn ingredient(&self) -> &Coupling {
        &self.ingredient
    }

    pub fn ingredient_kind(&self) -> IngredientKind {
        self.ingredient_kind
    }

    fn r(&self, i: usize, x: usize, y: usize) -> Rational {
        self.residual[i][y]
            .as_ref()
            .map(|r| r[x].clone())
            .unwrap_or_default()
    }

    fn r_support(&self, i: usize, y: usize) -> Result<Vec<usize>> {
        match &self.residual[i][y] {
            Some(r) => Ok((0..r.len()).filter(|&x| r[x].is_positive()).collect()),
            None => Err(Error::Construction(format!(
                "conditional residual of source {i} at `{}` is used with zero normalizer",
                self.sources[0].y_alphabet[y]
            ))),
        }
    }

    /// `Σ_x Π_i r_i(x | y_i)`: probability that independent residual draws all agree.
    fn residual_agreement(&self, ys: &[usize]) -> Rational {
        (0..self.sources[0].x_alphabet.len())
            .map(|x| {
                ys.iter()
                    .enumerate()
                    .map(|(i, &y)| self.r(i, x, y))
                    .product::<Rational>()
            })
            .sum()
    }

    /// `Σ_y P(∪_i {Y_i = y})` under the coupling.
    pub fn y_union_mass(&self) -> Rational {
        let tied = &self.c_y;
        let spread: Rational = self
            .excess
            .iter()
            .map(|(t, w)| w * Rational::from_integer(distinct_count(t).into()))
            .sum();
        tied + spread
    }

    /// `Σ_v P(X_1 = ⋯ = X_m, ∪_j {Y_j = v})` under the coupling.
    pub fn f_quantity(&self) -> Rational {
        let m = self.arity();
        let mut f = self.c_xy.clone();
        for (y, w) in self.g2_weight.iter().enumerate() {
            if w.is_positive() {
                f += w * self.residual_agreement(&vec![y; m]);
            }
        }
        for (t, w) in &self.excess {
            f += w * Rational::from_integer(distinct_count(t).into()) * self.residual_agreement(t);
        }
        f
    }

    /// Number of atoms [`SimulCoupling::materialize`] would enumerate (an upper bound).
    pub fn atom_count(&self) -> u128 {
        let m = self.arity();
        let nx = self.sources[0].x_alphabet.len();
        let support = |i: usize, y: usize| -> Vec<usize> { self.r_support(i, y).unwrap_or_default() };
        let mut n = (nx * self.p_y_min.len()) as u128;
        for (y, w) in self.g2_weight.iter().enumerate() {
            if w.is_positive() {
                let sets: Vec<Vec<usize>> = (0..m).map(|i| support(i, y)).collect();
                n += product_size(&sets);
            }
        }
        for t in self.excess.keys() {
            let sets: Vec<Vec<usize>> = t.iter().enumerate().map(|(i, &y)| support(i, y)).collect();
            n += product_size(&sets);
        }
        n
    }

    /// Expands the mixture into explicit `(x^m, y^m)` atoms.
    pub fn materialize(&self, limit: usize) -> Result<BTreeMap<Atom, Rational>> {
        let needed = self.atom_count();
        if needed > limit as u128 {
            return Err(Error::Capacity {
                what: "simultaneous coupling atoms".into(),
                needed,
                limit,
            });
        }
        let m = self.arity();
        let mut out: BTreeMap<Atom, Rational> = BTreeMap::new();
        let mut put = |xs: Tuple, ys: Tuple, w: Rational| {
            if !w.is_zero() {
                *out.entry((xs, ys)).or_default() += w;
            }
        };
        for (x, row) in self.p_min.iter().enumerate() {
            for (y, w) in row.iter().enumerate() {
                put(vec![x; m], vec![y; m], w.clone());
            }
        }
        for (y, w) in self.g2_weight.iter().enumerate() {
            if !w.is_positive() {
                continue;
            }
            let sets = (0..m).map(|i| self.r_support(i, y)).collect::<Result<Vec<_>>>()?;
            for_each_product(&sets, |xs| {
                let v: Rational = xs.iter().enumerate().map(|(i, &x)| self.r(i, x, y)).product();
                put(xs.to_vec(), vec![y; m], w * v);
            });
        }
        for (t, w) in &self.excess {
            let sets = t
                .iter()
                .enumerate()
                .map(|(i, &y)| self.r_support(i, y))
                .collect::<Result<Vec<_>>>()?;
            for_each_product(&sets, |xs| {
                let v: Rational = xs
                    .iter()
                    .zip(t)
                    .enumerate()
                    .map(|(i, (&x, &y))| self.r(i, x, y))
                    .product();
                put(xs.to_vec(), t.clone(), w * v);
            });
        }
        Ok(out)
    }

    /// Exact checks on the factored form: every `P_{X_i, Y_i}` is reproduced and the
    /// mixture weights are a probability vector.
    pub fn verify(&self) -> Result<()> {
        if self.c_xy > self.c_y || self.c_y > Rational::one() || self.c_xy.is_negative() {
            return Err(Error::Construction(format!(
                "mixture constants out of order: c_XY = {}, c_Y = {}",
                fmt_rational(&self.c_xy),
                fmt_rational(&self.c_y)
            )));
        }
        let nx = self.sources[0].x_alphabet.len();
        let ny = self.p_y_min.len();
        for i in 0..self.arity() {
            // Mass the excess part assigns to Y_i = y.
            let mut excess_marginal = vec![Rational::zero(); ny];
            for (t, w) in &self.excess {
                excess_marginal[t[i]] += w;
            }
            for y in 0..ny {
                for x in 0..nx {
                    let r = self.r(i, x, y);
                    let got = &self.p_min[x][y] + &self.g2_weight[y] * &r + &excess_marginal[y] * &r;
                    let want = &self.sources[i].mass[x][y];
                    if &got != want {
                        return Err(Error::Construction(format!(
                            "source {i} at ({}, {}) is {}, expected {}",
                            self.sources[i].x_alphabet[x],
                            self.sources[i].y_alphabet[y],
                            fmt_rational(&got),
                            fmt_rational(want)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Marginal of materialized atoms onto the `Y` coordinates.
pub fn y_marginalization(atoms: &BTreeMap<Atom, Rational>) -> BTreeMap<Tuple, Rational> {
    let mut out: BTreeMap<Tuple, Rational> = BTreeMap::new();
    for ((_, ys), w) in atoms {
        *out.entry(ys.clone()).or_default() += w;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn labels(n: usize) -> Vec<String> {
        crate::measures::default_alphabet(n)
    }

    fn joint(rows: &[&[(i64, i64)]]) -> JointPmf {
        let mass = rows
            .iter()
            .map(|r| r.iter().map(|&(n, d)| rat(n, d)).collect())
            .collect();
        JointPmf::new(labels(rows.len()), labels(rows[0].len()), mass).unwrap()
    }

    #[test]
    fn identical_sources_are_fully_tied() {
        let j = joint(&[&[(1, 4), (1, 4)], &[(1, 8), (3, 8)]]);
        let c = build_simultaneous_coupling(&[j.clone(), j.clone(), j], IngredientSource::Auto).unwrap();
        assert_eq!(c.c_xy(), &int(1));
        assert_eq!(c.c_y(), &int(1));
        assert_eq!(c.y_union_mass(), int(1));
        assert_eq!(c.f_quantity(), int(1));
        let atoms = c.materialize(1000).unwrap();
        assert!(atoms.keys().all(|(xs, ys)| xs.iter().all(|&x| x == xs[0]) && ys.iter().all(|&y| y == ys[0])));
    }

    #[test]
    fn pair_matches_tau_max() {
        let a = joint(&[&[(1, 2), (0, 1)], &[(1, 4), (1, 4)]]);
        let b = joint(&[&[(1, 8), (1, 8)], &[(1, 4), (1, 2)]]);
        let c = build_simultaneous_coupling(&[a.clone(), b.clone()], IngredientSource::Auto).unwrap();
        c.verify().unwrap();
        let ch = DiscreteChannel::from_pmfs(&[a.y_marginal(), b.y_marginal()]).unwrap();
        assert_eq!(c.y_union_mass(), tau_max(&ch));
        assert!(c.f_quantity() >= *c.c_xy());
        let atoms = c.materialize(1000).unwrap();
        assert_eq!(&y_marginalization(&atoms), c.ingredient().mass());
    }

    #[test]
    fn rejects_rotating_halves() {
        let rows: [&[(i64, i64)]; 3] = [&[(1, 2), (1, 2), (0, 1)], &[(0, 1), (1, 2), (1, 2)], &[(1, 2), (0, 1), (1, 2)]];
        let sources: Vec<JointPmf> = rows.iter().map(|r| joint(&[r])).collect();
        let err = build_simultaneous_coupling(&sources, IngredientSource::Auto).unwrap_err();
        assert!(matches!(err, Error::Precondition { ref value, .. } if *value == rat(3, 2)), "{err}");
    }

    #[test]
    fn materialize_guard() {
        let a = joint(&[&[(1, 2), (0, 1)], &[(1, 4), (1, 4)]]);
        let b = joint(&[&[(1, 8), (1, 8)], &[(1, 4), (1, 2)]]);
        let c = build_simultaneous_coupling(&[a, b], IngredientSource::Lp).unwrap();
        assert!(matches!(c.materialize(1), Err(Error::Capacity { .. })));
    }
}
