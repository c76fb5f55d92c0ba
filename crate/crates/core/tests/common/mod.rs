//! Strategies and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use maxleak::rational::{int, rat, Rational};
use maxleak::{DiscreteChannel, Pmf};
use num_traits::Zero;
use proptest::prelude::*;

/// Masses from small integer weights; at least one weight is positive.
pub fn masses_from(weights: &[u32]) -> Vec<Rational> {
    let mut w: Vec<i64> = weights.iter().map(|&v| v as i64).collect();
    if w.iter().all(|&v| v == 0) {
        w[0] = 1;
    }
    let total: i64 = w.iter().sum();
    w.into_iter().map(|v| rat(v, total)).collect()
}

pub fn pmf_strategy(k: usize) -> impl Strategy<Value = Pmf> {
    prop::collection::vec(0u32..6, k).prop_map(|w| Pmf::from_masses(masses_from(&w)).unwrap())
}

pub fn family_strategy(m: usize, k: usize) -> impl Strategy<Value = Vec<Pmf>> {
    prop::collection::vec(pmf_strategy(k), m)
}

/// Family of `m` PMFs over `k` symbols with sizes drawn from the given ranges.
pub fn sized_family(m: std::ops::RangeInclusive<usize>, k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Pmf>> {
    (m, k).prop_flat_map(|(m, k)| family_strategy(m, k))
}

pub fn channel(pmfs: &[Pmf]) -> DiscreteChannel {
    DiscreteChannel::from_pmfs(pmfs).unwrap()
}

pub fn rows(pmfs: &[Pmf]) -> Vec<Vec<Rational>> {
    pmfs.iter().map(|p| p.masses().to_vec()).collect()
}

/// Column-wise sort, largest first, written out independently of the library.
pub fn sorted_column(rows: &[Vec<Rational>], y: usize) -> Vec<Rational> {
    let mut col: Vec<Rational> = rows.iter().map(|r| r[y].clone()).collect();
    col.sort_by(|a, b| b.cmp(a));
    col
}

pub fn oracle_rank_sum(rows: &[Vec<Rational>], rank: usize) -> Rational {
    (0..rows[0].len()).map(|y| sorted_column(rows, y)[rank].clone()).sum()
}

pub fn total_variation(p: &[Rational], q: &[Rational]) -> Rational {
    let s: Rational = p.iter().zip(q).map(|(a, b)| if a > b { a - b } else { b - a }).sum();
    s / int(2)
}

/// Mass of coordinate `i` at symbol `y`, summed over an explicit coupling table.
pub fn coordinate_marginals(mass: &BTreeMap<Vec<usize>, Rational>, m: usize, k: usize) -> Vec<Vec<Rational>> {
    let mut out = vec![vec![Rational::zero(); k]; m];
    for (t, w) in mass {
        for (i, &y) in t.iter().enumerate() {
            out[i][y] += w;
        }
    }
    out
}

/// Union mass by definition: for every symbol, the mass of tuples hitting it.
pub fn union_by_definition(mass: &BTreeMap<Vec<usize>, Rational>, k: usize) -> Rational {
    (0..k)
        .map(|y| mass.iter().filter(|(t, _)| t.contains(&y)).map(|(_, w)| w).sum::<Rational>())
        .sum()
}
