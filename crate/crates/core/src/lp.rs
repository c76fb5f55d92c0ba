//! Exact LP oracle for the minimal-union coupling problem.
//!
//! Variables are the tuple masses `P(y_1, …, y_m)` enumerated lexicographically
//! over the marginals' supports.
//! The objective coefficient of a tuple is its number of distinct coordinates,
//! because `Σ_y P(∪_i {Y_i = y})` counts each distinct value of a tuple once.
//! Constraints fix each coordinate's marginal.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::coupling::{distinct_count, Coupling, Tuple};
use crate::error::{Error, Result};
use crate::measures::{tau_max, DiscreteChannel, Pmf};
use crate::rational::{int, Rational};
use crate::simplex::{Solution, StandardForm};

/// Default cap on LP variables (`|Y|^m`).
pub const DEFAULT_MAX_VARIABLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub optimal_value: Rational,
    pub witness: Coupling,
    pub achieves_tau_max: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_variables: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_variables: DEFAULT_MAX_VARIABLES,
        }
    }
}

/// Minimizes `Σ_y P(∪_i {Y_i = y})` over all couplings of `marginals`.
pub fn min_union_coupling(marginals: &[Pmf]) -> Result<LpResult> {
    solve(marginals, false, LpOptions::default())
}

/// Same LP with the extra constraints `P(y, …, y) >= min_i P_i(y)`.
pub fn min_union_coupling_diag(marginals: &[Pmf]) -> Result<LpResult> {
    solve(marginals, true, LpOptions::default())
}

pub fn min_union_coupling_with(marginals: &[Pmf], diagonal_floor: bool, opts: LpOptions) -> Result<LpResult> {
    solve(marginals, diagonal_floor, opts)
}

fn solve(marginals: &[Pmf], diagonal_floor: bool, opts: LpOptions) -> Result<LpResult> {
    let m = marginals.len();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 marginals, got {m}")));
    }
    let channel = DiscreteChannel::from_pmfs(marginals)?;
    let k = channel.n_outputs();
    let needed = (k as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > opts.max_variables as u128 {
        return Err(Error::Capacity {
            what: "coupling LP variables".into(),
            needed,
            limit: opts.max_variables,
        });
    }

    let floor: Vec<Rational> = (0..k)
        .map(|y| {
            if diagonal_floor {
                channel.rows().iter().map(|r| &r[y]).min().cloned().unwrap_or_default()
            } else {
                Rational::zero()
            }
        })
        .collect();

    // Tuples through a zero-mass symbol carry no mass, so only supports are enumerated.
    // Row `row_of[i][y]` holds the marginal constraint of coordinate i at symbol y.
    let supports: Vec<Vec<usize>> = marginals.iter().map(|p| p.support().collect()).collect();
    let mut row_of = vec![vec![usize::MAX; k]; m];
    let mut rows = 0;
    for (i, s) in supports.iter().enumerate() {
        for &y in s {
            row_of[i][y] = rows;
            rows += 1;
        }
    }
    let mut lp = StandardForm::new(rows);
    for (i, s) in supports.iter().enumerate() {
        for &y in s {
            lp.rhs[row_of[i][y]] = marginals[i].get(y).clone();
        }
    }
    let mut tuples: Vec<Tuple> = Vec::new();
    crate::coupling::for_each_product(&supports, |t| tuples.push(t.to_vec()));
    for t in &tuples {
        let column = t.iter().enumerate().map(|(i, &y)| (row_of[i][y], int(1))).collect();
        lp.add_column(int(distinct_count(t) as i64), column);
    }
    // Diagonal lower bounds become a shift `x = floor + x'`. A positive floor means
    // every coordinate has `y` in its support.
    let mut offset = Rational::zero();
    if diagonal_floor {
        for (y, f) in floor.iter().enumerate() {
            if f.is_zero() {
                continue;
            }
            for row in &row_of {
                lp.rhs[row[y]] -= f;
            }
            offset += f;
        }
    }

    match lp.solve() {
        Solution::Optimal { x, value } => {
            let mut mass = BTreeMap::new();
            for (t, v) in tuples.into_iter().zip(x) {
                let diag = t.iter().all(|&y| y == t[0]);
                let w = if diag { v + &floor[t[0]] } else { v };
                if !w.is_zero() {
                    mass.insert(t, w);
                }
            }
            let witness = Coupling::new(marginals.to_vec(), mass)?;
            let optimal_value = value + offset;
            debug_assert_eq!(optimal_value, witness.union_mass());
            let achieves_tau_max = optimal_value == tau_max(&channel);
            Ok(LpResult {
                optimal_value,
                witness,
                achieves_tau_max,
            })
        }
        Solution::Infeasible => Err(Error::Infeasible),
        Solution::Unbounded => Err(Error::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn pmf(v: &[(i64, i64)]) -> Pmf {
        Pmf::from_masses(v.iter().map(|&(n, d)| rat(n, d)).collect()).unwrap()
    }

    #[test]
    fn identical_pair_is_diagonal() {
        let p = pmf(&[(1, 3), (1, 3), (1, 3)]);
        let r = min_union_coupling(&[p.clone(), p]).unwrap();
        assert_eq!(r.optimal_value, int(1));
        assert!(r.achieves_tau_max);
        assert!(r.witness.mass().keys().all(|t| t[0] == t[1]));
    }

    #[test]
    fn rotating_halves_are_strictly_above_tau_max() {
        let fam = [
            pmf(&[(1, 2), (1, 2), (0, 1)]),
            pmf(&[(0, 1), (1, 2), (1, 2)]),
            pmf(&[(1, 2), (0, 1), (1, 2)]),
        ];
        let r = min_union_coupling(&fam).unwrap();
        assert!(r.optimal_value > rat(3, 2), "{}", r.optimal_value);
        assert!(!r.achieves_tau_max);
    }

    #[test]
    fn diag_floor_on_identical() {
        let p = pmf(&[(1, 4), (3, 4)]);
        let r = min_union_coupling_diag(&[p.clone(), p.clone(), p]).unwrap();
        assert_eq!(r.optimal_value, int(1));
        assert_eq!(r.witness.diagonal_mass(1), rat(3, 4));
    }

    #[test]
    fn capacity_guard() {
        let p = pmf(&[(1, 2), (1, 2)]);
        let opts = LpOptions { max_variables: 7 };
        let err = min_union_coupling_with(&[p.clone(), p.clone(), p], false, opts).unwrap_err();
        assert!(matches!(err, Error::Capacity { needed: 8, .. }));
    }

    #[test]
    fn needs_two_marginals() {
        assert!(min_union_coupling(&[pmf(&[(1, 1)])]).is_err());
    }
}
