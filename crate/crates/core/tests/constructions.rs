mod common;

use common::*;
use maxleak::constructions::{n4_ingredients, N4Coupling, PAIRS, SPLITS};
use maxleak::random::{mixed_family, random_family, seeded, smoothed_family};
use maxleak::rational::{int, rat, Rational};
use maxleak::{build_n4_coupling, min_union_coupling, n4_condition, verify_intersection_property, Error, Pmf};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::Rng;

fn pmf(v: &[(i64, i64)]) -> Pmf {
    Pmf::from_masses(v.iter().map(|&(n, d)| rat(n, d)).collect()).unwrap()
}

/// Frozen instance with `tau_max2 = 5/4` where the split capacities meet the budget exactly.
fn regression_family() -> Vec<Pmf> {
    vec![
        pmf(&[(0, 1), (1, 2), (11, 24), (1, 24)]),
        pmf(&[(1, 8), (0, 1), (1, 8), (3, 4)]),
        pmf(&[(1, 8), (1, 4), (1, 4), (3, 8)]),
        pmf(&[(1, 2), (1, 2), (0, 1), (0, 1)]),
    ]
}

fn min_over(r: &[Vec<Rational>], idx: &[usize], y: usize) -> Rational {
    idx.iter().map(|&i| r[i][y].clone()).min().unwrap()
}

/// `T_ij(y)`: mass where exactly the pair `{i, j}` ties, written with inclusion–exclusion.
fn pair_tie(r: &[Vec<Rational>], (i, j): (usize, usize), y: usize) -> Rational {
    let rest: Vec<usize> = (0..4).filter(|&l| l != i && l != j).collect();
    min_over(r, &[i, j], y) - min_over(r, &[i, j, rest[0]], y) - min_over(r, &[i, j, rest[1]], y)
        + min_over(r, &[0, 1, 2, 3], y)
}

fn check_built(fam: &[Pmf], b: &N4Coupling) {
    let r = rows(fam);
    let k = fam[0].len();
    assert_eq!(coordinate_marginals(b.coupling.mass(), 4, k), r);
    assert!(b.coupling.mass().values().all(|w| w.is_positive()));
    assert_eq!(union_by_definition(b.coupling.mass(), k), oracle_rank_sum(&r, 0));
    let chk = verify_intersection_property(&b.coupling, fam);
    assert!(chk.holds, "{:?}", chk.counterexample);

    let w = &b.weights;
    let ing = &b.ingredients;
    let t2 = oracle_rank_sum(&r, 1);
    let (a, bb, c) = w.abc.clone();
    assert_eq!(&a + &bb + &c, Rational::one());
    assert!(!a.is_negative() && !bb.is_negative() && !c.is_negative());
    let excess = (&t2 - Rational::one()).max(Rational::zero());
    assert_eq!(w.alpha.iter().sum::<Rational>(), excess);
    assert_eq!(w.residual_product, (Rational::one() - &t2).max(Rational::zero()));
    assert_eq!(w.total(ing), Rational::one());
    for (s, (p, q)) in SPLITS.iter().enumerate() {
        for pair in [p, q] {
            let n: Rational = (0..k).map(|y| pair_tie(&r, *pair, y)).sum();
            assert_eq!(&w.alpha[s] + &w.beta[pair], n);
            assert!(!w.beta[pair].is_negative());
        }
    }
    for i in 0..4 {
        let others: Vec<usize> = (0..4).filter(|&j| j != i).collect();
        let singles: Rational = (0..k).map(|y| min_over(&r, &others, y) - min_over(&r, &[0, 1, 2, 3], y)).sum();
        let mut lhs = singles + &w.residual_product;
        for &pair in &PAIRS {
            if pair.0 != i && pair.1 != i {
                lhs += &w.beta[&pair];
            }
        }
        // The residual normalizer is the mass where coordinate i alone is strictly on top.
        let norm: Rational = (0..k)
            .map(|y| {
                let top = others.iter().map(|&j| r[j][y].clone()).max().unwrap();
                (&r[i][y] - &top).max(Rational::zero())
            })
            .sum();
        assert_eq!(lhs, norm, "triplet constraint {i}");
    }
}

#[test]
fn random_families_where_condition_holds() {
    let mut rng = seeded(21);
    let (mut built, mut above) = (0, 0);
    for _ in 0..4000 {
        let k = rng.gen_range(2..=5);
        let fam = mixed_family(&mut rng, 4, k);
        let (holds, ing) = n4_condition(&fam).unwrap();
        let oracle: Rational = SPLITS
            .iter()
            .map(|(p, q)| {
                let np: Rational = (0..k).map(|y| pair_tie(&rows(&fam), *p, y)).sum();
                let nq: Rational = (0..k).map(|y| pair_tie(&rows(&fam), *q, y)).sum();
                np.min(nq)
            })
            .sum();
        assert_eq!(holds, oracle >= oracle_rank_sum(&rows(&fam), 1) - Rational::one());
        assert_eq!(ing.condition_lhs(), oracle);
        if !holds {
            assert!(matches!(build_n4_coupling(&fam), Err(Error::ConditionFails { .. })));
            continue;
        }
        let b = build_n4_coupling(&fam).unwrap();
        check_built(&fam, &b);
        built += 1;
        if ing.tau_max2 > Rational::one() {
            above += 1;
        }
    }
    assert!(built >= 500 && above >= 50, "built {built}, above threshold {above}");
}

#[test]
fn regression_instance() {
    let fam = regression_family();
    let r = rows(&fam);
    assert_eq!(oracle_rank_sum(&r, 1), rat(5, 4));
    assert_eq!(oracle_rank_sum(&r, 0), rat(53, 24));
    let ing = n4_ingredients(&fam).unwrap();
    assert_eq!(ing.condition_lhs(), rat(1, 4));
    assert_eq!(ing.condition_rhs(), rat(1, 4));
    let b = build_n4_coupling(&fam).unwrap();
    check_built(&fam, &b);
    assert_eq!(b.coupling.union_mass(), rat(53, 24));
    assert_eq!(min_union_coupling(&fam).unwrap().optimal_value, rat(53, 24));
}

#[test]
fn disjoint_point_masses() {
    let fam: Vec<Pmf> = (0..4).map(|i| Pmf::point(maxleak::measures::default_alphabet(4), i).unwrap()).collect();
    let b = build_n4_coupling(&fam).unwrap();
    assert_eq!(b.coupling.mass().len(), 1);
    assert_eq!(b.coupling.get(&[0, 1, 2, 3]), int(1));
    assert_eq!(b.coupling.union_mass(), int(4));
}

#[test]
fn wrong_arity_is_rejected() {
    let p = pmf(&[(1, 2), (1, 2)]);
    assert!(matches!(build_n4_coupling(&[p.clone(), p]), Err(Error::InvalidParameter(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn below_threshold_implies_condition(fam in family_strategy(4, 3)) {
        let t2 = oracle_rank_sum(&rows(&fam), 1);
        let (holds, _) = n4_condition(&fam).unwrap();
        if t2 <= Rational::one() {
            prop_assert!(holds);
        }
    }

    #[test]
    fn ingredients_identities(fam in sized_family(4..=4, 1..=4)) {
        let ing = n4_ingredients(&fam).unwrap();
        let r = rows(&fam);
        let k = fam[0].len();
        prop_assert_eq!(&ing.tau_max2, &(&ing.tau_pair - int(2) * &ing.tau_trip + int(3) * &ing.tau));
        for i in 0..4 {
            let direct: Rational = ing.residual_numerators[i].iter().sum();
            prop_assert_eq!(&ing.residual_norms[i], &direct);
        }
        for &pair in &PAIRS {
            for y in 0..k {
                prop_assert_eq!(&ing.t[&pair][y], &pair_tie(&r, pair, y));
                prop_assert!(!ing.t[&pair][y].is_negative());
            }
        }
        for y in 0..k {
            prop_assert_eq!(&ing.p_min[y], &min_over(&r, &[0, 1, 2, 3], y));
        }
    }
}

#[test]
fn lp_matches_on_sampled_instances() {
    let mut rng = seeded(22);
    let mut checked = 0;
    while checked < 40 {
        let k = rng.gen_range(2..=4);
        let fam = if rng.gen_bool(0.5) { smoothed_family(&mut rng, 4, k) } else { random_family(&mut rng, 4, k) };
        let Ok(b) = build_n4_coupling(&fam) else { continue };
        assert_eq!(min_union_coupling(&fam).unwrap().optimal_value, b.coupling.union_mass());
        checked += 1;
    }
}
