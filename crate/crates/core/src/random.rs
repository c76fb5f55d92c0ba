//! Seeded generators of exact rational PMFs, channels and networks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_traits::One;

use crate::bayes_net::{BayesNet, Node};
use crate::measures::{default_alphabet, DiscreteChannel, Pmf};
use crate::rational::{rat, Rational};
use crate::simultaneous::JointPmf;

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random masses over `k` symbols with denominator dividing `denom`; zeros are common.
pub fn random_masses(rng: &mut impl Rng, k: usize, denom: i64) -> Vec<Rational> {
    let mut w: Vec<i64> = (0..k)
        .map(|_| if rng.gen_bool(0.25) { 0 } else { rng.gen_range(1..=8) })
        .collect();
    if w.iter().all(|&v| v == 0) {
        w[rng.gen_range(0..k)] = 1;
    }
    let total: i64 = w.iter().sum();
    // Round onto the grid 1/denom, keeping the exact sum.
    let mut units: Vec<i64> = w.iter().map(|&v| v * denom / total).collect();
    let short = denom - units.iter().sum::<i64>();
    for _ in 0..short {
        let candidates: Vec<usize> = (0..k).filter(|&i| w[i] > 0).collect();
        units[*candidates.choose(rng).expect("non-empty")] += 1;
    }
    units.into_iter().map(|u| rat(u, denom)).collect()
}

pub fn random_pmf(rng: &mut impl Rng, k: usize) -> Pmf {
    let denom = [4, 6, 8, 12, 24][rng.gen_range(0..5)];
    Pmf::from_masses(random_masses(rng, k, denom)).expect("valid masses")
}

pub fn random_family(rng: &mut impl Rng, m: usize, k: usize) -> Vec<Pmf> {
    (0..m).map(|_| random_pmf(rng, k)).collect()
}

/// `(1 − λ)·B + λ·P_i` with a shared base `B`: a family with a sizeable common part.
pub fn smoothed_family(rng: &mut impl Rng, m: usize, k: usize) -> Vec<Pmf> {
    let base = random_pmf(rng, k);
    let lambda = rat(rng.gen_range(1..=4), 4);
    (0..m)
        .map(|_| {
            let p = random_pmf(rng, k);
            let mass = (0..k)
                .map(|y| (Rational::one() - &lambda) * base.get(y) + &lambda * p.get(y))
                .collect();
            Pmf::from_masses(mass).expect("convex combination")
        })
        .collect()
}

/// Either kind of family, chosen at random.
pub fn mixed_family(rng: &mut impl Rng, m: usize, k: usize) -> Vec<Pmf> {
    if rng.gen_bool(0.5) {
        smoothed_family(rng, m, k)
    } else {
        random_family(rng, m, k)
    }
}

pub fn random_channel(rng: &mut impl Rng, n: usize, k: usize) -> DiscreteChannel {
    DiscreteChannel::from_pmfs(&mixed_family(rng, n, k)).expect("shared alphabet")
}

/// `m` joint PMFs over `nx × ny`: `Y`-marginals from `y_family`, conditionals `X | Y` smoothed.
pub fn random_joint_family(rng: &mut impl Rng, y_family: &[Pmf], nx: usize) -> Vec<JointPmf> {
    let ny = y_family[0].len();
    let base: Vec<Pmf> = (0..ny).map(|_| random_pmf(rng, nx)).collect();
    y_family
        .iter()
        .map(|py| {
            let lambda = rat(rng.gen_range(0..=2), 2);
            let own: Vec<Pmf> = (0..ny).map(|_| random_pmf(rng, nx)).collect();
            let mass = (0..nx)
                .map(|x| {
                    (0..ny)
                        .map(|y| {
                            let cond = (Rational::one() - &lambda) * base[y].get(x) + &lambda * own[y].get(x);
                            py.get(y) * cond
                        })
                        .collect()
                })
                .collect();
            JointPmf::new(default_alphabet(nx), default_alphabet(ny), mass).expect("valid joint")
        })
        .collect()
}

/// Shape limits for [`random_network`].
#[derive(Debug, Clone, Copy)]
pub struct NetworkParams {
    /// Total node count including the source, at least 2.
    pub max_nodes: usize,
    pub max_alphabet: usize,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            max_nodes: 5,
            max_alphabet: 4,
        }
    }
}

/// A CPT row `(1 − λ)·B + λ·δ_{g}`: noisy copy of a symbol chosen per parent configuration.
fn noisy_rows(rng: &mut impl Rng, configs: usize, k: usize) -> Vec<Vec<Rational>> {
    let style = rng.gen_range(0..3);
    let base = random_pmf(rng, k);
    let lambda = rat(rng.gen_range(0..=4), 4);
    (0..configs)
        .map(|c| {
            let target = match style {
                0 => c % k,
                1 => rng.gen_range(0..k),
                _ => (c * 7 + 3) % k,
            };
            (0..k)
                .map(|y| {
                    let point = if y == target { Rational::one() } else { Rational::default() };
                    (Rational::one() - &lambda) * base.get(y) + &lambda * point
                })
                .collect()
        })
        .collect()
}

/// Random DAG over `X, N1, N2, …` with at most two parents per node, biased towards
/// noisy-copy CPTs.
pub fn random_network(rng: &mut impl Rng, params: NetworkParams) -> BayesNet {
    let count = rng.gen_range(2..=params.max_nodes.max(2));
    let mut nodes: Vec<Node> = Vec::with_capacity(count);
    nodes.push(Node {
        id: "X".into(),
        alphabet: default_alphabet(rng.gen_range(2..=params.max_alphabet.max(2))),
        parents: Vec::new(),
        cpt: Vec::new(),
    });
    for i in 1..count {
        let k = rng.gen_range(2..=params.max_alphabet.max(2));
        let mut earlier: Vec<usize> = (0..i).collect();
        earlier.shuffle(rng);
        let n_parents = rng.gen_range(1..=2.min(i));
        let mut parents: Vec<usize> = earlier[..n_parents].to_vec();
        parents.sort_unstable();
        let configs: usize = parents.iter().map(|&p| nodes[p].alphabet.len()).product();
        let cpt = if rng.gen_bool(0.8) {
            noisy_rows(rng, configs, k)
        } else {
            (0..configs).map(|_| random_pmf(rng, k).masses().to_vec()).collect()
        };
        nodes.push(Node {
            id: format!("N{i}"),
            alphabet: default_alphabet(k),
            parents: parents.iter().map(|&p| nodes[p].id.clone()).collect(),
            cpt,
        });
    }
    BayesNet::new(nodes, "X").expect("generated network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masses_sum_to_one() {
        let mut rng = seeded(7);
        for k in 1..6 {
            for _ in 0..50 {
                let m = random_masses(&mut rng, k, 12);
                assert_eq!(m.iter().sum::<Rational>(), Rational::one());
            }
        }
    }

    #[test]
    fn networks_are_reproducible() {
        let a = random_network(&mut seeded(3), NetworkParams::default());
        let b = random_network(&mut seeded(3), NetworkParams::default());
        assert_eq!(a, b);
    }
}
