use maxleak::bounds::peel_plan;
use maxleak::random::{random_network, seeded, NetworkParams};
use maxleak::rational::{int, rat, Rational};
use maxleak::{
    bound_report, corollary1_bound, doeblin, example1_report, example2_report, recursive_bound, subadditivity_baseline,
    tau_max, theorem2_bound, BayesNet, Error, Method, Node, NodeQuery,
};
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn node(id: &str, parents: &[&str], k: usize, cpt: Vec<Vec<Rational>>) -> Node {
    Node {
        id: id.into(),
        alphabet: maxleak::measures::default_alphabet(k),
        parents: parents.iter().map(|s| s.to_string()).collect(),
        cpt,
    }
}

fn bsc(d: &Rational) -> Vec<Vec<Rational>> {
    let e = Rational::one() - d;
    vec![vec![e.clone(), d.clone()], vec![d.clone(), e]]
}

fn chain(d1: &Rational, d2: &Rational) -> BayesNet {
    BayesNet::new(
        vec![node("X", &[], 2, vec![]), node("Y1", &["X"], 2, bsc(d1)), node("Y2", &["Y1"], 2, bsc(d2))],
        "X",
    )
    .unwrap()
}

#[test]
fn random_networks_are_sound_and_ordered() {
    let mut rng = seeded(51);
    let mut accepted = 0;
    let mut strict_checked = 0;
    let mut draws = 0;
    while accepted < 500 {
        draws += 1;
        assert!(draws < 5000, "only {accepted} accepted");
        let net = random_network(&mut rng, NetworkParams::default());
        let mut others: Vec<String> = net.nodes().iter().map(|n| n.id.clone()).filter(|id| id != "X").collect();
        others.shuffle(&mut rng);
        let targets = others[..rng.gen_range(1..=others.len())].to_vec();
        let r = bound_report(&net, &targets).unwrap();
        let (Ok(t2), Ok(c1)) = (&r.theorem2, &r.corollary1) else {
            continue;
        };
        let (Ok(rt), Ok(rc)) = (
            recursive_bound(&net, &targets, Method::Coupling),
            recursive_bound(&net, &targets, Method::Doeblin),
        ) else {
            continue;
        };
        accepted += 1;
        let exact = &r.exact_tau_max;
        assert_eq!(*exact, tau_max(&net.composite_channel(&targets).unwrap()));
        assert!(*exact <= t2.value, "{targets:?}");
        assert!(t2.value <= c1.value);
        assert!(c1.value <= c1.baseline());
        assert!(c1.baseline() <= r.subadditivity);
        assert!(*exact <= rt.value && rt.value <= rc.value && rc.value <= r.subadditivity);
        // Independent baseline: product of every peeled CPT's tau_max and the base.
        let (base, plan) = peel_plan(&net, &targets).unwrap();
        let mut product = tau_max(&net.composite_channel(&[base]).unwrap());
        for q in &plan {
            product *= tau_max(&net.cpt_channel(&q.u).unwrap());
        }
        assert_eq!(product, r.subadditivity);

        let mut joint = c1.query.v_set.clone();
        joint.extend(net.node(&c1.query.u).unwrap().parents.iter().cloned());
        let tau = doeblin(&net.composite_channel(&joint).unwrap());
        assert_eq!(tau, c1.penalty);
        if tau.is_positive() && c1.u_tau_max > Rational::one() {
            assert!(c1.value < r.subadditivity);
            strict_checked += 1;
        }
    }
    assert!(strict_checked >= 50, "{strict_checked}");
}

#[test]
fn chain_closed_forms() {
    let grid: Vec<Rational> = (0..=4).map(|i| rat(i, 8)).collect();
    for d1 in &grid {
        for d2 in &grid {
            let net = chain(d1, d2);
            let one = Rational::one();
            let star = d1 * (&one - d2) + d2 * (&one - d1);
            let exact = tau_max(&net.composite_channel(&ids(&["Y2"])).unwrap());
            assert_eq!(exact, int(2) * (&one - &star));
            // a = 2(1 − δ2), t = 2(1 − δ1), tau(P_{Y1|X}) = 2·δ1.
            let poly = int(4) - int(6) * d1 - int(4) * d2 + int(8) * d1 * d2;
            let q = NodeQuery::new(&net, ids(&["Y1"]), "Y2").unwrap();
            let c = corollary1_bound(&net, &q).unwrap();
            assert_eq!(c.value, poly, "d1={d1} d2={d2}");
            let t = theorem2_bound(&net, &q).unwrap();
            assert!(exact <= t.value && t.value <= c.value);
            let r = recursive_bound(&net, &ids(&["Y2"]), Method::Doeblin).unwrap();
            assert_eq!(r.value, poly);
            if *d1 == rat(1, 2) {
                assert_eq!(c.value, exact);
            }
        }
    }
    let quarter = chain(&rat(1, 4), &rat(1, 4));
    assert_eq!(tau_max(&quarter.composite_channel(&ids(&["Y2"])).unwrap()), rat(5, 4));
    assert_eq!(tau_max(&quarter.composite_channel(&ids(&["Y1", "Y2"])).unwrap()), rat(3, 2));
    let q = NodeQuery::new(&quarter, ids(&["Y1"]), "Y2").unwrap();
    assert_eq!(corollary1_bound(&quarter, &q).unwrap().value, int(2));
}

fn example1_net(d: &Rational, z_cpt: Vec<Vec<Rational>>, y2_cpt: Vec<Vec<Rational>>) -> BayesNet {
    BayesNet::new(
        vec![
            node("X", &[], 2, vec![]),
            node("Y1", &["X"], 2, bsc(d)),
            node("Z", &["X", "Y1"], 2, z_cpt),
            node("Y2", &["Z"], 2, y2_cpt),
        ],
        "X",
    )
    .unwrap()
}

fn xor_noisy(d: &Rational) -> Vec<Vec<Rational>> {
    let b = bsc(d);
    vec![b[0].clone(), b[1].clone(), b[1].clone(), b[0].clone()]
}

#[test]
fn first_example_report() {
    let d = rat(1, 4);
    let net = example1_net(&d, xor_noisy(&rat(1, 8)), bsc(&d));
    let rep = example1_report(&net).unwrap();
    assert!(rep.consistent && rep.sound && rep.preconditions_pass());
    let a = rat(3, 2);
    let t = rat(3, 2);
    let tau = doeblin(&net.composite_channel(&ids(&["Y1", "Z"])).unwrap());
    assert_eq!(rep.entry("doeblin_bound"), Some(&(&a * &t - (&a - Rational::one()) * &tau)));
    assert_eq!(rep.entry("subadditivity"), Some(&(&a * &t)));
    assert!(rep.entry("coupling_bound").unwrap() <= rep.entry("doeblin_bound").unwrap());
    assert_eq!(rep.exact, tau_max(&net.composite_channel(&ids(&["Y1", "Y2"])).unwrap()));
    let log_bound = rep.log_entries.iter().find(|(l, _)| l == "log_bound").unwrap().1;
    let direct = maxleak::rational::to_f64(rep.entry("doeblin_bound").unwrap()).ln();
    assert!((log_bound - direct).abs() < 1e-12);

    // A constant last channel leaks nothing beyond Y1.
    let half = vec![vec![rat(1, 2), rat(1, 2)]; 2];
    let rep = example1_report(&example1_net(&d, xor_noisy(&rat(1, 8)), half)).unwrap();
    assert_eq!(rep.entry("doeblin_bound"), Some(&rat(3, 2)));
    assert_eq!(rep.exact, rat(3, 2));
}

#[test]
fn second_example_report() {
    let d = rat(1, 4);
    let ident = bsc(&Rational::zero());
    let net = BayesNet::new(
        vec![
            node("X", &[], 2, vec![]),
            node("Y1", &["X"], 2, bsc(&d)),
            node("Y2", &["X", "Y1"], 2, xor_noisy(&rat(1, 8))),
            node("Y3", &["Y1", "Y2"], 2, xor_noisy(&rat(1, 4))),
        ],
        "X",
    )
    .unwrap();
    let rep = example2_report(&net).unwrap();
    assert!(rep.consistent && rep.sound);
    assert!(rep.exact <= *rep.entry("chained_bound").unwrap());
    assert!(rep.entry("chained_bound").unwrap() <= rep.entry("subadditivity").unwrap());

    // Identity channels everywhere: nothing to gain from the correction.
    let net = BayesNet::new(
        vec![
            node("X", &[], 2, vec![]),
            node("Y1", &["X"], 2, ident.clone()),
            node("Y2", &["X", "Y1"], 2, vec![ident[0].clone(), ident[0].clone(), ident[1].clone(), ident[1].clone()]),
            node("Y3", &["Y1", "Y2"], 2, vec![ident[0].clone(), ident[0].clone(), ident[1].clone(), ident[1].clone()]),
        ],
        "X",
    )
    .unwrap();
    let rep = example2_report(&net).unwrap();
    assert_eq!(rep.exact, int(2));
    assert!(rep.sound);
}

#[test]
fn wrong_shapes_are_rejected() {
    let net = chain(&rat(1, 4), &rat(1, 4));
    assert!(matches!(example1_report(&net), Err(Error::Topology(_))));
    assert!(matches!(example2_report(&net), Err(Error::Topology(_))));
}

#[test]
fn failing_precondition_is_reported() {
    // Three distinct rotating rows for V break both checks.
    let rows = vec![
        vec![rat(1, 2), rat(1, 2), rat(0, 1)],
        vec![rat(0, 1), rat(1, 2), rat(1, 2)],
        vec![rat(1, 2), rat(0, 1), rat(1, 2)],
    ];
    let net = BayesNet::new(
        vec![
            node("X", &[], 3, vec![]),
            node("V", &["X"], 3, rows),
            node("U", &["V"], 2, vec![vec![rat(1, 1), rat(0, 1)], vec![rat(0, 1), rat(1, 1)], vec![rat(1, 2), rat(1, 2)]]),
        ],
        "X",
    )
    .unwrap();
    let q = NodeQuery::new(&net, ids(&["V"]), "U").unwrap();
    assert!(matches!(corollary1_bound(&net, &q), Err(Error::Precondition { .. })));
    let err = recursive_bound(&net, &ids(&["V", "U"]), Method::Doeblin).unwrap_err();
    assert_eq!((err.step, err.u.as_str()), (1, "U"));
    assert!(err.trace.is_empty());
    assert!(subadditivity_baseline(&net, &ids(&["V", "U"])).is_ok());
}
