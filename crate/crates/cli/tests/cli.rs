use std::path::PathBuf;
use std::process::{Command, Output};

use maxleak::random::{random_network, seeded, NetworkParams};
use maxleak::rational::{parse_rational, rat, Rational};
use maxleak_cli::expr::{eval, Params};
use maxleak_cli::netfile::{parse_network, write_network};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxleak")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fx(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["validate", &fx("chain.json")]).status.code(), Some(0));
    assert_eq!(run(&["validate", &fx("invalid/cycle.json")]).status.code(), Some(1));
    assert_eq!(run(&["bound", &fx("invalid/bad_row.json")]).status.code(), Some(1));
    assert_eq!(run(&["validate", &fx("missing.json")]).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let o = run(&["bound", &fx("eight_node.json"), "--state-limit", "16"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capacity exceeded"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v2.json");
    let text = std::fs::read_to_string(fixture("chain.json")).unwrap();
    std::fs::write(&path, text.replace("\"format_version\": 1", "\"format_version\": 2")).unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("format_version"));
}

#[test]
fn validate_reports_each_issue() {
    let o = run(&["validate", &fx("invalid/bad_row.json")]);
    assert!(stdout(&o).contains("node `Y` row 1 (X=1): sums to 9/10"), "{}", stdout(&o));
    let o = run(&["validate", &fx("fan.json")]);
    assert_eq!(stdout(&o).trim(), "valid: 4 nodes, source `X`, order X -> Y1 -> Y2 -> Y3");
}

#[test]
fn measures_of_the_binary_chain() {
    let text = stdout(&run(&["measures", &fx("chain.json")]));
    assert!(text.contains("Y1|X: tau_max=3/2 tau_max2=1/2 tau=1/2 leakage=0.405465108108"), "{text}");
    // End-to-end crossover 1/4 * 3/4 * 2 = 3/8.
    assert!(text.contains("Y2|X: tau_max=5/4 tau_max2=3/4 tau=3/4"), "{text}");
    assert!(text.contains("Y2|Y1: tau_max=3/2"), "{text}");

    let rows = csv_rows(&stdout(&run(&["measures", &fx("erasure.json"), "--csv"])));
    assert_eq!(rows, vec![vec!["Y|X", "1/3", "5/3", "1/3", "", "", "", "", "", ""]]);

    assert_eq!(run(&["measures", &fx("chain.json"), "--node", "X"]).status.code(), Some(1));
    assert_eq!(run(&["measures", &fx("chain.json"), "--node", "Q"]).status.code(), Some(1));
}

#[test]
fn bound_report_on_the_chain() {
    let rows = csv_rows(&stdout(&run(&["bound", &fx("chain.json"), "--csv", "--compare-exact"])));
    let methods: Vec<&str> = rows.iter().map(|r| r[4].as_str()).collect();
    assert_eq!(methods, ["theorem2", "corollary1", "recursive", "subadditivity"]);
    for r in &rows {
        assert_eq!(r[0], "Y1,Y2");
        assert_eq!(r[6], "3/2");
        assert_eq!(r[9], "OK");
    }
    assert_eq!(rows[1][5], "2/1");
    assert_eq!(rows[1][7], "1/2");
    assert_eq!(rows[3][5], "9/4");

    let o = run(&["bound", &fx("chain.json"), "--targets", "Y2", "--method", "corollary1"]);
    let text = stdout(&o);
    assert!(text.contains("exact: tau_max = 5/4"), "{text}");
    assert!(text.contains("corollary1     = 2/1"), "{text}");
    assert!(!text.contains("theorem2"));
}

#[test]
fn bound_marks_inapplicable_methods() {
    let o = run(&["bound", &fx("precondition_fails.json"), "--csv", "--compare-exact"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0][5], "inapplicable");
    assert!(rows[0][8].contains("tau_max2(Y2|Y1)=3/2:fail"));
    assert_eq!(rows[0][9], "");
    assert_eq!(rows[3][4], "subadditivity");
    assert_eq!(rows[3][9], "OK");
}

#[test]
fn bound_adds_example_rows() {
    let rows = csv_rows(&stdout(&run(&["bound", &fx("side_path.json"), "--csv", "--compare-exact"])));
    let ex: Vec<&Vec<String>> = rows.iter().filter(|r| r[4].starts_with("example1:")).collect();
    assert_eq!(ex.len(), 3);
    for r in &ex {
        assert_eq!(r[0], "Y1,Y2");
        assert_eq!(r[9], "OK");
        assert!(parse_rational(&r[5]).unwrap() >= parse_rational(&r[6]).unwrap());
    }
    let rows = csv_rows(&stdout(&run(&["bound", &fx("fan.json"), "--csv"])));
    let labels: Vec<&str> = rows.iter().filter(|r| r[4].starts_with("example2:")).map(|r| r[4].as_str()).collect();
    assert_eq!(labels, ["example2:outer_bound", "example2:chained_bound", "example2:subadditivity"]);
    let text = stdout(&run(&["bound", &fx("fan.json")]));
    assert!(text.contains("log_chained_bound"));
    assert!(text.contains("consistent: yes   sound: yes"));
}

#[test]
fn couple_modes() {
    let text = stdout(&run(&["couple", &fx("pmfs/regression4.json"), "--mode", "n4"]));
    assert!(text.contains("tau_max = 53/24   tau_max2 = 5/4"), "{text}");
    assert!(text.contains("verification: marginals OK, union=tau_max OK, intersection property OK"));

    let text = stdout(&run(&["couple", &fx("pmfs/overlap3.json"), "--mode", "lp"]));
    assert!(text.contains("lp optimum = 2/1   optimum > tau_max by 1/2"), "{text}");
    assert_eq!(run(&["couple", &fx("pmfs/overlap3.json"), "--mode", "closed"]).status.code(), Some(1));

    let text = stdout(&run(&["couple", &fx("pmfs/identical.json"), "--mode", "closed"]));
    assert!(text.contains("closed form: Diagonal"));

    let o = run(&["couple", &fx("pmfs/joints.json"), "--mode", "simul"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("joint marginals OK, Y-union=tau_max OK, Y-part=ingredient OK"));
    assert_eq!(run(&["couple", &fx("pmfs/joints.json"), "--mode", "simul", "--max-atoms", "3"]).status.code(), Some(2));
}

#[test]
fn sweep_over_the_chain_template() {
    let o = run(&["sweep", &fx("templates/chain_template.json"), "--param", "delta", "--range", "0:1/2:1/16"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    let values: Vec<Vec<Rational>> =
        rows.iter().map(|r| r.iter().map(|c| parse_rational(c).unwrap()).collect()).collect();
    for v in &values {
        // exact <= theorem2 <= corollary1 <= recursive <= subadditivity
        assert!(v[1..].windows(2).all(|w| w[0] <= w[1]), "{v:?}");
    }
    for w in values.windows(2) {
        assert!((1..6).all(|c| w[1][c] <= w[0][c]));
    }
    assert!(values[8][1..].iter().all(|v| *v == rat(1, 1)));
    assert_eq!(values[0][1], rat(2, 1));
    assert_eq!(values[0][3], rat(4, 1));
    assert_eq!(run(&["sweep", &fx("chain.json"), "--param", "d", "--range", "1:0:1"]).status.code(), Some(1));
}

#[test]
fn format_and_generate() {
    let text = stdout(&run(&["format", &fx("templates/chain_template.json"), "--set", "delta=1/4"]));
    assert!(!text.contains("delta"));
    assert!(text.contains("\"3/4\""));
    assert_eq!(write_network(&parse_network(&text).unwrap()), text);
    assert_eq!(run(&["format", &fx("templates/chain_template.json")]).status.code(), Some(1));

    let a = stdout(&run(&["generate", "--seed", "7"]));
    assert_eq!(a, stdout(&run(&["generate", "--seed", "7"])));
    assert_eq!(a, std::fs::read_to_string(fixture("random_seed7.json")).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expressions_match_direct_arithmetic(a in -20i64..20, b in 1i64..20, c in -20i64..20, d in 1i64..20) {
        let (x, y) = (rat(a, b), rat(c, d));
        let mut params = Params::new();
        params.insert("p".into(), x.clone());
        let text = format!("1 - p * ({c}/{d}) + -(p)/2");
        let expected = Rational::from_integer(1.into()) - &x * &y - &x / Rational::from_integer(2.into());
        prop_assert_eq!(eval(&text, &params).unwrap(), expected);
    }

    #[test]
    fn random_networks_round_trip(seed in any::<u64>()) {
        let net = random_network(&mut seeded(seed), NetworkParams::default());
        let text = write_network(&net);
        let again = parse_network(&text).unwrap();
        prop_assert_eq!(&again, &net);
        prop_assert_eq!(write_network(&again), text);
    }
}
