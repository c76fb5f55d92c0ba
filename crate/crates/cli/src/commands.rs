use std::io::Write;
use std::path::Path;

use maxleak::bounds::{BoundReport, ExampleReport, PreconditionCheck, SingleBound};
use maxleak::constructions::{closed_form_minimal_coupling, N4Coupling};
use maxleak::random::{random_network, seeded, NetworkParams};
use maxleak::rational::{fmt_rational, parse_rational, Rational};
use maxleak::simultaneous::y_marginalization;
use maxleak::{
    bound_report, build_n4_coupling, build_simultaneous_coupling, example1_report, example2_report,
    min_union_coupling, tau_max, tau_max2, verify_intersection_property, BayesNet, Coupling, DiscreteChannel,
    Error, IngredientSource, MeasureSet, Pmf,
};
use num_traits::Zero;

use crate::error::{CliError, Result, EXIT_INVALID, EXIT_OK};
use crate::expr::{parse_assignments, Params};
use crate::netfile::{parse_file, read_text, to_nodes, write_network};
use crate::pmffile::load_family;
use crate::report::{float_text, log_text, write_csv, BoundCell, ReportRow, Soundness};
use crate::{CoupleMode, MethodArg, NetArgs};

fn build_net(args: &NetArgs, params: &Params, source: Option<&str>) -> Result<BayesNet> {
    let file = parse_file(&read_text(&args.path)?, &args.path)?;
    let nodes = to_nodes(&file, params)?;
    let source = source.map_or(file.source.clone(), str::to_string);
    Ok(BayesNet::new(nodes, source)?.with_state_limit(args.state_limit))
}

fn load_net(args: &NetArgs, source: Option<&str>) -> Result<BayesNet> {
    build_net(args, &parse_assignments(&args.set)?, source)
}

/// Every non-source node, in topological order.
fn default_targets(net: &BayesNet) -> Result<Vec<String>> {
    Ok(net
        .topological_sort()?
        .into_iter()
        .filter(|id| id != net.source())
        .collect())
}

pub fn validate(args: &NetArgs, out: &mut dyn Write) -> Result<i32> {
    match load_net(args, None) {
        Ok(net) => {
            let order = net.topological_sort()?;
            writeln!(
                out,
                "valid: {} nodes, source `{}`, order {}",
                net.nodes().len(),
                net.source(),
                order.join(" -> ")
            )?;
            Ok(EXIT_OK)
        }
        Err(CliError::Core(Error::InvalidNetwork(issues))) => {
            for i in &issues {
                writeln!(out, "invalid: {i}")?;
            }
            Ok(EXIT_INVALID)
        }
        Err(e) => Err(e),
    }
}

fn measure_row(label: String, ch: &DiscreteChannel) -> (ReportRow, f64) {
    let m = MeasureSet::of(ch);
    (ReportRow::measures(label, m.tau, m.tau_max, m.tau_max2), m.leakage_log)
}

pub fn measures(args: &NetArgs, node: Option<&str>, csv: bool, out: &mut dyn Write) -> Result<i32> {
    let net = load_net(args, None)?;
    let ids = match node {
        Some(id) => {
            net.node(id)?;
            if id == net.source() {
                return Err(CliError::Usage(format!("`{id}` is the source; pick a non-source node")));
            }
            vec![id.to_string()]
        }
        None => default_targets(&net)?,
    };
    let mut rows = Vec::new();
    for id in &ids {
        let composite = net.composite_channel(std::slice::from_ref(id))?;
        rows.push(measure_row(format!("{id}|{}", net.source()), &composite));
        let parents = &net.node(id)?.parents;
        if parents.as_slice() != [net.source().to_string()] {
            let label = if parents.is_empty() { "()".to_string() } else { parents.join(",") };
            rows.push(measure_row(format!("{id}|{label}"), &net.cpt_channel(id)?));
        }
    }
    if csv {
        let plain: Vec<ReportRow> = rows.into_iter().map(|(r, _)| r).collect();
        write_csv(&plain, out)?;
        return Ok(EXIT_OK);
    }
    for (r, leak) in &rows {
        let t2 = r.tau_max2.as_ref().map_or("undefined".to_string(), fmt_rational);
        writeln!(
            out,
            "{}: tau_max={} tau_max2={} tau={} leakage={}",
            r.node,
            fmt_rational(r.tau_max.as_ref().expect("set")),
            t2,
            fmt_rational(r.tau.as_ref().expect("set")),
            float_text(*leak)
        )?;
    }
    Ok(EXIT_OK)
}

pub struct BoundOptions {
    pub source: Option<String>,
    pub targets: Vec<String>,
    pub method: MethodArg,
    pub compare_exact: bool,
    pub csv: bool,
}

/// Errors that mean "this method does not apply here" rather than a failure.
fn inapplicable(e: &Error) -> bool {
    matches!(
        e,
        Error::Precondition { .. } | Error::ConditionFails { .. } | Error::InvalidQuery(_)
    )
}

fn check_texts(checks: &[PreconditionCheck]) -> Vec<String> {
    checks.iter().map(ToString::to_string).collect()
}

struct Line {
    label: String,
    value: std::result::Result<Rational, String>,
    checks: Vec<String>,
}

fn single_line(label: &str, r: &maxleak::Result<SingleBound>) -> Result<Line> {
    Ok(match r {
        Ok(b) => Line {
            label: label.into(),
            value: Ok(b.value.clone()),
            checks: check_texts(&b.preconditions),
        },
        Err(e) if inapplicable(e) => Line {
            label: label.into(),
            value: Err(e.to_string()),
            checks: Vec::new(),
        },
        Err(e) => return Err(e.clone().into()),
    })
}

fn bound_lines(rep: &BoundReport, method: MethodArg) -> Result<Vec<Line>> {
    let mut lines = Vec::new();
    let want = |m: MethodArg| method == m || method == MethodArg::All;
    if want(MethodArg::Theorem2) {
        let mut l = single_line("theorem2", &rep.theorem2)?;
        if l.checks.is_empty() {
            l.checks = check_texts(&rep.preconditions);
        }
        lines.push(l);
    }
    if want(MethodArg::Corollary1) {
        let mut l = single_line("corollary1", &rep.corollary1)?;
        if l.checks.is_empty() {
            l.checks = check_texts(&rep.preconditions);
        }
        lines.push(l);
    }
    if want(MethodArg::Recursive) {
        lines.push(match &rep.recursive {
            Ok(r) => Line {
                label: "recursive".into(),
                value: Ok(r.value.clone()),
                checks: r.steps.iter().flat_map(|s| check_texts(&s.preconditions)).collect(),
            },
            Err(e) if inapplicable(&e.source) => Line {
                label: "recursive".into(),
                value: Err(e.to_string()),
                checks: e.trace.iter().flat_map(|s| check_texts(&s.preconditions)).collect(),
            },
            Err(e) => return Err(e.source.clone().into()),
        });
    }
    lines.push(Line {
        label: "subadditivity".into(),
        value: Ok(rep.subadditivity.clone()),
        checks: Vec::new(),
    });
    Ok(lines)
}

fn example_reports(net: &BayesNet) -> Result<Vec<(ExampleReport, Vec<String>)>> {
    let mut out = Vec::new();
    for (f, roles) in [
        (example1_report as fn(&BayesNet) -> maxleak::Result<ExampleReport>, ["Y1", "Y2"].as_slice()),
        (example2_report, ["Y1", "Y2", "Y3"].as_slice()),
    ] {
        match f(net) {
            Ok(rep) => {
                let targets = roles
                    .iter()
                    .map(|r| rep.roles.iter().find(|(k, _)| k == r).expect("role").1.clone())
                    .collect();
                out.push((rep, targets));
            }
            Err(Error::Topology(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Example entries that bound the exact leakage of the example's targets.
fn is_exact_bound(label: &str) -> bool {
    label.ends_with("_bound") && label != "inner_bound" || label == "subadditivity"
}

fn soundness(compare: bool, bound: &Rational, exact: &Rational) -> Soundness {
    match (compare, bound >= exact) {
        (false, _) => Soundness::NotChecked,
        (true, true) => Soundness::Ok,
        (true, false) => Soundness::Violated,
    }
}

pub fn bound(args: &NetArgs, opts: &BoundOptions, out: &mut dyn Write) -> Result<i32> {
    let net = load_net(args, opts.source.as_deref())?;
    let targets = if opts.targets.is_empty() {
        default_targets(&net)?
    } else {
        opts.targets.clone()
    };
    let rep = bound_report(&net, &targets)?;
    let composite = net.composite_channel(&targets)?;
    let m = MeasureSet::of(&composite);
    let lines = bound_lines(&rep, opts.method)?;
    let examples = example_reports(&net)?;
    let exact = &rep.exact_tau_max;
    let node = targets.join(",");

    let mut rows = Vec::new();
    for l in &lines {
        let mut row = ReportRow::measures(node.clone(), m.tau.clone(), m.tau_max.clone(), m.tau_max2.clone());
        row.bound_method = l.label.clone();
        row.exact_value = Some(exact.clone());
        row.preconditions = l.checks.clone();
        match &l.value {
            Ok(v) => {
                row.soundness = soundness(opts.compare_exact, v, exact);
                row.bound_value = BoundCell::Value(v.clone());
            }
            Err(_) => row.bound_value = BoundCell::Inapplicable,
        }
        rows.push(row);
    }
    let mut consistent = true;
    for (ex, ex_targets) in &examples {
        let ch = net.composite_channel(ex_targets)?;
        let em = MeasureSet::of(&ch);
        consistent &= ex.consistent;
        for (label, v) in ex.entries.iter().filter(|(l, _)| is_exact_bound(l)) {
            let mut row = ReportRow::measures(ex_targets.join(","), em.tau.clone(), em.tau_max.clone(), em.tau_max2.clone());
            row.bound_method = format!("{}:{label}", ex.name);
            row.exact_value = Some(ex.exact.clone());
            row.preconditions = check_texts(&ex.preconditions);
            if ex.preconditions_pass() || label == "subadditivity" {
                row.soundness = soundness(opts.compare_exact, v, &ex.exact);
                row.bound_value = BoundCell::Value(v.clone());
            } else {
                row.bound_value = BoundCell::Inapplicable;
            }
            rows.push(row);
        }
    }
    let violated = rows.iter().any(|r| r.soundness == Soundness::Violated) || (opts.compare_exact && !consistent);

    if opts.csv {
        write_csv(&rows, out)?;
    } else {
        writeln!(out, "source: {}   targets: {}", net.source(), node)?;
        writeln!(
            out,
            "exact: tau_max = {}   leakage = {}",
            fmt_rational(exact),
            log_text(exact)
        )?;
        if let Some(q) = &rep.query {
            writeln!(out, "peel step: U = {}, V = {{{}}}", q.u, q.v_set.join(", "))?;
        }
        for l in &lines {
            match &l.value {
                Ok(v) => {
                    let mark = match soundness(opts.compare_exact, v, exact) {
                        Soundness::NotChecked => String::new(),
                        Soundness::Ok => "   [OK]".into(),
                        Soundness::Violated => "   [VIOLATED]".into(),
                    };
                    writeln!(
                        out,
                        "{:<14} = {}   log = {}   gap = {}{mark}",
                        l.label,
                        fmt_rational(v),
                        log_text(v),
                        fmt_rational(&(v - exact))
                    )?;
                }
                Err(why) => writeln!(out, "{:<14} = inapplicable ({why})", l.label)?,
            }
            if !l.checks.is_empty() {
                writeln!(out, "  preconditions: {}", l.checks.join("  "))?;
            }
        }
        for (ex, ex_targets) in &examples {
            let roles: Vec<String> = ex.roles.iter().map(|(r, id)| format!("{r}={id}")).collect();
            writeln!(out, "{} shape ({}), targets {}:", ex.name, roles.join(" "), ex_targets.join(","))?;
            writeln!(out, "  exact = {}", fmt_rational(&ex.exact))?;
            for (label, v) in &ex.entries {
                let gap = if is_exact_bound(label) {
                    format!("   gap = {}", fmt_rational(&(v - &ex.exact)))
                } else {
                    String::new()
                };
                writeln!(out, "  {label} = {}{gap}", fmt_rational(v))?;
            }
            for (label, v) in &ex.log_entries {
                writeln!(out, "  {label} = {}", float_text(*v))?;
            }
            writeln!(out, "  preconditions: {}", check_texts(&ex.preconditions).join("  "))?;
            writeln!(
                out,
                "  consistent: {}   sound: {}",
                if ex.consistent { "yes" } else { "no" },
                if ex.sound { "yes" } else { "no" }
            )?;
        }
    }
    Ok(if violated { EXIT_INVALID } else { EXIT_OK })
}

fn tuple_text(t: &[usize], alphabet: &[String]) -> String {
    let parts: Vec<&str> = t.iter().map(|&y| alphabet[y].as_str()).collect();
    format!("({})", parts.join(", "))
}

fn dump(c: &Coupling, out: &mut dyn Write) -> Result<()> {
    for (t, w) in c.mass() {
        writeln!(out, "  {}  {}", tuple_text(t, c.alphabet()), fmt_rational(w))?;
    }
    Ok(())
}

fn ok(flag: bool) -> &'static str {
    if flag {
        "OK"
    } else {
        "FAILED"
    }
}

/// Marginal, union and intersection checks on a coupling claimed minimal.
fn verify_minimal(c: &Coupling, pmfs: &[Pmf], out: &mut dyn Write) -> Result<i32> {
    let marginals = c.check().is_ok();
    let target = tau_max(&DiscreteChannel::from_pmfs(pmfs)?);
    let union = c.union_mass() == target;
    let inter = verify_intersection_property(c, pmfs).holds;
    writeln!(
        out,
        "verification: marginals {}, union=tau_max {}, intersection property {}",
        ok(marginals),
        ok(union),
        ok(inter)
    )?;
    if marginals && union && inter {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Check("coupling does not reach tau_max with the intersection property".into()))
    }
}

fn print_family_summary(pmfs: &[Pmf], out: &mut dyn Write) -> Result<Rational> {
    let ch = DiscreteChannel::from_pmfs(pmfs)?;
    let t = tau_max(&ch);
    let t2 = tau_max2(&ch).map(|v| fmt_rational(&v)).unwrap_or_else(|_| "undefined".into());
    writeln!(out, "marginals: {}   tau_max = {}   tau_max2 = {}", pmfs.len(), fmt_rational(&t), t2)?;
    Ok(t)
}

fn print_n4(b: &N4Coupling, out: &mut dyn Write) -> Result<()> {
    let ing = &b.ingredients;
    let w = &b.weights;
    writeln!(
        out,
        "condition: {} >= {}",
        fmt_rational(&ing.condition_lhs()),
        fmt_rational(&ing.condition_rhs())
    )?;
    writeln!(
        out,
        "weights: a = {}, b = {}, c = {}; alpha = [{}]; residual product = {}",
        fmt_rational(&w.abc.0),
        fmt_rational(&w.abc.1),
        fmt_rational(&w.abc.2),
        w.alpha.iter().map(fmt_rational).collect::<Vec<_>>().join(", "),
        fmt_rational(&w.residual_product)
    )?;
    let betas: Vec<String> = w
        .beta
        .iter()
        .map(|((i, j), v)| format!("beta_{}{} = {}", i + 1, j + 1, fmt_rational(v)))
        .collect();
    writeln!(out, "         {}", betas.join(", "))?;
    Ok(())
}

pub fn couple(path: &Path, mode: CoupleMode, max_atoms: usize, out: &mut dyn Write) -> Result<i32> {
    let family = load_family(path)?;
    let pmfs = family.y_family();
    match mode {
        CoupleMode::Lp => {
            let target = print_family_summary(&pmfs, out)?;
            let r = min_union_coupling(&pmfs)?;
            let relation = if r.optimal_value == target {
                "optimum = tau_max".to_string()
            } else {
                format!("optimum > tau_max by {}", fmt_rational(&(&r.optimal_value - &target)))
            };
            writeln!(out, "lp optimum = {}   {relation}", fmt_rational(&r.optimal_value))?;
            writeln!(out, "witness:")?;
            dump(&r.witness, out)?;
            let marginals = r.witness.check().is_ok();
            let union = r.witness.union_mass() == r.optimal_value;
            writeln!(out, "verification: marginals {}, union=optimum {}", ok(marginals), ok(union))?;
            if !(marginals && union) {
                return Err(CliError::Check("LP witness does not match its optimum".into()));
            }
            Ok(EXIT_OK)
        }
        CoupleMode::N4 => {
            print_family_summary(&pmfs, out)?;
            let b = build_n4_coupling(&pmfs)?;
            print_n4(&b, out)?;
            writeln!(out, "coupling:")?;
            dump(&b.coupling, out)?;
            verify_minimal(&b.coupling, &pmfs, out)
        }
        CoupleMode::Closed => {
            print_family_summary(&pmfs, out)?;
            let (c, form) = closed_form_minimal_coupling(&pmfs)?;
            writeln!(out, "closed form: {form:?}")?;
            writeln!(out, "coupling:")?;
            dump(&c, out)?;
            verify_minimal(&c, &pmfs, out)
        }
        CoupleMode::Simul => {
            let sources = family.joints()?;
            let target = print_family_summary(&pmfs, out)?;
            let sc = build_simultaneous_coupling(&sources, IngredientSource::Auto)?;
            sc.verify()?;
            let atoms = sc.materialize(max_atoms)?;
            writeln!(out, "ingredient: {:?}", sc.ingredient_kind())?;
            writeln!(
                out,
                "c_XY = {}   c_Y = {}   f = {}   Y-union = {}",
                fmt_rational(sc.c_xy()),
                fmt_rational(sc.c_y()),
                fmt_rational(&sc.f_quantity()),
                fmt_rational(&sc.y_union_mass())
            )?;
            writeln!(out, "atoms:")?;
            let xa = sources[0].x_alphabet();
            let ya = sources[0].y_alphabet();
            for ((xs, ys), w) in &atoms {
                writeln!(out, "  x={} y={}  {}", tuple_text(xs, xa), tuple_text(ys, ya), fmt_rational(w))?;
            }
            let mut pairs_ok = true;
            for (i, s) in sources.iter().enumerate() {
                let mut got = vec![vec![Rational::zero(); ya.len()]; xa.len()];
                for ((xs, ys), w) in &atoms {
                    got[xs[i]][ys[i]] += w;
                }
                pairs_ok &= got.as_slice() == s.table();
            }
            let union = sc.y_union_mass() == target;
            let ingredient = &y_marginalization(&atoms) == sc.ingredient().mass();
            writeln!(
                out,
                "verification: joint marginals {}, Y-union=tau_max {}, Y-part=ingredient {}",
                ok(pairs_ok),
                ok(union),
                ok(ingredient)
            )?;
            if pairs_ok && union && ingredient {
                Ok(EXIT_OK)
            } else {
                Err(CliError::Check("simultaneous coupling failed its checks".into()))
            }
        }
    }
}

/// Parses `start:end:step` into the inclusive list of values.
pub fn parse_range(text: &str) -> Result<Vec<Rational>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, s] = parts.as_slice() else {
        return Err(CliError::Usage(format!("range must be start:end:step, got `{text}`")));
    };
    let (a, b, s) = (parse_rational(a)?, parse_rational(b)?, parse_rational(s)?);
    if s <= Rational::zero() {
        return Err(CliError::Usage("range step must be positive".into()));
    }
    if a > b {
        return Err(CliError::Usage("range start exceeds its end".into()));
    }
    let mut out = Vec::new();
    let mut v = a;
    while v <= b {
        out.push(v.clone());
        v += &s;
    }
    Ok(out)
}

pub fn sweep(
    args: &NetArgs,
    param: &str,
    range: &str,
    source: Option<&str>,
    targets: &[String],
    out: &mut dyn Write,
) -> Result<i32> {
    let values = parse_range(range)?;
    let base = parse_assignments(&args.set)?;
    let mut rows = Vec::new();
    for v in &values {
        let mut params = base.clone();
        params.insert(param.to_string(), v.clone());
        let net = build_net(args, &params, source)?;
        let t = if targets.is_empty() { default_targets(&net)? } else { targets.to_vec() };
        let rep = bound_report(&net, &t)?;
        let lines = bound_lines(&rep, MethodArg::All)?;
        let mut row = vec![fmt_rational(v), fmt_rational(&rep.exact_tau_max)];
        for l in &lines {
            row.push(match &l.value {
                Ok(x) => fmt_rational(x),
                Err(_) => crate::report::INAPPLICABLE.to_string(),
            });
        }
        rows.push(row);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([param, "exact", "theorem2", "corollary1", "recursive", "subadditivity"])
        .map_err(std::io::Error::from)?;
    for row in &rows {
        w.write_record(row).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

pub fn format(args: &NetArgs, out: &mut dyn Write) -> Result<i32> {
    let net = load_net(args, None)?;
    out.write_all(write_network(&net).as_bytes())?;
    Ok(EXIT_OK)
}

pub fn generate(seed: u64, nodes: usize, alphabet: usize, out: &mut dyn Write) -> Result<i32> {
    if nodes < 2 || alphabet < 2 {
        return Err(CliError::Usage("need at least 2 nodes and alphabets of size 2".into()));
    }
    let net = random_network(
        &mut seeded(seed),
        NetworkParams {
            max_nodes: nodes,
            max_alphabet: alphabet,
        },
    );
    out.write_all(write_network(&net).as_bytes())?;
    Ok(EXIT_OK)
}
