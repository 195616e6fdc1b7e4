//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero if any fails.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use crowdspec::agent::{Agent, AgentError};
use crowdspec::arbitrary::{arb_chain, arb_crowd, arb_formula, arb_labels, arb_ltl, node, trace_from_labels, RandomCrowd, RelayKind};
use crowdspec::checker::{check, eval, Status};
use crowdspec::engine::{compile_rules, run, EngineConfig, Trace};
use crowdspec::logic::{normalize_messages, AgentId, BdiFormula, CrowdFormula, Direction, MessageType, Modality, PropFormula};
use crowdspec::parser::{parse_formula, parse_props, parse_spec, pretty_print_props, pretty_print_spec};
use crowdspec::scenarios::{
    build_find_nemo, build_testers, check_confidentiality, nemo_derivation, nemo_property, testers_property,
    FindNemoConfig, TestersConfig, Topology,
};
use crowdspec::structure::{directly_reachable, neighbourhood};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn for_all<S: Strategy>(cases: u32, s: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&s, test).map_err(|e| e.to_string())
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    if t <= limit {
        Ok(t)
    } else {
        Err(format!("took {t:.2?}, limit {limit:?}"))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normalization() -> Outcome {
    let start = Instant::now();
    for_all(2000, arb_chain(5), |c| {
        let n = normalize_messages(&c.to_formula());
        let CrowdFormula::Msg { dir, target, kind, body } = &n else {
            return Err(TestCaseError::fail(format!("not a message: {n}")));
        };
        let (d0, t0, k0) = &c.links[0];
        let (dl, tl, kl) = c.links.last().unwrap();
        if dir != d0 || target != t0 {
            return Err(TestCaseError::fail(format!("outer orientation changed in {n}")));
        }
        if c.links.len() == 1 {
            proptest::prop_assert_eq!(kind, k0);
            proptest::prop_assert_eq!(body.as_ref(), &c.body);
        } else {
            proptest::prop_assert_eq!(*kind, MessageType::Tell, "outer type of {}", n);
            let CrowdFormula::Msg { dir: di, target: ti, kind: ki, body: bi } = body.as_ref() else {
                return Err(TestCaseError::fail(format!("inner message lost in {n}")));
            };
            proptest::prop_assert_eq!((di, ti, ki), (dl, tl, kl), "inner message of {}", n);
            proptest::prop_assert_eq!(bi.as_ref(), &c.body);
        }
        proptest::prop_assert!(n.max_message_chain() <= 2);
        proptest::prop_assert_eq!(normalize_messages(&n), n);
        Ok(())
    })?;
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!("2000 chains in {t:.2?}"))
}

/// Reachability recomputed from the generator's description by breadth-first search.
fn bfs_reach(c: &RandomCrowd, src: usize) -> BTreeSet<usize> {
    let relays = |k: usize| matches!(c.relay[k], RelayKind::Relay | RelayKind::Renamed);
    let contexts = |a: usize| -> BTreeSet<usize> {
        c.edges.iter().filter(|&&(k, m)| m == a && relays(k)).map(|&(k, _)| k).collect()
    };
    let content = |k: usize| -> BTreeSet<usize> { c.edges.iter().filter(|&&(x, _)| x == k).map(|&(_, m)| m).collect() };
    let linked = |i: usize, j: usize| {
        i != j && {
            let (ci, cj) = (contexts(i), contexts(j));
            ci.iter().any(|&a| cj.iter().any(|&b| a == b || !content(a).is_disjoint(&content(b))))
        }
    };
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([src]);
    while let Some(i) = queue.pop_front() {
        for j in 0..c.size {
            if j != src && !seen.contains(&j) && linked(i, j) {
                seen.insert(j);
                queue.push_back(j);
            }
        }
    }
    seen
}

fn reachability() -> Outcome {
    let start = Instant::now();
    for_all(200, arb_crowd(12), |c| {
        let sys = compile_rules(&c.document()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for i in 0..c.size {
            let got = neighbourhood(&sys, &node(i)).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let want: BTreeSet<AgentId> = bfs_reach(&c, i).into_iter().map(node).collect();
            proptest::prop_assert_eq!(&got.neighbourhood, &want, "from n{} in\n{}", i, c.source());
            for (id, path) in &got.witness_paths {
                proptest::prop_assert!(path.first() == Some(&node(i)) && path.last() == Some(id));
                for w in path.windows(2) {
                    proptest::prop_assert!(directly_reachable(&sys, &w[0], &w[1]).unwrap_or(false));
                }
            }
        }
        Ok(())
    })?;
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("200 topologies in {t:.2?}"))
}

fn run_doc(doc: &crowdspec::parser::SpecDocument) -> Trace {
    run(&compile_rules(doc).expect("compiles"), &EngineConfig::default()).expect("runs")
}

fn find_nemo_holds() -> Outcome {
    let mut slowest = Duration::ZERO;
    for n in [3, 10, 50, 100] {
        let able = n / 2;
        let cfg = FindNemoConfig::new(n, [able], Topology::Single);
        let start = Instant::now();
        let doc = build_find_nemo(&cfg).map_err(|e| e.to_string())?;
        let sys = compile_rules(&doc).map_err(|e| e.to_string())?;
        let able_id = AgentId::new(format!("c{able}"));
        let ngh = neighbourhood(&sys, &"seeker".into()).map_err(|e| e.to_string())?;
        ensure(ngh.neighbourhood.contains(&able_id), || format!("n={n}: {able_id} not in NGH(seeker)"))?;
        let trace = run(&sys, &EngineConfig::default()).map_err(|e| e.to_string())?;
        let v = check(&trace, &nemo_property(), &"seeker".into()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        ensure(v.status == Status::Holds, || format!("n={n}: property {:?}", v.status))?;
        ensure(trace.quiescent && trace.rounds() <= 10, || {
            format!("n={n}: quiescent={} after {} rounds", trace.quiescent, trace.rounds())
        })?;
        let chain = nemo_derivation(&trace, &able_id).ok_or_else(|| format!("n={n}: derivation chain missing"))?;
        let expected = [
            (able_id.clone(), MessageType::Adv),
            ("seeker".into(), MessageType::Tell),
            (able_id.clone(), MessageType::Do),
            ("seeker".into(), MessageType::Tell),
        ];
        for (step, (who, kind)) in chain.iter().zip(&expected) {
            ensure(&step.receiver == who && step.message.contains(kind.keyword()), || {
                format!("n={n}: unexpected step {step:?}")
            })?;
        }
        ensure(chain.windows(2).all(|w| w[0].round < w[1].round), || format!("n={n}: steps out of order {chain:?}"))?;
        if n == 100 {
            ensure(elapsed < Duration::from_secs(2), || format!("n=100 took {elapsed:.2?}"))?;
        }
    }
    Ok(format!("sizes 3, 10, 50, 100 hold in <= 10 rounds; slowest {slowest:.2?}"))
}

fn find_nemo_fails() -> Outcome {
    let cases = [
        FindNemoConfig::new(10, [], Topology::Single),
        FindNemoConfig::new(10, [8], Topology::Isolated),
        FindNemoConfig::new(50, [], Topology::Chained),
    ];
    for cfg in &cases {
        let doc = build_find_nemo(cfg).map_err(|e| e.to_string())?;
        let sys = compile_rules(&doc).map_err(|e| e.to_string())?;
        let ngh = neighbourhood(&sys, &"seeker".into()).map_err(|e| e.to_string())?;
        ensure(cfg.able.iter().all(|i| !ngh.neighbourhood.contains(&AgentId::new(format!("c{i}")))), || {
            format!("{cfg:?}: able agent is reachable")
        })?;
        let trace = run(&sys, &EngineConfig::default()).map_err(|e| e.to_string())?;
        let v = check(&trace, &nemo_property(), &"seeker".into()).map_err(|e| e.to_string())?;
        ensure(v.status == Status::Fails && v.counterexample.is_some(), || {
            format!("{cfg:?}: {:?} counterexample={}", v.status, v.counterexample.is_some())
        })?;
    }
    Ok("no able agent, or able agent outside NGH, fails with a counterexample".into())
}

fn sent_ok(trace: &Trace) -> usize {
    trace.last().agents[&AgentId::from("Testers")]
        .com
        .iter()
        .filter(|r| r.dir == Direction::Up && r.kind == MessageType::Tell && r.body.to_string().starts_with("B ok("))
        .count()
}

fn believes(trace: &Trace, round: usize, who: &str, fact: &str) -> bool {
    let p = match parse_formula(fact).expect("fact parses") {
        CrowdFormula::Bdi(BdiFormula::Prop(p)) => p,
        other => panic!("not a proposition: {other}"),
    };
    trace.states[round].agents[&AgentId::from(who)].bel.contains(&p)
}

fn testers() -> Outcome {
    let mut at_six = Duration::ZERO;
    for n in [2, 3, 6] {
        let cfg = TestersConfig::new(n, 3 * n);
        let start = Instant::now();
        let trace = run_doc(&build_testers(&cfg).map_err(|e| e.to_string())?);
        let v = check(&trace, &testers_property(), &"Testers".into()).map_err(|e| e.to_string())?;
        let c = check_confidentiality(&trace, &cfg).map_err(|e| e.to_string())?;
        if n == 6 {
            at_six = start.elapsed();
            let agents = trace.last().agents.len() - 1 - n;
            ensure(agents == 18, || format!("n=6 has {agents} crowd agents"))?;
            ensure(at_six < Duration::from_secs(5), || format!("n=6 took {at_six:.2?}"))?;
        }
        ensure(v.status == Status::Holds, || format!("n={n}: property {:?}", v.status))?;
        ensure(c.status == Status::Holds, || format!("n={n}: confidentiality {:?}", c.status))?;

        let safe = TestersConfig { failsafe: true, ..cfg.clone() };
        let trace = run_doc(&build_testers(&safe).map_err(|e| e.to_string())?);
        ensure(sent_ok(&trace) == 0, || format!("n={n}: fail-safe sent {} ok messages", sent_ok(&trace)))?;
        ensure((0..trace.states.len()).all(|r| !believes(&trace, r, "Testers", "tested(S)")), || {
            format!("n={n}: fail-safe believed tested(S)")
        })?;
    }
    Ok(format!("n = 2, 3, 6 hold with confidentiality; fail-safe silent; n=6 in {at_six:.2?}"))
}

fn voting() -> Outcome {
    for pattern in 0u8..8 {
        let flawed: BTreeSet<(usize, usize)> = (0..3).filter(|i| pattern >> i & 1 == 1).map(|i| (i, 1)).collect();
        let reject = flawed.len() >= 2;
        let cfg = TestersConfig {
            flawed,
            whole_implications: Vec::new(),
            ..TestersConfig::new(1, 3)
        };
        let trace = run_doc(&build_testers(&cfg).map_err(|e| e.to_string())?);
        let last = trace.rounds();
        let (a, r) = (
            believes(&trace, last, "s1", "approve(sigma1)"),
            believes(&trace, last, "s1", "reject(sigma1)"),
        );
        ensure(a == !reject && r == reject, || format!("pattern {pattern:03b}: approve={a} reject={r}"))?;
    }
    let p = PropFormula::atom("p");
    let mut agent = Agent::new("a");
    let mixed = PropFormula::and(p.clone(), PropFormula::not(p.clone()));
    ensure(matches!(agent.assert_fact(Modality::Belief, &mixed), Err(AgentError::Conflict(_))), || {
        "p & not p was accepted".into()
    })?;
    agent.assert_fact(Modality::Belief, &p).map_err(|e| e.to_string())?;
    let against = PropFormula::and(PropFormula::atom("q"), PropFormula::not(p));
    ensure(matches!(agent.assert_fact(Modality::Belief, &against), Err(AgentError::Conflict(_))), || {
        "q & not p was accepted over p".into()
    })?;
    ensure(!agent.holds_fact(Modality::Belief, &PropFormula::atom("q")), || "rejected assertion left q behind".into())?;
    Ok("all 8 vote patterns follow the majority; contradictions rejected".into())
}

fn label_atom(f: &CrowdFormula) -> &str {
    match f {
        CrowdFormula::Msg { .. } => "m",
        CrowdFormula::Bdi(BdiFormula::Modal(Modality::Belief, PropFormula::Atom(a))) => a,
        other => panic!("unexpected atom {other}"),
    }
}

/// Direct lasso semantics: position `i` of the word sees `labels[min(i, n-1)]`
/// and quantifiers range over the unrolled horizon.
fn lasso(f: &CrowdFormula, labels: &[BTreeSet<String>], i: usize) -> bool {
    let n = labels.len();
    let at = |k: usize| &labels[k.min(n - 1)];
    let horizon = 2 * n;
    match f {
        CrowdFormula::True => true,
        CrowdFormula::Msg { .. } => at(i).contains("m"),
        CrowdFormula::Bdi(BdiFormula::Not(b)) => !lasso(&CrowdFormula::Bdi((**b).clone()), labels, i),
        CrowdFormula::Bdi(BdiFormula::And(a, b)) => {
            lasso(&CrowdFormula::Bdi((**a).clone()), labels, i) && lasso(&CrowdFormula::Bdi((**b).clone()), labels, i)
        }
        CrowdFormula::Bdi(_) => at(i).contains(label_atom(f)),
        CrowdFormula::Not(a) => !lasso(a, labels, i),
        CrowdFormula::And(a, b) => lasso(a, labels, i) && lasso(b, labels, i),
        CrowdFormula::Next(a) => lasso(a, labels, (i + 1).min(horizon)),
        CrowdFormula::Eventually(a) => (i..=horizon.max(i)).any(|j| lasso(a, labels, j)),
        CrowdFormula::Until(a, b) => {
            (i..=horizon.max(i)).any(|j| lasso(b, labels, j) && (i..j).all(|k| lasso(a, labels, k)))
        }
        other => panic!("not generated: {other}"),
    }
}

fn ltl() -> Outcome {
    let start = Instant::now();
    for_all(1000, (arb_ltl(4), arb_labels(6)), |(f, labels)| {
        let trace = trace_from_labels(&labels);
        for t in 0..labels.len() {
            let got = eval(&trace, &f, t, &"s".into()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            proptest::prop_assert_eq!(got, lasso(&f, &labels, t), "{} at {} over {:?}", f, t, labels);
        }
        Ok(())
    })?;
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("1000 formulas in {t:.2?}"))
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_files(ext: &str) -> Result<Vec<PathBuf>, String> {
    let mut out: Vec<PathBuf> = fs::read_dir(corpus())
        .map_err(|e| format!("corpus: {e}"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    out.sort();
    ensure(!out.is_empty(), || format!("no .{ext} files in the corpus"))?;
    Ok(out)
}

fn round_trip() -> Outcome {
    let mut files = 0;
    for path in corpus_files("crowd")? {
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let doc = parse_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let printed = pretty_print_spec(&doc);
        let again = parse_spec(&printed).map_err(|e| format!("{}: reprint: {e}", path.display()))?;
        ensure(again == doc && pretty_print_spec(&again) == printed, || format!("{} changed on round trip", path.display()))?;
        files += 1;
    }
    for path in corpus_files("props")? {
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let props = parse_props(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let again = parse_props(&pretty_print_props(&props)).map_err(|e| format!("{}: reprint: {e}", path.display()))?;
        ensure(again == props, || format!("{} changed on round trip", path.display()))?;
        files += 1;
    }
    for_all(1000, arb_formula(6), |f| {
        let text = f.to_string();
        let back = parse_formula(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        proptest::prop_assert_eq!(&back, &f, "printed as {}", text);
        Ok(())
    })?;
    Ok(format!("{files} corpus files and 1000 generated formulas"))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_crowdspec");
    let files = corpus_files("crowd")?;
    for path in &files {
        let once = || {
            Command::new(bin)
                .args(["run", "--json"])
                .arg(path)
                .env_remove("CROWDSPEC_MAX_ROUNDS")
                .output()
                .map_err(|e| e.to_string())
        };
        let (a, b) = (once()?, once()?);
        ensure(a.status.code() == Some(0), || {
            format!("{}: exit {:?}: {}", path.display(), a.status.code(), String::from_utf8_lossy(&a.stderr))
        })?;
        ensure(!a.stdout.is_empty() && a.stdout == b.stdout, || format!("{}: outputs differ", path.display()))?;
    }
    Ok(format!("{} corpus files, identical JSON twice", files.len()))
}

fn main() {
    let checks: [Check; 9] = [
        ("message normalization", normalization),
        ("neighbourhood vs closure", reachability),
        ("find Nemo holds", find_nemo_holds),
        ("find Nemo fails", find_nemo_fails),
        ("testers", testers),
        ("2-of-3 voting", voting),
        ("LTL vs lasso oracle", ltl),
        ("parser round trip", round_trip),
        ("deterministic runs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in checks.iter().enumerate() {
        match f() {
            Ok(detail) => println!("[{}] PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[{}] FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
