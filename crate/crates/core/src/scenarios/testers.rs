//! Software fragments tested by a crowd under a confidentiality rule: no
//! tester may be entrusted with a set of fragments that reveals the whole.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::Serialize;

use crate::agent::Agent;
use crate::checker::{Counterexample, StateSlice, Status, Verdict};
use crate::engine::Trace;
use crate::logic::{AgentId, CrowdFormula, Direction, MessageType};
use crate::parser::{parse_formula, SpecDocument};

use super::nemo::crowd_id;
use super::{list, ScenarioError, Source};

pub const TESTERS_PROPERTY: &str = "<> B tested(S) & [] (M[up, ?x, tell] B ok(?i) -> B safe(?i, ?x))";

const INC: &str = "(A test -> <> A earn)";
const VOTERS: usize = 3;

pub fn testers_property() -> CrowdFormula {
    static P: OnceLock<CrowdFormula> = OnceLock::new();
    P.get_or_init(|| parse_formula(TESTERS_PROPERTY).expect("property parses")).clone()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestersConfig {
    pub n_fragments: usize,
    /// Fragment sets (1-based) whose conjunction implies the whole software.
    pub whole_implications: Vec<BTreeSet<usize>>,
    pub crowd_size: usize,
    /// When false, Testers deems every applicant safe without checking
    /// what it could deduce.
    pub safety: bool,
    /// Testers starts out believing `whole`.
    pub failsafe: bool,
    /// (crowd index, fragment) pairs where that tester finds a flaw and rejects.
    pub flawed: BTreeSet<(usize, usize)>,
}

impl TestersConfig {
    /// `n` fragments that together imply the whole, tested by `crowd_size` agents.
    pub fn new(n_fragments: usize, crowd_size: usize) -> Self {
        Self {
            n_fragments,
            whole_implications: vec![(1..=n_fragments).collect()],
            crowd_size,
            safety: true,
            failsafe: false,
            flawed: BTreeSet::new(),
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidConfig(m));
        if self.n_fragments == 0 {
            return bad("n_fragments must be positive".into());
        }
        if self.crowd_size == 0 {
            return bad("crowd_size must be positive".into());
        }
        for w in &self.whole_implications {
            if w.is_empty() {
                return bad("a whole implication needs at least one fragment".into());
            }
            if let Some(x) = w.iter().find(|&&x| x == 0 || x > self.n_fragments) {
                return bad(format!("fragment {x} is not in 1..={}", self.n_fragments));
            }
        }
        if let Some((i, x)) = self.flawed.iter().find(|(i, x)| *i >= self.crowd_size || *x == 0 || *x > self.n_fragments) {
            return bad(format!("flawed entry ({i}, {x}) is out of range"));
        }
        Ok(())
    }
}

fn sub(x: usize) -> String {
    format!("s{x}")
}

fn sigma(x: usize) -> String {
    format!("sigma{x}")
}

fn testers_agent(cfg: &TestersConfig) -> Vec<String> {
    let n = cfg.n_fragments;
    let mut content: Vec<String> = (1..=n).map(sub).collect();
    content.extend((0..cfg.crowd_size).map(crowd_id));
    let mut body = vec![format!("content {}", list(&content))];
    if cfg.failsafe {
        body.push("belief whole".into());
    }
    body.push(format!("rule forward: M[down, ?s, adv] {INC} -> M[up, CN, tell] M[down, ?s, adv] {INC}"));
    let reports: Vec<String> = (1..=n).map(|x| format!("M[down, {}, tell] B tested({})", sub(x), sigma(x))).collect();
    body.push(format!("rule done: {} -> B tested(S)", reports.join(" & ")));
    for (k, w) in cfg.whole_implications.iter().enumerate() {
        let parts: Vec<String> = w.iter().map(|&x| format!("B {}", sigma(x))).collect();
        body.push(format!("rule whole{}: {} -> B whole", k + 1, parts.join(" & ")));
    }
    for x in 1..=n {
        let (s, request) = (sub(x), format!("M[down, {}, tell] M[down, ?i, tell] I cx({})", sub(x), sub(x)));
        let voters: Vec<String> = (1..=VOTERS).map(|k| format!("?v{k}")).collect();
        let full: Vec<String> = voters.iter().map(|v| format!("B safe({v}, {s})")).collect();
        let mut premise = vec![request.clone(), "not B whole".to_string(), format!("not ({})", full.join(" & "))];
        let mut never = false;
        if cfg.safety {
            for w in cfg.whole_implications.iter().filter(|w| w.contains(&x)) {
                let others: Vec<String> = w.iter().filter(|&&z| z != x).map(|&z| format!("B safe(?i, {})", sub(z))).collect();
                if others.is_empty() {
                    never = true;
                } else {
                    premise.push(format!("not ({})", others.join(" & ")));
                }
            }
        }
        if !never {
            body.push(format!(
                "rule safe{x} distinct({}): {} -> B safe(?i, {s})",
                list(&voters),
                premise.join(" & ")
            ));
        }
        body.push(format!("rule vet{x}: {request} & B safe(?i, {s}) -> M[up, {s}, tell] B ok(?i)"));
    }
    body
}

fn fragment_agent(x: usize) -> Vec<String> {
    let (s, f) = (sub(x), sigma(x));
    let tally = |verdict: &str| {
        format!(
            "rule {verdict} distinct(?i, ?j, ?k): M[down, ?i, tell] B {verdict}({f}) & M[down, ?j, tell] B {verdict}({f}) \
             & (M[down, ?k, tell] B approve({f}) | M[down, ?k, tell] B reject({f})) -> B {verdict}({f})"
        )
    };
    vec![
        "context Testers".into(),
        format!("send M[up, Testers, adv] {INC}"),
        format!(
            "rule interest: M[down, ?i, tell] G cx({s}) & not B approve({f}) & not B reject({f}) \
             -> M[up, Testers, tell] M[down, ?i, tell] I cx({s})"
        ),
        format!("rule entrust: M[down, Testers, tell] B ok(?i) -> cn(?i) & M[up, ?i, do] I test({f})"),
        tally("approve"),
        tally("reject"),
        format!("rule report: B approve({f}) | B reject({f}) -> M[up, Testers, tell] B tested({f})"),
    ]
}

fn crowd_agent(cfg: &TestersConfig, i: usize) -> Vec<String> {
    let mut body = vec!["context Testers".into(), "goal earn".into(), "ability test".into()];
    let flawed: Vec<String> = cfg
        .flawed
        .iter()
        .filter(|(j, _)| *j == i)
        .map(|(_, x)| format!("flawed({})", sigma(*x)))
        .collect();
    if !flawed.is_empty() {
        body.push(format!("belief {}", list(&flawed)));
    }
    body.extend([
        format!("rule join: M[down, Testers, tell] M[down, ?x, adv] {INC} -> M[up, ?x, tell] G cx(?x)"),
        "rule adopt: M[down, ?x, do] I test(?f) -> I test(?f)".into(),
        "rule pass: A test & I test(?f) & not B flawed(?f) -> <> B approve(?f)".into(),
        "rule fail: A test & I test(?f) & B flawed(?f) -> <> B reject(?f)".into(),
        "rule only_approve: B approve(?f) -> B not reject(?f)".into(),
        "rule only_reject: B reject(?f) -> B not approve(?f)".into(),
        "rule send_approve: B approve(?f) & M[down, ?x, do] I test(?f) -> M[up, ?x, tell] B approve(?f)".into(),
        "rule send_reject: B reject(?f) & M[down, ?x, do] I test(?f) -> M[up, ?x, tell] B reject(?f)".into(),
    ]);
    body
}

pub fn build_testers(cfg: &TestersConfig) -> Result<SpecDocument, ScenarioError> {
    cfg.validate()?;
    let mut src = Source::default();
    src.agent("Testers", &testers_agent(cfg));
    for x in 1..=cfg.n_fragments {
        src.agent(&sub(x), &fragment_agent(x));
    }
    for i in 0..cfg.crowd_size {
        src.agent(&crowd_id(i), &crowd_agent(cfg, i));
    }
    Ok(src.finish())
}

/// Fragments whose testing an agent has been delegated, by number.
pub fn delegated_fragments(agent: &Agent, n_fragments: usize) -> BTreeSet<usize> {
    let tasks: BTreeMap<CrowdFormula, usize> = (1..=n_fragments)
        .map(|x| (parse_formula(&format!("I test({})", sigma(x))).expect("task parses"), x))
        .collect();
    agent
        .com
        .iter()
        .filter(|r| r.dir == Direction::Down && r.kind == MessageType::Do)
        .filter_map(|r| tasks.get(&r.body).copied())
        .collect()
}

/// Holds iff no crowd agent is ever delegated every fragment of some
/// whole implication.
pub fn check_confidentiality(trace: &Trace, cfg: &TestersConfig) -> Result<Verdict, ScenarioError> {
    let testers = AgentId::from("Testers");
    let last = trace.last();
    if !last.agents.contains_key(&testers) {
        return Err(ScenarioError::Mismatch("no Testers agent".into()));
    }
    let crowd: Vec<AgentId> = (0..cfg.crowd_size).map(|i| AgentId::from(crowd_id(i))).collect();
    if let Some(c) = crowd.iter().find(|c| !last.agents.contains_key(*c)) {
        return Err(ScenarioError::Mismatch(format!("crowd agent `{c}` is missing")));
    }
    let mut verdict = Verdict {
        status: Status::Holds,
        holds: true,
        subject: testers,
        property: "confidentiality".into(),
        rounds: trace.rounds(),
        quiescent: trace.quiescent,
        witness: None,
        counterexample: None,
        note: crate::checker::NOTE,
    };
    for (t, state) in trace.states.iter().enumerate() {
        for c in &crowd {
            let agent = &state.agents[c];
            let held = delegated_fragments(agent, cfg.n_fragments);
            if let Some(w) = cfg.whole_implications.iter().find(|w| w.is_subset(&held)) {
                let show = |s: &BTreeSet<usize>| s.iter().map(|&x| sigma(x)).collect::<Vec<_>>().join(", ");
                verdict.status = Status::Fails;
                verdict.holds = false;
                verdict.counterexample = Some(Counterexample {
                    round: t,
                    falsified: format!("{c} holds {{{}}} which implies whole via {{{}}}", show(&held), show(w)),
                    bindings: BTreeMap::from([("agent".to_string(), c.to_string())]),
                    trail: Vec::new(),
                    state: StateSlice::of(agent, t),
                });
                return Ok(verdict);
            }
        }
    }
    if !trace.quiescent {
        verdict.status = Status::Inconclusive;
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::check;
    use crate::engine::{compile_rules, run, EngineConfig};
    use crate::logic::PropFormula;

    fn run_cfg(cfg: &TestersConfig) -> Trace {
        run(&compile_rules(&build_testers(cfg).unwrap()).unwrap(), &EngineConfig::default()).unwrap()
    }

    fn believes(t: &Trace, who: &str, fact: &str) -> bool {
        let p: PropFormula = match parse_formula(fact).unwrap() {
            CrowdFormula::Bdi(crate::logic::BdiFormula::Prop(p)) => p,
            other => panic!("not a proposition: {other}"),
        };
        t.last().agents[&AgentId::from(who)].bel.contains(&p)
    }

    #[test]
    fn three_fragments_nine_testers() {
        let cfg = TestersConfig::new(3, 9);
        let t = run_cfg(&cfg);
        assert!(t.quiescent);
        assert!(believes(&t, "Testers", "tested(S)"));
        assert_eq!(check(&t, &testers_property(), &"Testers".into()).unwrap().status, Status::Holds);
        assert_eq!(check_confidentiality(&t, &cfg).unwrap().status, Status::Holds);
    }

    #[test]
    fn two_fragments_need_six_testers() {
        let small = TestersConfig::new(2, 3);
        let t = run_cfg(&small);
        assert!(!believes(&t, "Testers", "tested(S)"));
        assert_eq!(check_confidentiality(&t, &small).unwrap().status, Status::Holds);
        let t = run_cfg(&TestersConfig::new(2, 6));
        assert!(believes(&t, "Testers", "tested(S)"));
    }

    #[test]
    fn failsafe_assigns_nothing() {
        let cfg = TestersConfig {
            failsafe: true,
            ..TestersConfig::new(3, 9)
        };
        let t = run_cfg(&cfg);
        assert!(t.quiescent);
        let ok = parse_formula("B ok(?i)").unwrap();
        let sent_ok = t.last().agents[&AgentId::from("Testers")]
            .com
            .iter()
            .any(|r| r.dir == Direction::Up && crate::engine::unify_formula(&ok, &r.body, &mut Default::default()));
        assert!(!sent_ok);
        assert!(!believes(&t, "Testers", "tested(S)"));
    }

    #[test]
    fn removing_safety_leaks_the_whole() {
        let cfg = TestersConfig {
            safety: false,
            ..TestersConfig::new(3, 9)
        };
        let v = check_confidentiality(&run_cfg(&cfg), &cfg).unwrap();
        assert_eq!(v.status, Status::Fails);
        let cx = v.counterexample.unwrap();
        assert_eq!(cx.bindings["agent"], "c0");
    }

    #[test]
    fn no_implications_trivially_confidential() {
        let cfg = TestersConfig {
            whole_implications: Vec::new(),
            ..TestersConfig::new(2, 3)
        };
        let t = run_cfg(&cfg);
        assert_eq!(check_confidentiality(&t, &cfg).unwrap().status, Status::Holds);
        assert!(believes(&t, "Testers", "tested(S)"));
    }

    #[test]
    fn majority_decides() {
        let cfg = TestersConfig {
            flawed: BTreeSet::from([(0, 1), (2, 1)]),
            whole_implications: Vec::new(),
            ..TestersConfig::new(1, 3)
        };
        let t = run_cfg(&cfg);
        assert!(believes(&t, "s1", "reject(sigma1)"));
        assert!(!believes(&t, "s1", "approve(sigma1)"));
    }
}
