//! Synchronous round-based execution.
//!
//! Each step delivers every pending message, matures due assertions, finds
//! every enabled (rule, binding) pair against that state, and then applies
//! them in a fixed order: owners by id, rules in declaration order,
//! bindings sorted. A pair is re-checked just before it is applied, so an
//! earlier firing in the same round can disable a later one. A pair fires
//! at most once per run.

mod matcher;
mod rule;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::agent::{AgentError, Conflict, CrowdSystem, MessageRecord, Scheduled};
use crate::logic::{substitute, subst_prop, subst_term, AgentId, Binding, CrowdFormula, Direction, NormalizeOptions, Target, Term};
use crate::parser::SpecDocument;

pub use matcher::{holds, solve, unify_formula};
pub use rule::{compile_effects, compile_premise, compile_rule, Conjunction, Effect, Pattern, Rule, RuleError, RuleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictPolicy {
    /// Abort the run.
    #[default]
    Halt,
    /// Drop the offending assertion and continue.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub max_rounds: usize,
    /// Rounds between a `<>` consequence's premise and its assertion.
    pub delay: usize,
    pub conflict: ConflictPolicy,
    pub normalize: NormalizeOptions,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_rounds: 1000,
            delay: 1,
            conflict: ConflictPolicy::Halt,
            normalize: NormalizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// An initial send.
    Init,
    Deliver,
    /// Delivery to an external agent.
    Sink,
    Mature,
    Fire,
    /// An assertion dropped under the skip policy.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub round: usize,
    pub kind: EventKind,
    pub rule: Option<String>,
    pub owner: AgentId,
    pub bindings: BTreeMap<String, String>,
    pub effects: Vec<String>,
}

impl Event {
    fn new(round: usize, kind: EventKind, owner: &AgentId) -> Self {
        Self {
            round,
            kind,
            rule: None,
            owner: owner.clone(),
            bindings: BTreeMap::new(),
            effects: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("round {round}: {kind:?} event of `{owner}`{}: {conflict}", rule.as_ref().map(|r| format!(" (rule `{r}`)")).unwrap_or_default())]
    Conflict {
        round: usize,
        kind: EventKind,
        owner: AgentId,
        rule: Option<String>,
        conflict: Box<Conflict>,
    },
}

/// The states of a run and the events between them. `states[t]` is the
/// state after `t` steps; `events[t]` produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<CrowdSystem>,
    pub events: Vec<Vec<Event>>,
    /// The last state is a fixpoint: one more step changes nothing.
    pub quiescent: bool,
}

impl Trace {
    pub fn last(&self) -> &CrowdSystem {
        self.states.last().expect("a trace has at least one state")
    }

    /// Number of steps taken.
    pub fn rounds(&self) -> usize {
        self.states.len() - 1
    }

    pub fn all_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().flatten()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct AgentView<'a> {
            bel: Vec<String>,
            goal: Vec<String>,
            int: Vec<String>,
            ablt: Vec<String>,
            cn: Vec<&'a AgentId>,
            cx: Vec<&'a AgentId>,
            com: &'a [MessageRecord],
        }
        #[derive(Serialize)]
        struct Round<'a> {
            round: usize,
            agents: BTreeMap<&'a AgentId, AgentView<'a>>,
            events: &'a [Event],
        }
        #[derive(Serialize)]
        struct Out<'a> {
            rounds: Vec<Round<'a>>,
            quiescent: bool,
        }
        let strs = |s: &std::collections::BTreeSet<crate::logic::PropFormula>| s.iter().map(|p| p.to_string()).collect();
        let rounds = self
            .states
            .iter()
            .zip(&self.events)
            .enumerate()
            .map(|(t, (s, ev))| Round {
                round: t,
                agents: s
                    .agents
                    .iter()
                    .map(|(id, a)| {
                        (
                            id,
                            AgentView {
                                bel: strs(&a.bel),
                                goal: strs(&a.goal),
                                int: strs(&a.int),
                                ablt: strs(&a.ablt),
                                cn: a.cn.iter().collect(),
                                cx: a.cx.iter().collect(),
                                com: &a.com,
                            },
                        )
                    })
                    .collect(),
                events: ev,
            })
            .collect();
        serde_json::to_value(Out {
            rounds,
            quiescent: self.quiescent,
        })
        .expect("trace serializes")
    }
}

/// Builds the executable system for a parsed document.
pub fn compile_rules(doc: &SpecDocument) -> Result<CrowdSystem, AgentError> {
    CrowdSystem::from_document(doc)
}

fn show_binding(b: &Binding) -> BTreeMap<String, String> {
    b.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
}

fn conflict_of(e: AgentError) -> Result<Conflict, EngineError> {
    match e {
        AgentError::Conflict(c) => Ok(c),
        other => Err(other.into()),
    }
}

/// Handles a conflict according to the policy; returns the skip event.
fn on_conflict(
    cfg: &EngineConfig,
    mut ev: Event,
    conflict: Conflict,
) -> Result<Event, EngineError> {
    match cfg.conflict {
        ConflictPolicy::Halt => Err(EngineError::Conflict {
            round: ev.round,
            kind: ev.kind,
            owner: ev.owner,
            rule: ev.rule,
            conflict: Box::new(conflict),
        }),
        ConflictPolicy::Skip => {
            ev.kind = EventKind::Skipped;
            ev.effects.push(conflict.to_string());
            Ok(ev)
        }
    }
}

/// Performs the initial sends at the current round.
pub fn boot(sys: &mut CrowdSystem) -> Result<Vec<Event>, EngineError> {
    let mut events = Vec::new();
    for (owner, msg) in std::mem::take(&mut sys.initial) {
        let mut ev = Event::new(sys.round, EventKind::Init, &owner);
        for peer in sys.send(&owner, &msg)? {
            ev.effects.push(sent_effect(sys, &owner, &peer));
        }
        events.push(ev);
    }
    Ok(events)
}

fn sent_effect(sys: &CrowdSystem, owner: &AgentId, peer: &AgentId) -> String {
    let rec = sys.agents[owner]
        .com
        .iter()
        .rev()
        .find(|r| r.dir == Direction::Up && &r.peer == peer)
        .expect("record just logged");
    rec.as_formula().to_string()
}

fn deliver(sys: &mut CrowdSystem, round: usize, events: &mut Vec<Event>) {
    for p in std::mem::take(&mut sys.pending) {
        if sys.externals.contains(&p.receiver) {
            let mut ev = Event::new(round, EventKind::Sink, &p.receiver);
            ev.effects.push(format!("from {}: {}", p.sender, p.body));
            events.push(ev);
            continue;
        }
        let opts = sys.normalize;
        let Some(agent) = sys.agents.get_mut(&p.receiver) else { continue };
        let rec = MessageRecord::new(Direction::Down, p.sender.clone(), p.kind, p.body, round, opts);
        let mut ev = Event::new(round, EventKind::Deliver, &p.receiver);
        ev.effects.push(rec.as_formula().to_string());
        let received = rec.as_formula();
        agent.log(rec);
        // A received message may count as another one.
        let mut derived = Vec::new();
        for r in &agent.rules {
            if let RuleKind::Coercion { pattern, result } = &r.kind {
                let mut b = Binding::new();
                if unify_formula(&pattern.as_formula(), &received, &mut b) {
                    if let CrowdFormula::Msg {
                        dir,
                        target: Target::Peer(Term::Id(peer)),
                        kind,
                        body,
                    } = substitute(result, &b)
                    {
                        derived.push((r.name.clone(), MessageRecord::new(dir, peer, kind, *body, round, opts)));
                    }
                }
            }
        }
        for (name, d) in derived {
            ev.effects.push(format!("{} (by {name})", d.as_formula()));
            agent.log(d);
        }
        events.push(ev);
    }
}

fn mature(sys: &mut CrowdSystem, cfg: &EngineConfig, round: usize, events: &mut Vec<Event>) -> Result<(), EngineError> {
    let (due, later): (Vec<Scheduled>, Vec<Scheduled>) = std::mem::take(&mut sys.scheduled).into_iter().partition(|s| s.due <= round);
    sys.scheduled = later;
    for s in due {
        let mut ev = Event::new(round, EventKind::Mature, &s.owner);
        ev.rule = Some(s.rule.clone());
        let agent = sys.agents.get_mut(&s.owner).ok_or_else(|| AgentError::UnknownAgent(s.owner.clone()))?;
        match agent.assert_fact(s.modality, &s.fact) {
            Ok(_) => {
                ev.effects.push(format!("{} {}", s.modality.symbol(), s.fact));
                events.push(ev);
            }
            Err(e) => events.push(on_conflict(cfg, ev, conflict_of(e)?)?),
        }
    }
    Ok(())
}

/// Applies one firing. Returns the event, or a skip event under the skip policy.
fn apply(
    sys: &mut CrowdSystem,
    cfg: &EngineConfig,
    rule: &Rule,
    effects: &[Effect],
    b: &Binding,
    round: usize,
) -> Result<Event, EngineError> {
    let owner = &rule.owner;
    let mut ev = Event::new(round, EventKind::Fire, owner);
    ev.rule = Some(rule.name.clone());
    ev.bindings = show_binding(b);
    let assert = |sys: &mut CrowdSystem, ev: &mut Event, m, p: &crate::logic::PropFormula| -> Result<(), AgentError> {
        let fact = subst_prop(p, b);
        let agent = sys.agents.get_mut(owner).ok_or_else(|| AgentError::UnknownAgent(owner.clone()))?;
        if agent.assert_fact(m, &fact)? {
            ev.effects.push(format!("{} {}", m.symbol(), fact));
        }
        Ok(())
    };
    for e in effects {
        let r: Result<(), AgentError> = (|| {
            match e {
                Effect::Assert(m, p) => assert(sys, &mut ev, *m, p)?,
                Effect::Delayed(items) if cfg.delay <= 1 => {
                    for (m, p) in items {
                        assert(sys, &mut ev, *m, p)?;
                    }
                }
                Effect::Delayed(items) => {
                    for (m, p) in items {
                        let fact = subst_prop(p, b);
                        ev.effects.push(format!("scheduled {} {} for round {}", m.symbol(), fact, round + cfg.delay - 1));
                        sys.scheduled.push(Scheduled {
                            due: round + cfg.delay - 1,
                            owner: owner.clone(),
                            rule: rule.name.clone(),
                            modality: *m,
                            fact,
                        });
                    }
                }
                Effect::Send(msg) => {
                    let msg = substitute(msg, b);
                    for peer in sys.send(owner, &msg)? {
                        ev.effects.push(sent_effect(sys, owner, &peer));
                    }
                }
                Effect::AddContent(t) | Effect::AddContext(t) | Effect::RemoveContent(t) | Effect::RemoveContext(t) => {
                    let other = match subst_term(t, b) {
                        Term::Id(id) => id,
                        Term::Var(v) => return Err(AgentError::NotGround(format!("?{v}"))),
                    };
                    let (changed, text) = match e {
                        Effect::AddContent(_) => (sys.add_containment(owner, &other)?, format!("cn({other})")),
                        Effect::AddContext(_) => (sys.add_containment(&other, owner)?, format!("cx({other})")),
                        Effect::RemoveContent(_) => (sys.remove_containment(owner, &other)?, format!("not cn({other})")),
                        _ => (sys.remove_containment(&other, owner)?, format!("not cx({other})")),
                    };
                    if changed {
                        ev.effects.push(text);
                    }
                }
            }
            Ok(())
        })();
        if let Err(err) = r {
            return on_conflict(cfg, ev, conflict_of(err)?);
        }
    }
    Ok(ev)
}

/// One synchronous round. Initial sends still queued are performed first.
pub fn step(sys: &CrowdSystem, cfg: &EngineConfig) -> Result<(CrowdSystem, Vec<Event>), EngineError> {
    let mut next = sys.clone();
    let mut events = boot(&mut next)?;
    next.round += 1;
    let round = next.round;

    deliver(&mut next, round, &mut events);
    mature(&mut next, cfg, round, &mut events)?;

    // Candidates against the post-delivery state.
    let mut candidates: Vec<(AgentId, usize, usize, Binding)> = Vec::new();
    for (id, agent) in &next.agents {
        for (ri, rule) in agent.rules.iter().enumerate() {
            let RuleKind::Firing { alternatives, .. } = &rule.kind else { continue };
            let mut found: Vec<(Binding, usize)> = Vec::new();
            for (ai, alt) in alternatives.iter().enumerate() {
                for b in solve(agent, alt, &rule.distinct, Binding::new(), next.normalize)? {
                    if !next.fired.contains(&(id.clone(), rule.name.clone(), b.clone())) && !found.iter().any(|(f, _)| *f == b) {
                        found.push((b, ai));
                    }
                }
            }
            found.sort();
            candidates.extend(found.into_iter().map(|(b, ai)| (id.clone(), ri, ai, b)));
        }
    }

    for (id, ri, ai, b) in candidates {
        let agent = &next.agents[&id];
        let rule = agent.rules[ri].clone();
        let key = (id.clone(), rule.name.clone(), b.clone());
        if next.fired.contains(&key) {
            continue;
        }
        let RuleKind::Firing { alternatives, effects } = &rule.kind else { continue };
        if solve(agent, &alternatives[ai], &rule.distinct, b.clone(), next.normalize)?.is_empty() {
            continue;
        }
        next.fired.insert(key);
        events.push(apply(&mut next, cfg, &rule, effects, &b, round)?);
    }
    Ok((next, events))
}

/// No state change and nothing observable happened; firings whose every
/// effect was already in place do not count.
fn settled(a: &CrowdSystem, b: &CrowdSystem, events: &[Event]) -> bool {
    events.iter().all(|e| e.effects.is_empty())
        && a.agents == b.agents
        && a.pending.is_empty()
        && b.pending.is_empty()
        && a.scheduled.is_empty()
        && b.scheduled.is_empty()
}

/// Steps until quiescence or until `cfg.max_rounds` steps have been taken.
pub fn run(sys: &CrowdSystem, cfg: &EngineConfig) -> Result<Trace, EngineError> {
    let mut cur = sys.clone();
    cur.normalize = cfg.normalize;
    let init = boot(&mut cur)?;
    let mut trace = Trace {
        states: vec![cur],
        events: vec![init],
        quiescent: false,
    };
    for _ in 0..cfg.max_rounds {
        let (next, events) = step(trace.last(), cfg)?;
        if settled(trace.last(), &next, &events) {
            trace.quiescent = true;
            return Ok(trace);
        }
        trace.states.push(next);
        trace.events.push(events);
    }
    // The budget may run out exactly at a fixpoint.
    let (next, events) = step(trace.last(), cfg)?;
    trace.quiescent = settled(trace.last(), &next, &events);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_formula, parse_spec};

    fn system(src: &str) -> CrowdSystem {
        compile_rules(&parse_spec(src).unwrap()).unwrap()
    }

    #[test]
    fn empty_system_is_a_fixpoint() {
        let sys = CrowdSystem::new();
        let (next, events) = step(&sys, &EngineConfig::default()).unwrap();
        assert!(events.is_empty());
        assert_eq!(next.agents, sys.agents);
        let t = run(&sys, &EngineConfig::default()).unwrap();
        assert!(t.quiescent);
        assert_eq!(t.rounds(), 0);
    }

    #[test]
    fn delivery_takes_one_round() {
        let sys = system(
            "agent seeker { context s1; send M[up, s1, adv] (A x -> <> A earn); }\nagent s1 { content seeker; }",
        );
        let (s1, _) = step(&sys, &EngineConfig::default()).unwrap();
        let rec = &s1.agents[&AgentId::from("s1")].com[0];
        assert_eq!((rec.dir, rec.round), (Direction::Down, 1));
        assert_eq!(s1.agents[&AgentId::from("seeker")].com[0].round, 0);
    }

    #[test]
    fn extern_delivery_is_sunk() {
        let sys = system("extern agent far;\nagent a { send M[up, far, tell] B p; }");
        let t = run(&sys, &EngineConfig::default()).unwrap();
        assert!(t.all_events().any(|e| e.kind == EventKind::Sink));
        assert!(t.quiescent);
    }

    #[test]
    fn delayed_assertion() {
        let src = "agent a { ability x; intention x; rule done: A x & I x -> <> B x; }";
        for (d, expect) in [(1, 1), (2, 2), (3, 3)] {
            let cfg = EngineConfig { delay: d, ..Default::default() };
            let t = run(&system(src), &cfg).unwrap();
            let first = t
                .states
                .iter()
                .position(|s| s.agents[&AgentId::from("a")].bel.contains(&crate::logic::PropFormula::atom("x")))
                .unwrap();
            assert_eq!(first, expect, "delay {d}");
            assert!(t.quiescent);
        }
    }

    #[test]
    fn once_per_binding_and_quiescence() {
        let src = "agent k { content a, b; rule relay: (cn(?i) | cx(?i)) & M[down, ?i, tell] ?phi -> M[up, CN, tell] ?phi; }
                   agent a { context k; send M[up, k, tell] B p; }
                   agent b { context k; }";
        let t = run(&system(src), &EngineConfig::default()).unwrap();
        assert!(t.quiescent);
        let fires = t.all_events().filter(|e| e.kind == EventKind::Fire).count();
        assert_eq!(fires, 1);
        let b = &t.last().agents[&AgentId::from("b")];
        assert!(b.satisfies_atom(&parse_formula("M[down, k, tell] B p").unwrap()).unwrap());
    }

    #[test]
    fn conflict_policies() {
        let src = "agent a { belief not p; goal g; rule r: G g -> B p; }";
        let err = run(&system(src), &EngineConfig::default()).unwrap_err();
        assert!(matches!(err, EngineError::Conflict { round: 1, .. }));
        let cfg = EngineConfig {
            conflict: ConflictPolicy::Skip,
            ..Default::default()
        };
        let t = run(&system(src), &cfg).unwrap();
        assert!(t.all_events().any(|e| e.kind == EventKind::Skipped));
        assert!(t.quiescent);
    }

    #[test]
    fn budget_exhaustion() {
        let src = "agent a { ability x; intention x; rule done: A x & I x -> <> B x; }";
        let cfg = EngineConfig {
            delay: 5,
            max_rounds: 2,
            ..Default::default()
        };
        let t = run(&system(src), &cfg).unwrap();
        assert!(!t.quiescent);
        assert_eq!(t.rounds(), 2);
    }

    #[test]
    fn revalidation_blocks_second_grant() {
        // Both requests are enabled at once; only the first may be granted.
        let src = "agent t { content x, y;
                     rule grant: M[down, ?i, tell] B want & not (B granted(?a)) -> B granted(?i); }
                   agent x { context t; send M[up, t, tell] B want; }
                   agent y { context t; send M[up, t, tell] B want; }";
        let t = run(&system(src), &EngineConfig::default()).unwrap();
        let bel = &t.last().agents[&AgentId::from("t")].bel;
        assert_eq!(bel.len(), 1);
        assert!(bel.contains(&crate::logic::PropFormula::pred("granted", vec![Term::id("x")])));
    }
}
