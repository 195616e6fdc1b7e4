//! Agents, the crowd system and state mutation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::engine::{compile_rule, Rule, RuleError};
use crate::logic::{
    expand_broadcast, normalize_messages_with, AgentId, BdiFormula, Binding, CrowdFormula, Direction, LogicError,
    MessageType, Modality, NormalizeOptions, PropFormula, Target, Term,
};
use crate::parser::SpecDocument;

/// One entry of an agent's communication log.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageRecord {
    pub dir: Direction,
    /// Receiver for sent records, sender for received ones.
    pub peer: AgentId,
    pub kind: MessageType,
    pub body: CrowdFormula,
    /// Send round for sent records, delivery round for received ones.
    pub round: usize,
}

impl MessageRecord {
    /// Builds a record whose operator chain is normalized.
    pub fn new(
        dir: Direction,
        peer: AgentId,
        kind: MessageType,
        body: CrowdFormula,
        round: usize,
        opts: NormalizeOptions,
    ) -> Self {
        let f = normalize_messages_with(&CrowdFormula::msg(dir, Target::Peer(Term::Id(peer.clone())), kind, body), opts);
        let CrowdFormula::Msg { dir, target, kind, body } = f else {
            unreachable!("normalizing a message yields a message")
        };
        let Target::Peer(Term::Id(peer)) = target else {
            unreachable!("outermost target is kept")
        };
        Self {
            dir,
            peer,
            kind,
            body: *body,
            round,
        }
    }

    pub fn as_formula(&self) -> CrowdFormula {
        CrowdFormula::msg(self.dir, Target::Peer(Term::Id(self.peer.clone())), self.kind, self.body.clone())
    }

    /// The record identity used for deduplication; the round is ignored.
    fn same_message(&self, other: &MessageRecord) -> bool {
        self.dir == other.dir && self.peer == other.peer && self.kind == other.kind && self.body == other.body
    }
}

impl Serialize for MessageRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("MessageRecord", 5)?;
        st.serialize_field("dir", &self.dir)?;
        st.serialize_field("peer", &self.peer)?;
        st.serialize_field("type", &self.kind)?;
        st.serialize_field("body", &self.body.to_string())?;
        st.serialize_field("round", &self.round)?;
        st.end()
    }
}

/// An attempted assertion whose complement is already held.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub agent: AgentId,
    pub set: &'static str,
    pub existing: String,
    pub incoming: String,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent `{}`: asserting `{}` contradicts `{}` in {}",
            self.agent, self.incoming, self.existing, self.set
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("not an atomic formula: {0}")]
    NotAtomic(String),
    #[error("formula is not ground: {0}")]
    NotGround(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("agent `{0}` cannot contain itself")]
    SelfContainment(AgentId),
    #[error("consistency violation: {0}")]
    Conflict(Conflict),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("agent `{agent}`, rule `{rule}`: {source}")]
    Rule {
        agent: AgentId,
        rule: String,
        #[source]
        source: RuleError,
    },
}

fn set_name(m: Modality) -> &'static str {
    match m {
        Modality::Belief => "bel",
        Modality::Goal => "goal",
        Modality::Intention => "int",
        Modality::Ability => "ablt",
    }
}

/// Removes double negations everywhere.
fn strip_double_negation(p: &PropFormula) -> PropFormula {
    match p {
        PropFormula::Not(inner) => match &**inner {
            PropFormula::Not(x) => strip_double_negation(x),
            other => PropFormula::not(strip_double_negation(other)),
        },
        PropFormula::And(a, b) => PropFormula::and(strip_double_negation(a), strip_double_negation(b)),
        other => other.clone(),
    }
}

/// Splits a formula into the set members it stands for: conjunctions are
/// flattened and double negations dropped.
pub fn simplify(p: &PropFormula) -> Vec<PropFormula> {
    let mut out = Vec::new();
    fn go(p: &PropFormula, out: &mut Vec<PropFormula>) {
        match p {
            PropFormula::And(a, b) => {
                go(a, out);
                go(b, out);
            }
            PropFormula::Not(inner) => match &**inner {
                PropFormula::Not(x) => go(x, out),
                other => out.push(PropFormula::not(strip_double_negation(other))),
            },
            other => out.push(other.clone()),
        }
    }
    go(p, &mut out);
    out
}

pub fn complement(l: &PropFormula) -> PropFormula {
    match l {
        PropFormula::Not(x) => (**x).clone(),
        other => PropFormula::not(other.clone()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    pub bel: BTreeSet<PropFormula>,
    pub goal: BTreeSet<PropFormula>,
    pub int: BTreeSet<PropFormula>,
    pub ablt: BTreeSet<PropFormula>,
    pub com: Vec<MessageRecord>,
    pub cn: BTreeSet<AgentId>,
    pub cx: BTreeSet<AgentId>,
    pub rules: Vec<Rule>,
}

impl Agent {
    pub fn new(id: impl Into<AgentId>) -> Self {
        Self {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn facts(&self, m: Modality) -> &BTreeSet<PropFormula> {
        match m {
            Modality::Belief => &self.bel,
            Modality::Goal => &self.goal,
            Modality::Intention => &self.int,
            Modality::Ability => &self.ablt,
        }
    }

    fn facts_mut(&mut self, m: Modality) -> &mut BTreeSet<PropFormula> {
        match m {
            Modality::Belief => &mut self.bel,
            Modality::Goal => &mut self.goal,
            Modality::Intention => &mut self.int,
            Modality::Ability => &mut self.ablt,
        }
    }

    /// Adds `φ` to the set for `m` in simplified form. Returns whether
    /// anything was added. Nothing is added when a conflict is reported.
    pub fn assert_fact(&mut self, m: Modality, phi: &PropFormula) -> Result<bool, AgentError> {
        if !phi.is_ground() {
            return Err(AgentError::NotGround(phi.to_string()));
        }
        let members = simplify(phi);
        let set = self.facts(m);
        for (i, l) in members.iter().enumerate() {
            let c = complement(l);
            if set.contains(&c) || members[..i].contains(&c) {
                return Err(AgentError::Conflict(Conflict {
                    agent: self.id.clone(),
                    set: set_name(m),
                    existing: c.to_string(),
                    incoming: l.to_string(),
                }));
            }
        }
        let set = self.facts_mut(m);
        let mut changed = false;
        for l in members {
            changed |= set.insert(l);
        }
        Ok(changed)
    }

    pub fn holds_fact(&self, m: Modality, phi: &PropFormula) -> bool {
        let set = self.facts(m);
        simplify(phi).iter().all(|l| set.contains(l))
    }

    /// Appends a record unless an identical message is already logged.
    pub fn log(&mut self, rec: MessageRecord) -> bool {
        if self.com.iter().any(|r| r.same_message(&rec)) {
            return false;
        }
        self.com.push(rec);
        true
    }

    pub fn has_record(&self, dir: Direction, peer: &AgentId, kind: MessageType, body: &CrowdFormula, opts: NormalizeOptions) -> bool {
        let probe = MessageRecord::new(dir, peer.clone(), kind, body.clone(), 0, opts);
        self.com.iter().any(|r| r.same_message(&probe))
    }

    /// Atomic satisfaction: modal membership, structural atoms and message
    /// records. A bare propositional formula is read against `bel`, and a
    /// broadcast message holds when every current member has the record.
    pub fn satisfies_atom(&self, atom: &CrowdFormula) -> Result<bool, AgentError> {
        self.satisfies_atom_with(atom, NormalizeOptions::default())
    }

    pub fn satisfies_atom_with(&self, atom: &CrowdFormula, opts: NormalizeOptions) -> Result<bool, AgentError> {
        if !atom.is_ground() {
            return Err(AgentError::NotGround(atom.to_string()));
        }
        match atom {
            CrowdFormula::True => Ok(true),
            CrowdFormula::Bdi(BdiFormula::Modal(m, p)) => Ok(self.holds_fact(*m, p)),
            CrowdFormula::Bdi(BdiFormula::Prop(p)) if !p.is_negation() => Ok(self.holds_fact(Modality::Belief, p)),
            CrowdFormula::Cn(Term::Id(j)) => Ok(self.cn.contains(j)),
            CrowdFormula::Cx(Term::Id(j)) => Ok(self.cx.contains(j)),
            CrowdFormula::Msg {
                dir,
                target: Target::Peer(Term::Id(peer)),
                kind,
                body,
            } => Ok(self.has_record(*dir, peer, *kind, body, opts)),
            CrowdFormula::Msg { dir, target, kind, body } => {
                let members = match target {
                    Target::ContentBroadcast => &self.cn,
                    Target::ContextBroadcast => &self.cx,
                    Target::Peer(_) => unreachable!("ground peer handled above"),
                };
                if *dir == Direction::Down {
                    return Err(LogicError::BroadcastReceive(atom.to_string()).into());
                }
                Ok(members.iter().all(|j| self.has_record(*dir, j, *kind, body, opts)))
            }
            _ => Err(AgentError::NotAtomic(atom.to_string())),
        }
    }
}

/// A message in flight.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Pending {
    pub sender: AgentId,
    pub receiver: AgentId,
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(serialize_with = "crate::agent::display_str")]
    pub body: CrowdFormula,
    pub sent: usize,
}

pub(crate) fn display_str<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// An assertion postponed by a `<>` consequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Scheduled {
    pub due: usize,
    pub owner: AgentId,
    pub rule: String,
    pub modality: Modality,
    pub fact: PropFormula,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrowdSystem {
    pub agents: BTreeMap<AgentId, Agent>,
    /// Declared but unmodeled agents. Messages to them are sunk.
    pub externals: BTreeSet<AgentId>,
    pub pending: Vec<Pending>,
    pub scheduled: Vec<Scheduled>,
    /// Initial sends not yet performed.
    pub initial: Vec<(AgentId, CrowdFormula)>,
    /// `(owner, rule, binding)` triples that already fired.
    pub fired: BTreeSet<(AgentId, String, Binding)>,
    pub round: usize,
    pub normalize: NormalizeOptions,
}

impl CrowdSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the initial system: facts, containment, compiled rules and the
    /// queued initial sends.
    pub fn from_document(doc: &SpecDocument) -> Result<Self, AgentError> {
        let mut sys = Self::new();
        for d in &doc.agents {
            if d.external {
                sys.externals.insert(d.id.clone());
            }
        }
        for d in doc.agents.iter().filter(|d| !d.external) {
            let mut a = Agent::new(d.id.clone());
            for m in Modality::ALL {
                for p in d.facts(m) {
                    a.assert_fact(m, p)?;
                }
            }
            for r in &d.rules {
                let rule = compile_rule(&d.id, r).map_err(|source| AgentError::Rule {
                    agent: d.id.clone(),
                    rule: r.name.clone(),
                    source,
                })?;
                a.rules.push(rule);
            }
            sys.agents.insert(a.id.clone(), a);
            for s in &d.sends {
                sys.initial.push((d.id.clone(), s.clone()));
            }
        }
        for d in doc.agents.iter().filter(|d| !d.external) {
            for m in &d.content {
                sys.add_containment(&d.id, m)?;
            }
            for c in &d.context {
                sys.add_containment(c, &d.id)?;
            }
        }
        Ok(sys)
    }

    pub fn agent(&self, id: &AgentId) -> Option<&Agent> {
        self.agents.get(id)
    }

    fn known(&self, id: &AgentId) -> bool {
        self.agents.contains_key(id) || self.externals.contains(id)
    }

    pub fn add_agent(&mut self, a: Agent) {
        self.agents.insert(a.id.clone(), a);
    }

    /// Makes `member` part of `container`'s content, keeping both sides in step.
    pub fn add_containment(&mut self, container: &AgentId, member: &AgentId) -> Result<bool, AgentError> {
        if container == member {
            return Err(AgentError::SelfContainment(container.clone()));
        }
        for id in [container, member] {
            if !self.known(id) {
                return Err(AgentError::UnknownAgent(id.clone()));
            }
        }
        let mut changed = false;
        if let Some(c) = self.agents.get_mut(container) {
            changed |= c.cn.insert(member.clone());
        }
        if let Some(m) = self.agents.get_mut(member) {
            changed |= m.cx.insert(container.clone());
        }
        Ok(changed)
    }

    pub fn remove_containment(&mut self, container: &AgentId, member: &AgentId) -> Result<bool, AgentError> {
        for id in [container, member] {
            if !self.known(id) {
                return Err(AgentError::UnknownAgent(id.clone()));
            }
        }
        let mut changed = false;
        if let Some(c) = self.agents.get_mut(container) {
            changed |= c.cn.remove(member);
        }
        if let Some(m) = self.agents.get_mut(member) {
            changed |= m.cx.remove(container);
        }
        Ok(changed)
    }

    /// Logs a sent record at the current round and queues the message for
    /// delivery. Returns false, and queues nothing, when the sender already
    /// sent the same message to the same peer.
    pub fn record_message(
        &mut self,
        sender: &AgentId,
        receiver: &AgentId,
        kind: MessageType,
        body: CrowdFormula,
    ) -> Result<bool, AgentError> {
        if !self.known(receiver) {
            return Err(AgentError::UnknownAgent(receiver.clone()));
        }
        let round = self.round;
        let opts = self.normalize;
        let a = self.agents.get_mut(sender).ok_or_else(|| AgentError::UnknownAgent(sender.clone()))?;
        let rec = MessageRecord::new(Direction::Up, receiver.clone(), kind, body, round, opts);
        let (kind, body) = (rec.kind, rec.body.clone());
        if !a.log(rec) {
            return Ok(false);
        }
        self.pending.push(Pending {
            sender: sender.clone(),
            receiver: receiver.clone(),
            kind,
            body,
            sent: round,
        });
        Ok(true)
    }

    /// Sends an outgoing message formula, expanding broadcast targets over
    /// the sender's current content or context. Returns the peers actually
    /// messaged.
    pub fn send(&mut self, sender: &AgentId, msg: &CrowdFormula) -> Result<Vec<AgentId>, AgentError> {
        let a = self.agents.get(sender).ok_or_else(|| AgentError::UnknownAgent(sender.clone()))?;
        let expanded = expand_broadcast(msg, &a.cn, &a.cx)?;
        let mut sent = Vec::new();
        for part in expanded.conjuncts() {
            match part {
                CrowdFormula::Msg {
                    dir: Direction::Up,
                    target: Target::Peer(Term::Id(peer)),
                    kind,
                    body,
                } => {
                    if self.record_message(sender, &peer, kind, *body)? {
                        sent.push(peer);
                    }
                }
                other => return Err(AgentError::NotAtomic(other.to_string())),
            }
        }
        Ok(sent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_formula, parse_spec};

    fn p(s: &str) -> PropFormula {
        match parse_formula(s).unwrap() {
            CrowdFormula::Bdi(BdiFormula::Prop(p)) => p,
            other => panic!("not propositional: {other}"),
        }
    }

    #[test]
    fn assert_is_idempotent_and_simplifies() {
        let mut a = Agent::new("c1");
        assert!(a.assert_fact(Modality::Belief, &p("approve(s1)")).unwrap());
        assert!(!a.assert_fact(Modality::Belief, &p("approve(s1)")).unwrap());
        a.assert_fact(Modality::Belief, &p("x & not not y")).unwrap();
        let members: Vec<String> = a.bel.iter().map(|f| f.to_string()).collect();
        assert_eq!(members, vec!["x", "y", "approve(s1)"]);
    }

    #[test]
    fn approve_and_reject_conflict() {
        let mut a = Agent::new("c1");
        a.assert_fact(Modality::Belief, &p("not reject(s1)")).unwrap();
        let err = a.assert_fact(Modality::Belief, &p("reject(s1)")).unwrap_err();
        let AgentError::Conflict(c) = err else { panic!("expected conflict") };
        assert_eq!(c.set, "bel");
        assert_eq!(c.existing, "not reject(s1)");
        assert!(!a.bel.contains(&p("reject(s1)")));
        assert!(a.assert_fact(Modality::Goal, &p("q & not q")).is_err());
        assert!(a.goal.is_empty());
    }

    #[test]
    fn atoms() {
        let mut a = Agent::new("seeker");
        a.assert_fact(Modality::Belief, &p("find_nemo")).unwrap();
        a.assert_fact(Modality::Goal, &p("earn")).unwrap();
        let inc = parse_formula("A find_nemo -> <> A earn").unwrap();
        a.log(MessageRecord::new(
            Direction::Down,
            "seeker".into(),
            MessageType::Adv,
            inc,
            1,
            NormalizeOptions::default(),
        ));
        let q = |s: &str| a.satisfies_atom(&parse_formula(s).unwrap()).unwrap();
        assert!(q("B find_nemo"));
        assert!(!q("G reward_x"));
        assert!(q("M[down, seeker, adv] (A find_nemo -> <> A earn)"));
        assert!(!q("M[down, seeker, tell] (A find_nemo -> <> A earn)"));
        assert!(matches!(
            a.satisfies_atom(&parse_formula("B p & B q").unwrap()),
            Err(AgentError::NotAtomic(_))
        ));
    }

    fn two() -> CrowdSystem {
        CrowdSystem::from_document(&parse_spec("agent seeker { content s1; }\nagent s1 { context seeker; }\nextern agent far;").unwrap()).unwrap()
    }

    #[test]
    fn record_message_queues_and_dedups() {
        let mut sys = two();
        let body = parse_formula("A find_nemo -> <> A earn").unwrap();
        assert!(sys.record_message(&"seeker".into(), &"s1".into(), MessageType::Adv, body.clone()).unwrap());
        assert!(!sys.record_message(&"seeker".into(), &"s1".into(), MessageType::Adv, body).unwrap());
        assert_eq!(sys.pending.len(), 1);
        assert_eq!(sys.agents[&AgentId::from("seeker")].com.len(), 1);
        assert!(sys.record_message(&"seeker".into(), &"far".into(), MessageType::Tell, parse_formula("B p").unwrap()).unwrap());
        assert!(matches!(
            sys.record_message(&"nobody".into(), &"s1".into(), MessageType::Tell, CrowdFormula::True),
            Err(AgentError::UnknownAgent(_))
        ));
    }

    #[test]
    fn broadcast_send_fans_out() {
        let mut sys = CrowdSystem::from_document(
            &parse_spec("agent k { content a, b; }\nagent a { context k; }\nagent b { context k; }").unwrap(),
        )
        .unwrap();
        let sent = sys.send(&"k".into(), &parse_formula("M[up, CN, tell] B p").unwrap()).unwrap();
        assert_eq!(sent, vec![AgentId::from("a"), AgentId::from("b")]);
        assert_eq!(sys.pending.len(), 2);
    }

    #[test]
    fn containment_keeps_duality() {
        let mut sys = two();
        let (s, c) = (AgentId::from("seeker"), AgentId::from("s1"));
        assert!(sys.remove_containment(&s, &c).unwrap());
        assert!(!sys.agents[&c].cx.contains(&s));
        assert!(sys.add_containment(&c, &s).unwrap());
        assert!(sys.agents[&s].cx.contains(&c) && sys.agents[&c].cn.contains(&s));
        assert!(matches!(sys.add_containment(&s, &s), Err(AgentError::SelfContainment(_))));
    }
}
