//! Proptest strategies for formulas, message chains, containment
//! topologies and labelled traces.
//!
//! Formulas are built only through the smart constructors, so they are in
//! the canonical form the parser produces.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use crate::agent::{Agent, CrowdSystem, MessageRecord};
use crate::engine::Trace;
use crate::logic::{AgentId, CrowdFormula, Direction, MessageType, Modality, NormalizeOptions, PropFormula, Target, Term};
use crate::parser::{parse_spec, SpecDocument};

const ATOMS: [&str; 4] = ["p", "q", "r", "earn"];
const IDS: [&str; 3] = ["a", "b", "seeker"];
const VARS: [&str; 2] = ["x", "y"];

pub fn arb_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => prop::sample::select(&IDS[..]).prop_map(Term::id),
        1 => prop::sample::select(&VARS[..]).prop_map(Term::var),
    ]
}

fn arb_pred(allow_containment: bool) -> BoxedStrategy<PropFormula> {
    let mut names: Vec<(&'static str, usize)> = vec![("ok", 1), ("safe", 2), ("tested", 1)];
    if allow_containment {
        names.extend([("cn", 1), ("cx", 1)]);
    }
    prop::sample::select(names)
        .prop_flat_map(|(n, arity)| prop::collection::vec(arb_term(), arity).prop_map(move |args| PropFormula::pred(n, args)))
        .boxed()
}

fn arb_literal_prop(allow_containment: bool) -> BoxedStrategy<PropFormula> {
    prop_oneof![
        prop::sample::select(&ATOMS[..]).prop_map(PropFormula::atom),
        arb_pred(allow_containment),
    ]
    .boxed()
}

/// Propositional formulas; `cn`/`cx` predicates only when `in_modal`.
pub fn arb_prop(depth: u32, in_modal: bool) -> BoxedStrategy<PropFormula> {
    arb_literal_prop(in_modal)
        .prop_recursive(depth, 16, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(PropFormula::not),
                (inner.clone(), inner).prop_map(|(a, b)| PropFormula::and(a, b)),
            ]
        })
        .boxed()
}

pub fn arb_modality() -> impl Strategy<Value = Modality> {
    prop::sample::select(&Modality::ALL[..])
}

pub fn arb_kind() -> impl Strategy<Value = MessageType> {
    prop::sample::select(&MessageType::ALL[..])
}

pub fn arb_dir() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Up), Just(Direction::Down)]
}

/// A direction and a target; broadcasts only on sent messages.
pub fn arb_endpoint() -> impl Strategy<Value = (Direction, Target)> {
    prop_oneof![
        4 => (arb_dir(), arb_term()).prop_map(|(d, t)| (d, Target::Peer(t))),
        1 => Just((Direction::Up, Target::ContentBroadcast)),
        1 => Just((Direction::Up, Target::ContextBroadcast)),
    ]
}

fn arb_leaf() -> BoxedStrategy<CrowdFormula> {
    prop_oneof![
        1 => Just(CrowdFormula::True),
        3 => arb_prop(1, false).prop_map(CrowdFormula::from),
        4 => (arb_modality(), arb_prop(2, true)).prop_map(|(m, p)| CrowdFormula::modal(m, p)),
        1 => arb_term().prop_map(CrowdFormula::Cn),
        1 => arb_term().prop_map(CrowdFormula::Cx),
        1 => Just(CrowdFormula::Meta("phi".into())),
    ]
    .boxed()
}

/// Crowd formulas of nesting depth at most `depth`, using every operator
/// and every piece of sugar.
pub fn arb_formula(depth: u32) -> BoxedStrategy<CrowdFormula> {
    arb_leaf()
        .prop_recursive(depth, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(CrowdFormula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::implies(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::until(a, b)),
                inner.clone().prop_map(CrowdFormula::next),
                inner.clone().prop_map(CrowdFormula::eventually),
                inner.clone().prop_map(CrowdFormula::always),
                (arb_endpoint(), arb_kind(), inner).prop_map(|((d, t), k, b)| CrowdFormula::msg(d, t, k, b)),
            ]
        })
        .boxed()
}

/// A run of directly nested message operators around a message-free body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageChain {
    pub links: Vec<(Direction, Target, MessageType)>,
    pub body: CrowdFormula,
}

impl MessageChain {
    pub fn to_formula(&self) -> CrowdFormula {
        self.links
            .iter()
            .rev()
            .fold(self.body.clone(), |acc, (d, t, k)| CrowdFormula::msg(*d, t.clone(), *k, acc))
    }
}

pub fn arb_chain(max_depth: usize) -> impl Strategy<Value = MessageChain> {
    let body = prop_oneof![
        (arb_modality(), arb_prop(1, true)).prop_map(|(m, p)| CrowdFormula::modal(m, p)),
        arb_prop(1, false).prop_map(CrowdFormula::from),
    ];
    (
        prop::collection::vec((arb_endpoint(), arb_kind()).prop_map(|((d, t), k)| (d, t, k)), 1..=max_depth),
        body,
    )
        .prop_map(|(links, body)| MessageChain { links, body })
}

/// How a context agent treats tells from its members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayKind {
    None,
    /// The general relay rule.
    Relay,
    /// The relay rule with variables renamed and conjuncts swapped.
    Renamed,
    /// Relays only what one fixed member says.
    PeerSpecific,
}

/// A random containment structure over agents `n0..`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomCrowd {
    pub size: usize,
    /// `(container, member)` pairs, never reflexive.
    pub edges: BTreeSet<(usize, usize)>,
    pub relay: Vec<RelayKind>,
}

pub fn node(i: usize) -> AgentId {
    AgentId::new(format!("n{i}"))
}

impl RandomCrowd {
    pub fn source(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            out.push_str(&format!("agent n{i} {{\n"));
            let content: Vec<String> = self.edges.iter().filter(|(k, _)| *k == i).map(|(_, m)| format!("n{m}")).collect();
            let context: Vec<String> = self.edges.iter().filter(|(_, m)| *m == i).map(|(k, _)| format!("n{k}")).collect();
            if !content.is_empty() {
                out.push_str(&format!("  content {};\n", content.join(", ")));
            }
            if !context.is_empty() {
                out.push_str(&format!("  context {};\n", context.join(", ")));
            }
            let rule = match self.relay[i] {
                RelayKind::None => None,
                RelayKind::Relay => Some("(cn(?i) | cx(?i)) & M[down, ?i, tell] ?phi -> M[up, CN, tell] ?phi".to_string()),
                RelayKind::Renamed => Some("M[down, ?m, tell] ?f & (cx(?m) | cn(?m)) -> M[up, CN, tell] ?f".to_string()),
                RelayKind::PeerSpecific => Some(format!(
                    "(cn(n{i}) | cx(n{i})) & M[down, n{i}, tell] ?phi -> M[up, CN, tell] ?phi"
                )),
            };
            if let Some(r) = rule {
                out.push_str(&format!("  rule relay: {r};\n"));
            }
            out.push_str("}\n");
        }
        out
    }

    pub fn document(&self) -> SpecDocument {
        parse_spec(&self.source()).expect("generated topology parses")
    }
}

pub fn arb_crowd(max_agents: usize) -> impl Strategy<Value = RandomCrowd> {
    (1..=max_agents).prop_flat_map(|size| {
        let pairs: Vec<(usize, usize)> = (0..size).flat_map(|k| (0..size).filter(move |&m| m != k).map(move |m| (k, m))).collect();
        let relay = prop::sample::select(vec![
            RelayKind::None,
            RelayKind::Relay,
            RelayKind::Renamed,
            RelayKind::PeerSpecific,
        ]);
        (
            prop::sample::subsequence(pairs.clone(), 0..=pairs.len().min(3 * size)),
            prop::collection::vec(relay, size),
        )
            .prop_map(move |(edges, relay)| RandomCrowd {
                size,
                edges: edges.into_iter().collect(),
                relay,
            })
    })
}

/// LTL atoms: beliefs `p`, `q`, `r` and the message `m`.
pub const LTL_ATOMS: [&str; 4] = ["p", "q", "r", "m"];

/// The atom for label `name` as seen by agent `s`.
pub fn ltl_atom(name: &str) -> CrowdFormula {
    if name == "m" {
        CrowdFormula::received(Term::id("e"), MessageType::Tell, CrowdFormula::modal(Modality::Belief, PropFormula::atom("p")))
    } else {
        CrowdFormula::modal(Modality::Belief, PropFormula::atom(name))
    }
}

/// Temporal formulas over [`LTL_ATOMS`] with at most `depth` nested operators.
pub fn arb_ltl(depth: u32) -> BoxedStrategy<CrowdFormula> {
    prop_oneof![
        8 => prop::sample::select(&LTL_ATOMS[..]).prop_map(ltl_atom),
        1 => Just(CrowdFormula::True),
    ]
    .prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(CrowdFormula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| CrowdFormula::until(a, b)),
            inner.clone().prop_map(CrowdFormula::next),
            inner.clone().prop_map(CrowdFormula::eventually),
            inner.prop_map(CrowdFormula::always),
        ]
    })
    .boxed()
}

/// Per-state sets of true atoms, `1..=max_len` states. Once `m` is true it
/// stays true, since received messages are never forgotten.
pub fn arb_labels(max_len: usize) -> impl Strategy<Value = Vec<BTreeSet<String>>> {
    let beliefs = prop::collection::btree_set(prop::sample::select(&LTL_ATOMS[..3]), 0..=3);
    prop::collection::vec(beliefs, 1..=max_len).prop_flat_map(|states| {
        let n = states.len();
        (Just(states), 0..=n).prop_map(|(states, from)| {
            states
                .into_iter()
                .enumerate()
                .map(|(t, l)| {
                    let mut set: BTreeSet<String> = l.into_iter().map(str::to_string).collect();
                    if t >= from {
                        set.insert("m".into());
                    }
                    set
                })
                .collect()
        })
    })
}

/// A quiescent trace of agent `s` whose states carry exactly the labels.
pub fn trace_from_labels(labels: &[BTreeSet<String>]) -> Trace {
    let id = AgentId::from("s");
    let mut states = Vec::new();
    for (t, l) in labels.iter().enumerate() {
        let mut a = Agent::new(id.clone());
        for name in l.iter().filter(|n| *n != "m") {
            a.bel.insert(PropFormula::atom(name.as_str()));
        }
        if l.contains("m") {
            let from = labels.iter().position(|l| l.contains("m")).unwrap_or(t);
            a.log(MessageRecord::new(
                Direction::Down,
                "e".into(),
                MessageType::Tell,
                CrowdFormula::modal(Modality::Belief, PropFormula::atom("p")),
                from,
                NormalizeOptions::default(),
            ));
        }
        let mut sys = CrowdSystem::new();
        sys.round = t;
        sys.agents = BTreeMap::from([(id.clone(), a)]);
        states.push(sys);
    }
    Trace {
        events: vec![Vec::new(); states.len()],
        states,
        quiescent: true,
    }
}
