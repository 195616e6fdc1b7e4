//! Abstract syntax for the three formula layers.
//!
//! Connectives exist on every layer. The smart constructors on each type
//! always place a connective on the lowest layer able to hold it, so that
//! `B p & B q` is a single [`BdiFormula`] wrapped once in
//! [`CrowdFormula::Bdi`] rather than a crowd-level conjunction of two
//! wrapped leaves. Every formula produced by the parser is in this
//! canonical shape, and structural equality is only meaningful between
//! canonical values.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier drawn from the agent universe. Constants used as predicate
/// arguments (fragment names, the software under test, ...) share this
/// identifier space.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// An identifier position: either ground or a rule/property variable (`?x`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Id(AgentId),
    Var(String),
}

impl Term {
    pub fn id(name: impl Into<String>) -> Self {
        Term::Id(AgentId::new(name))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn as_id(&self) -> Option<&AgentId> {
        match self {
            Term::Id(id) => Some(id),
            Term::Var(_) => None,
        }
    }
}

/// Ground first-order layer: atoms, predicates, negation, conjunction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropFormula {
    Atom(String),
    Pred(String, Vec<Term>),
    Not(Box<PropFormula>),
    And(Box<PropFormula>, Box<PropFormula>),
}

impl PropFormula {
    pub fn atom(name: impl Into<String>) -> Self {
        PropFormula::Atom(name.into())
    }

    pub fn pred(name: impl Into<String>, args: Vec<Term>) -> Self {
        PropFormula::Pred(name.into(), args)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: PropFormula) -> Self {
        PropFormula::Not(Box::new(inner))
    }

    pub fn and(lhs: PropFormula, rhs: PropFormula) -> Self {
        PropFormula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn is_negation(&self) -> bool {
        matches!(self, PropFormula::Not(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    /// `B`
    Belief,
    /// `G`
    Goal,
    /// `I`
    Intention,
    /// `A`
    Ability,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Belief,
        Modality::Goal,
        Modality::Intention,
        Modality::Ability,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Modality::Belief => "B",
            Modality::Goal => "G",
            Modality::Intention => "I",
            Modality::Ability => "A",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "B" => Some(Modality::Belief),
            "G" => Some(Modality::Goal),
            "I" => Some(Modality::Intention),
            "A" => Some(Modality::Ability),
            _ => None,
        }
    }
}

/// Mental-attitude layer. Modal operators take only [`PropFormula`]
/// arguments, so modal nesting is unrepresentable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BdiFormula {
    Prop(PropFormula),
    Not(Box<BdiFormula>),
    And(Box<BdiFormula>, Box<BdiFormula>),
    Modal(Modality, PropFormula),
}

impl BdiFormula {
    pub fn modal(op: Modality, arg: PropFormula) -> Self {
        BdiFormula::Modal(op, arg)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: BdiFormula) -> Self {
        match inner {
            BdiFormula::Prop(p) => BdiFormula::Prop(PropFormula::not(p)),
            other => BdiFormula::Not(Box::new(other)),
        }
    }

    pub fn and(lhs: BdiFormula, rhs: BdiFormula) -> Self {
        match (lhs, rhs) {
            (BdiFormula::Prop(a), BdiFormula::Prop(b)) => BdiFormula::Prop(PropFormula::and(a, b)),
            (a, b) => BdiFormula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn is_negation(&self) -> bool {
        match self {
            BdiFormula::Not(_) => true,
            BdiFormula::Prop(p) => p.is_negation(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Sent (`↑`).
    Up,
    /// Received (`↓`).
    Down,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageType {
    Tell,
    Ask,
    Do,
    Adv,
}

impl MessageType {
    pub const ALL: [MessageType; 4] = [
        MessageType::Tell,
        MessageType::Ask,
        MessageType::Do,
        MessageType::Adv,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            MessageType::Tell => "tell",
            MessageType::Ask => "ask",
            MessageType::Do => "do",
            MessageType::Adv => "adv",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "tell" => Some(MessageType::Tell),
            "ask" => Some(MessageType::Ask),
            "do" => Some(MessageType::Do),
            "adv" => Some(MessageType::Adv),
            _ => None,
        }
    }
}

/// Message destination. Broadcast targets are only legal when sending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Peer(Term),
    /// `CN`: every member of the sender's content.
    ContentBroadcast,
    /// `CX`: every member of the sender's context.
    ContextBroadcast,
}

impl Target {
    pub fn is_broadcast(&self) -> bool {
        !matches!(self, Target::Peer(_))
    }
}

/// The communication layer: BDI formulas plus temporal and message operators.
///
/// There is no `Always` variant; `[] f` is stored as `not <> not f`
/// (see [`CrowdFormula::always`]). `Meta` is a formula-valued variable used
/// in rule patterns such as the relay rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CrowdFormula {
    True,
    Bdi(BdiFormula),
    Not(Box<CrowdFormula>),
    And(Box<CrowdFormula>, Box<CrowdFormula>),
    Until(Box<CrowdFormula>, Box<CrowdFormula>),
    Next(Box<CrowdFormula>),
    Eventually(Box<CrowdFormula>),
    Msg {
        dir: Direction,
        target: Target,
        kind: MessageType,
        body: Box<CrowdFormula>,
    },
    Cn(Term),
    Cx(Term),
    Meta(String),
}

impl From<BdiFormula> for CrowdFormula {
    fn from(b: BdiFormula) -> Self {
        CrowdFormula::Bdi(b)
    }
}

impl From<PropFormula> for CrowdFormula {
    fn from(p: PropFormula) -> Self {
        CrowdFormula::Bdi(BdiFormula::Prop(p))
    }
}

impl CrowdFormula {
    pub fn modal(op: Modality, arg: PropFormula) -> Self {
        CrowdFormula::Bdi(BdiFormula::Modal(op, arg))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: CrowdFormula) -> Self {
        match inner {
            CrowdFormula::Bdi(b) => CrowdFormula::Bdi(BdiFormula::not(b)),
            other => CrowdFormula::Not(Box::new(other)),
        }
    }

    pub fn and(lhs: CrowdFormula, rhs: CrowdFormula) -> Self {
        match (lhs, rhs) {
            (CrowdFormula::Bdi(a), CrowdFormula::Bdi(b)) => CrowdFormula::Bdi(BdiFormula::and(a, b)),
            (a, b) => CrowdFormula::And(Box::new(a), Box::new(b)),
        }
    }

    /// Left-nested conjunction; the empty conjunction is `true`.
    pub fn conjunction(items: impl IntoIterator<Item = CrowdFormula>) -> Self {
        items
            .into_iter()
            .reduce(CrowdFormula::and)
            .unwrap_or(CrowdFormula::True)
    }

    pub fn or(lhs: CrowdFormula, rhs: CrowdFormula) -> Self {
        Self::not(Self::and(Self::not(lhs), Self::not(rhs)))
    }

    pub fn implies(lhs: CrowdFormula, rhs: CrowdFormula) -> Self {
        Self::not(Self::and(lhs, Self::not(rhs)))
    }

    pub fn until(lhs: CrowdFormula, rhs: CrowdFormula) -> Self {
        CrowdFormula::Until(Box::new(lhs), Box::new(rhs))
    }

    pub fn next(inner: CrowdFormula) -> Self {
        CrowdFormula::Next(Box::new(inner))
    }

    pub fn eventually(inner: CrowdFormula) -> Self {
        CrowdFormula::Eventually(Box::new(inner))
    }

    pub fn always(inner: CrowdFormula) -> Self {
        Self::not(Self::eventually(Self::not(inner)))
    }

    pub fn msg(dir: Direction, target: Target, kind: MessageType, body: CrowdFormula) -> Self {
        CrowdFormula::Msg {
            dir,
            target,
            kind,
            body: Box::new(body),
        }
    }

    pub fn send(target: Target, kind: MessageType, body: CrowdFormula) -> Self {
        Self::msg(Direction::Up, target, kind, body)
    }

    pub fn received(from: Term, kind: MessageType, body: CrowdFormula) -> Self {
        Self::msg(Direction::Down, Target::Peer(from), kind, body)
    }

    /// If this formula is a negation on any layer, the negated formula.
    pub fn strip_negation(&self) -> Option<CrowdFormula> {
        match self {
            CrowdFormula::Not(inner) => Some((**inner).clone()),
            CrowdFormula::Bdi(BdiFormula::Not(inner)) => Some(CrowdFormula::Bdi((**inner).clone())),
            CrowdFormula::Bdi(BdiFormula::Prop(PropFormula::Not(inner))) => {
                Some(CrowdFormula::from((**inner).clone()))
            }
            _ => None,
        }
    }

    /// If this formula is a conjunction on any layer, its two operands.
    pub fn split_and(&self) -> Option<(CrowdFormula, CrowdFormula)> {
        match self {
            CrowdFormula::And(a, b) => Some(((**a).clone(), (**b).clone())),
            CrowdFormula::Bdi(BdiFormula::And(a, b)) => Some((
                CrowdFormula::Bdi((**a).clone()),
                CrowdFormula::Bdi((**b).clone()),
            )),
            CrowdFormula::Bdi(BdiFormula::Prop(PropFormula::And(a, b))) => Some((
                CrowdFormula::from((**a).clone()),
                CrowdFormula::from((**b).clone()),
            )),
            _ => None,
        }
    }

    /// `a -> b` read back from its `not (a & not b)` encoding.
    pub fn as_implication(&self) -> Option<(CrowdFormula, CrowdFormula)> {
        let inner = self.strip_negation()?;
        let (lhs, rhs) = inner.split_and()?;
        Some((lhs, rhs.strip_negation()?))
    }

    /// `a | b` read back from its `not (not a & not b)` encoding.
    pub fn as_disjunction(&self) -> Option<(CrowdFormula, CrowdFormula)> {
        let inner = self.strip_negation()?;
        let (lhs, rhs) = inner.split_and()?;
        Some((lhs.strip_negation()?, rhs.strip_negation()?))
    }

    /// `[] f` read back from its `not <> not f` encoding.
    pub fn as_always(&self) -> Option<CrowdFormula> {
        match self {
            CrowdFormula::Not(inner) => match &**inner {
                CrowdFormula::Eventually(body) => body.strip_negation(),
                _ => None,
            },
            _ => None,
        }
    }

    /// Flattens nested conjunctions on every layer into a list of conjuncts.
    pub fn conjuncts(&self) -> Vec<CrowdFormula> {
        let mut out = Vec::new();
        fn go(f: &CrowdFormula, out: &mut Vec<CrowdFormula>) {
            match f.split_and() {
                Some((a, b)) => {
                    go(&a, out);
                    go(&b, out);
                }
                None => {
                    if *f != CrowdFormula::True {
                        out.push(f.clone());
                    }
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn is_msg(&self) -> bool {
        matches!(self, CrowdFormula::Msg { .. })
    }

    /// True when a temporal operator occurs outside every message scope.
    pub fn has_temporal_outside_messages(&self) -> bool {
        match self {
            CrowdFormula::Until(..) | CrowdFormula::Next(_) | CrowdFormula::Eventually(_) => true,
            CrowdFormula::Not(a) => a.has_temporal_outside_messages(),
            CrowdFormula::And(a, b) => {
                a.has_temporal_outside_messages() || b.has_temporal_outside_messages()
            }
            _ => false,
        }
    }

    /// Length of the longest chain of directly nested message operators.
    pub fn max_message_chain(&self) -> usize {
        match self {
            CrowdFormula::Msg { body, .. } => {
                let chain = 1 + match &**body {
                    b @ CrowdFormula::Msg { .. } => b.direct_chain_len(),
                    _ => 0,
                };
                chain.max(body.max_message_chain())
            }
            CrowdFormula::Not(a) | CrowdFormula::Next(a) | CrowdFormula::Eventually(a) => {
                a.max_message_chain()
            }
            CrowdFormula::And(a, b) | CrowdFormula::Until(a, b) => {
                a.max_message_chain().max(b.max_message_chain())
            }
            _ => 0,
        }
    }

    fn direct_chain_len(&self) -> usize {
        match self {
            CrowdFormula::Msg { body, .. } => 1 + body.direct_chain_len(),
            _ => 0,
        }
    }

    /// Identifier variables (`?x` in identifier positions) in first-occurrence order.
    pub fn id_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_terms(&mut |t| {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    /// Formula variables (`?x` in formula positions) in first-occurrence order.
    pub fn meta_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let CrowdFormula::Meta(m) = f {
                if !out.contains(m) {
                    out.push(m.clone());
                }
            }
        });
        out
    }

    /// All variables, identifier and formula, in first-occurrence order.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.id_vars().into_iter().collect();
        out.extend(self.meta_vars());
        out
    }

    pub fn is_ground(&self) -> bool {
        self.all_vars().is_empty()
    }

    /// Pre-order visit of every crowd-level node.
    pub fn visit(&self, f: &mut impl FnMut(&CrowdFormula)) {
        f(self);
        match self {
            CrowdFormula::Not(a)
            | CrowdFormula::Next(a)
            | CrowdFormula::Eventually(a)
            | CrowdFormula::Msg { body: a, .. } => a.visit(f),
            CrowdFormula::And(a, b) | CrowdFormula::Until(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Visits every identifier position on every layer.
    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        self.visit(&mut |node| match node {
            CrowdFormula::Bdi(b) => b.visit_terms(f),
            CrowdFormula::Msg {
                target: Target::Peer(t),
                ..
            } => f(t),
            CrowdFormula::Cn(t) | CrowdFormula::Cx(t) => f(t),
            _ => {}
        });
    }

    /// Every predicate `(name, arity)` occurring on any layer.
    pub fn predicates(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |node| {
            if let CrowdFormula::Bdi(b) = node {
                b.visit_props(&mut |p| {
                    if let PropFormula::Pred(n, args) = p {
                        out.push((n.clone(), args.len()));
                    }
                });
            }
        });
        out
    }
}

impl BdiFormula {
    pub fn visit_props(&self, f: &mut impl FnMut(&PropFormula)) {
        match self {
            BdiFormula::Prop(p) | BdiFormula::Modal(_, p) => p.visit(f),
            BdiFormula::Not(a) => a.visit_props(f),
            BdiFormula::And(a, b) => {
                a.visit_props(f);
                b.visit_props(f);
            }
        }
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        self.visit_props(&mut |p| {
            if let PropFormula::Pred(_, args) = p {
                args.iter().for_each(&mut *f);
            }
        });
    }
}

impl PropFormula {
    pub fn visit(&self, f: &mut impl FnMut(&PropFormula)) {
        f(self);
        match self {
            PropFormula::Not(a) => a.visit(f),
            PropFormula::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub fn is_ground(&self) -> bool {
        let mut ground = true;
        self.visit(&mut |p| {
            if let PropFormula::Pred(_, args) = p {
                if args.iter().any(|a| matches!(a, Term::Var(_))) {
                    ground = false;
                }
            }
        });
        ground
    }
}
