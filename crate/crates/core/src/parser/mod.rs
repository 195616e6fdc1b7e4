//! Concrete syntax for formulas, crowd specification files (`.crowd`) and
//! property lists (`.props`).
//!
//! Binding strength, loosest first: `U`, `->`, `|`, `&`, then the prefix
//! operators (`not`, `X`, `<>`, `[]`, `B`/`G`/`I`/`A`, `M[..]`). `U` and
//! `->` associate to the right, `&` and `|` to the left. The full grammar is
//! in `docs/grammar.ebnf`.

mod lexer;
mod print;
mod syntax;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::logic::{AgentId, CrowdFormula, Direction, MessageType, Modality, PropFormula, Target, Term};
use lexer::{tokenize, Pos, Tok, Token};
use syntax::{lower, lower_prop, Syn};

pub use print::{pretty_print_formula, pretty_print_props, pretty_print_spec};

const MAX_DEPTH: usize = 256;

/// A positioned syntax or arity error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn at(pos: Pos, message: impl Into<String>, expected: Vec<String>) -> Self {
        Self {
            line: pos.line,
            column: pos.column,
            message: message.into(),
            expected,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

/// A named rule `premise -> consequence` of an agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub name: String,
    /// Variables that must bind to pairwise distinct values.
    pub distinct: Vec<String>,
    pub premise: CrowdFormula,
    pub consequence: CrowdFormula,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AgentDecl {
    pub id: AgentId,
    /// Declared `extern`: referenced but not modeled.
    pub external: bool,
    pub beliefs: Vec<PropFormula>,
    pub goals: Vec<PropFormula>,
    pub intentions: Vec<PropFormula>,
    pub abilities: Vec<PropFormula>,
    pub content: Vec<AgentId>,
    pub context: Vec<AgentId>,
    pub rules: Vec<RuleDecl>,
    /// Messages sent at round 0.
    pub sends: Vec<CrowdFormula>,
}

impl AgentDecl {
    pub fn new(id: impl Into<AgentId>) -> Self {
        Self {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn external(id: impl Into<AgentId>) -> Self {
        Self {
            id: id.into(),
            external: true,
            ..Default::default()
        }
    }

    pub fn facts_mut(&mut self, m: Modality) -> &mut Vec<PropFormula> {
        match m {
            Modality::Belief => &mut self.beliefs,
            Modality::Goal => &mut self.goals,
            Modality::Intention => &mut self.intentions,
            Modality::Ability => &mut self.abilities,
        }
    }

    pub fn facts(&self, m: Modality) -> &[PropFormula] {
        match m {
            Modality::Belief => &self.beliefs,
            Modality::Goal => &self.goals,
            Modality::Intention => &self.intentions,
            Modality::Ability => &self.abilities,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpecDocument {
    pub agents: Vec<AgentDecl>,
}

impl SpecDocument {
    pub fn agent(&self, id: &AgentId) -> Option<&AgentDecl> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub fn agent_mut(&mut self, id: &AgentId) -> Option<&mut AgentDecl> {
        self.agents.iter_mut().find(|a| &a.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Holds,
    Fails,
    Inconclusive,
}

impl Expectation {
    pub fn keyword(self) -> &'static str {
        match self {
            Expectation::Holds => "holds",
            Expectation::Fails => "fails",
            Expectation::Inconclusive => "inconclusive",
        }
    }
}

/// One entry of a `.props` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDecl {
    pub name: String,
    pub subject: AgentId,
    pub expect: Option<Expectation>,
    pub formula: CrowdFormula,
}

/// Semantic problems found after a document parses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecIssue {
    DuplicateAgent { id: AgentId },
    UnresolvedAgent { agent: AgentId, reference: AgentId, location: String },
    SelfContainment { agent: AgentId },
    Duality { container: AgentId, member: AgentId, missing: String },
    InvalidSend { agent: AgentId, formula: String },
}

impl fmt::Display for SpecIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecIssue::DuplicateAgent { id } => write!(f, "duplicate agent id `{id}`"),
            SpecIssue::UnresolvedAgent { agent, reference, location } => {
                write!(f, "agent `{agent}`: unresolved agent `{reference}` in {location}")
            }
            SpecIssue::SelfContainment { agent } => write!(f, "agent `{agent}` contains itself"),
            SpecIssue::Duality { container, member, missing } => write!(
                f,
                "containment duality violated: `{member}` in content of `{container}` but {missing}"
            ),
            SpecIssue::InvalidSend { agent, formula } => {
                write!(f, "agent `{agent}`: initial send must be an outgoing message, got `{formula}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ParseError),
    #[error("{}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<SpecIssue>),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SpecOptions {
    /// Add missing content/context counterparts instead of reporting them.
    pub fix_duality: bool,
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    depth: usize,
    arities: BTreeMap<String, usize>,
}

const KEYWORDS: &[&str] = &["not", "true", "U", "X", "M", "B", "G", "I", "A", "CN", "CX", "cn", "cx"];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Self {
            toks: tokenize(src)?,
            i: 0,
            depth: 0,
            arities: [("cn".to_owned(), 1), ("cx".to_owned(), 1)].into_iter().collect(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn is_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn err<T>(&self, msg: impl Into<String>, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError::at(
            self.pos(),
            format!("{} (found {})", msg.into(), self.peek()),
            expected.iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            let want = tok.to_string();
            self.err("unexpected token", &[want.as_str()])
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_ident(kw) {
            self.bump();
            Ok(())
        } else {
            let want = format!("`{kw}`");
            self.err("unexpected token", &[want.as_str()])
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected {what}"), &[what]),
        }
    }

    fn var(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.err("expected a variable", &["`?name`"]),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(Term::Id(AgentId::new(s)))
            }
            _ => self.err("expected an identifier or variable", &["identifier", "`?name`"]),
        }
    }

    fn formula(&mut self) -> Result<Syn, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("formula nested too deeply", &[]);
        }
        let r = self.until();
        self.depth -= 1;
        r
    }

    fn until(&mut self) -> Result<Syn, ParseError> {
        let lhs = self.implies()?;
        if self.is_ident("U") {
            self.bump();
            let rhs = self.until_nested()?;
            return Ok(Syn::Until(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn until_nested(&mut self) -> Result<Syn, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("formula nested too deeply", &[]);
        }
        let r = self.until();
        self.depth -= 1;
        r
    }

    fn implies(&mut self) -> Result<Syn, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                return self.err("formula nested too deeply", &[]);
            }
            let rhs = self.implies();
            self.depth -= 1;
            return Ok(Syn::Implies(Box::new(lhs), Box::new(rhs?)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Syn, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and()?;
            lhs = Syn::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Syn, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = Syn::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Syn, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("formula nested too deeply", &[]);
        }
        let r = self.unary_inner();
        self.depth -= 1;
        r
    }

    fn unary_inner(&mut self) -> Result<Syn, ParseError> {
        match self.peek().clone() {
            Tok::Diamond => {
                self.bump();
                Ok(Syn::Eventually(Box::new(self.unary()?)))
            }
            Tok::Square => {
                self.bump();
                Ok(Syn::Always(Box::new(self.unary()?)))
            }
            Tok::Ident(s) => match s.as_str() {
                "not" => {
                    self.bump();
                    Ok(Syn::Not(Box::new(self.unary()?)))
                }
                "X" => {
                    self.bump();
                    Ok(Syn::Next(Box::new(self.unary()?)))
                }
                "M" => self.message(),
                "B" | "G" | "I" | "A" => {
                    let op = Modality::from_symbol(&s).expect("matched modal symbol");
                    self.bump();
                    let at = self.pos();
                    let operand = self.unary()?;
                    lower_prop(&operand).map_err(|m| ParseError::at(at, m, vec!["propositional formula".into()]))?;
                    Ok(Syn::Modal(op, Box::new(operand)))
                }
                _ => self.primary(),
            },
            _ => self.primary(),
        }
    }

    fn message(&mut self) -> Result<Syn, ParseError> {
        self.expect_keyword("M")?;
        self.expect(Tok::LBracket)?;
        let dir = if self.is_ident("up") {
            Direction::Up
        } else if self.is_ident("down") {
            Direction::Down
        } else {
            return self.err("expected message direction", &["`up`", "`down`"]);
        };
        self.bump();
        self.expect(Tok::Comma)?;
        let target = if self.is_ident("CN") {
            self.bump();
            Target::ContentBroadcast
        } else if self.is_ident("CX") {
            self.bump();
            Target::ContextBroadcast
        } else {
            Target::Peer(self.term()?)
        };
        self.expect(Tok::Comma)?;
        let kind = match self.peek() {
            Tok::Ident(s) => match MessageType::from_keyword(s) {
                Some(k) => k,
                None => return self.err("expected message type", &["`tell`", "`ask`", "`do`", "`adv`"]),
            },
            _ => return self.err("expected message type", &["`tell`", "`ask`", "`do`", "`adv`"]),
        };
        self.bump();
        self.expect(Tok::RBracket)?;
        let body = self.unary()?;
        Ok(Syn::Msg(dir, target, kind, Box::new(body)))
    }

    fn primary(&mut self) -> Result<Syn, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Syn::Meta(v))
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Syn::True)
            }
            Tok::Ident(s) if s == "cn" || s == "cx" => {
                let at = self.pos();
                self.bump();
                let args = self.args()?;
                if args.len() != 1 {
                    return Err(ParseError::at(
                        at,
                        format!("`{s}` takes exactly one argument, got {}", args.len()),
                        vec![],
                    ));
                }
                let t = args.into_iter().next().expect("one argument");
                Ok(if s == "cn" { Syn::Cn(t) } else { Syn::Cx(t) })
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                let at = self.pos();
                self.bump();
                if *self.peek() == Tok::LParen {
                    let args = self.args()?;
                    match self.arities.get(&s) {
                        Some(&n) if n != args.len() => {
                            return Err(ParseError::at(
                                at,
                                format!("predicate `{s}` used with {} arguments, previously {n}", args.len()),
                                vec![],
                            ))
                        }
                        _ => {
                            self.arities.insert(s.clone(), args.len());
                        }
                    }
                    Ok(Syn::Pred(s, args))
                } else {
                    Ok(Syn::Atom(s))
                }
            }
            _ => self.err("expected a formula", &["atom", "`(`", "operator"]),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn prop_item(&mut self) -> Result<PropFormula, ParseError> {
        let at = self.pos();
        let s = self.formula()?;
        lower_prop(&s).map_err(|m| ParseError::at(at, m, vec!["propositional formula".into()]))
    }

    fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    fn agent(&mut self) -> Result<AgentDecl, ParseError> {
        self.expect_keyword("agent")?;
        let id = AgentId::new(self.name("agent name")?);
        let mut decl = AgentDecl::new(id);
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            let kw = match self.peek() {
                Tok::Ident(s) => s.clone(),
                _ => {
                    return self.err(
                        "expected a statement",
                        &["`belief`", "`goal`", "`intention`", "`ability`", "`content`", "`context`", "`rule`", "`send`", "`}`"],
                    )
                }
            };
            match kw.as_str() {
                "belief" | "goal" | "intention" | "ability" => {
                    self.bump();
                    let m = match kw.as_str() {
                        "belief" => Modality::Belief,
                        "goal" => Modality::Goal,
                        "intention" => Modality::Intention,
                        _ => Modality::Ability,
                    };
                    let mut items = vec![self.prop_item()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        items.push(self.prop_item()?);
                    }
                    decl.facts_mut(m).extend(items);
                }
                "content" | "context" => {
                    self.bump();
                    let mut items = vec![AgentId::new(self.name("agent name")?)];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        items.push(AgentId::new(self.name("agent name")?));
                    }
                    if kw == "content" {
                        decl.content.extend(items);
                    } else {
                        decl.context.extend(items);
                    }
                }
                "rule" => {
                    self.bump();
                    let name = self.name("rule name")?;
                    let mut distinct = Vec::new();
                    if self.is_ident("distinct") {
                        self.bump();
                        self.expect(Tok::LParen)?;
                        distinct.push(self.var()?);
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            distinct.push(self.var()?);
                        }
                        self.expect(Tok::RParen)?;
                    }
                    self.expect(Tok::Colon)?;
                    let at = self.pos();
                    let body = self.formula()?;
                    let Syn::Implies(premise, consequence) = body else {
                        return Err(ParseError::at(
                            at,
                            format!("rule `{name}` must have the form `premise -> consequence`"),
                            vec!["`->`".into()],
                        ));
                    };
                    decl.rules.push(RuleDecl {
                        name,
                        distinct,
                        premise: lower(&premise),
                        consequence: lower(&consequence),
                    });
                }
                "send" => {
                    self.bump();
                    let f = self.formula()?;
                    decl.sends.push(lower(&f));
                }
                _ => {
                    return self.err(
                        "unknown statement",
                        &["`belief`", "`goal`", "`intention`", "`ability`", "`content`", "`context`", "`rule`", "`send`"],
                    )
                }
            }
            self.expect(Tok::Semi)?;
        }
        self.expect(Tok::RBrace)?;
        Ok(decl)
    }

    fn document(&mut self) -> Result<SpecDocument, ParseError> {
        let mut doc = SpecDocument::default();
        while !self.at_eof() {
            if self.is_ident("extern") {
                self.bump();
                self.expect_keyword("agent")?;
                let id = AgentId::new(self.name("agent name")?);
                self.expect(Tok::Semi)?;
                doc.agents.push(AgentDecl::external(id));
            } else if self.is_ident("agent") {
                doc.agents.push(self.agent()?);
            } else {
                return self.err("expected an agent declaration", &["`agent`", "`extern`"]);
            }
        }
        Ok(doc)
    }

    fn props(&mut self) -> Result<Vec<PropertyDecl>, ParseError> {
        let mut out = Vec::new();
        while !self.at_eof() {
            self.expect_keyword("property")?;
            let name = self.name("property name")?;
            self.expect_keyword("subject")?;
            let subject = AgentId::new(self.name("agent name")?);
            let mut expect = None;
            if self.is_ident("expect") {
                self.bump();
                expect = Some(match self.peek() {
                    Tok::Ident(s) if s == "holds" => Expectation::Holds,
                    Tok::Ident(s) if s == "fails" => Expectation::Fails,
                    Tok::Ident(s) if s == "inconclusive" => Expectation::Inconclusive,
                    _ => return self.err("expected a verdict", &["`holds`", "`fails`", "`inconclusive`"]),
                });
                self.bump();
            }
            self.expect(Tok::Colon)?;
            let f = self.formula()?;
            self.expect(Tok::Semi)?;
            out.push(PropertyDecl {
                name,
                subject,
                expect,
                formula: lower(&f),
            });
        }
        Ok(out)
    }
}

/// Parses a single formula.
pub fn parse_formula(text: &str) -> Result<CrowdFormula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    if !p.at_eof() {
        return p.err("unexpected trailing input", &["end of input"]);
    }
    Ok(lower(&f))
}

/// Parses a `.props` file.
pub fn parse_props(text: &str) -> Result<Vec<PropertyDecl>, ParseError> {
    Parser::new(text)?.props()
}

/// Parses a `.crowd` file without semantic checks.
pub fn parse_spec_syntax(text: &str) -> Result<SpecDocument, ParseError> {
    Parser::new(text)?.document()
}

/// Parses a `.crowd` file and checks references and containment duality.
pub fn parse_spec(text: &str) -> Result<SpecDocument, SpecError> {
    parse_spec_with(text, SpecOptions::default())
}

pub fn parse_spec_with(text: &str, opts: SpecOptions) -> Result<SpecDocument, SpecError> {
    let mut doc = parse_spec_syntax(text)?;
    if opts.fix_duality {
        fix_duality(&mut doc);
    }
    let issues = check_document(&doc);
    if issues.is_empty() {
        Ok(doc)
    } else {
        Err(SpecError::Semantic(issues))
    }
}

/// Appends the missing side of every one-sided containment between modeled agents.
pub fn fix_duality(doc: &mut SpecDocument) {
    let modeled: BTreeSet<AgentId> = doc.agents.iter().filter(|a| !a.external).map(|a| a.id.clone()).collect();
    let mut add_context: Vec<(AgentId, AgentId)> = Vec::new();
    let mut add_content: Vec<(AgentId, AgentId)> = Vec::new();
    for a in doc.agents.iter().filter(|a| !a.external) {
        for m in &a.content {
            if modeled.contains(m) && !doc.agent(m).is_some_and(|d| d.context.contains(&a.id)) {
                add_context.push((m.clone(), a.id.clone()));
            }
        }
        for c in &a.context {
            if modeled.contains(c) && !doc.agent(c).is_some_and(|d| d.content.contains(&a.id)) {
                add_content.push((c.clone(), a.id.clone()));
            }
        }
    }
    for (who, what) in add_context {
        let d = doc.agent_mut(&who).expect("modeled agent");
        if !d.context.contains(&what) {
            d.context.push(what);
        }
    }
    for (who, what) in add_content {
        let d = doc.agent_mut(&who).expect("modeled agent");
        if !d.content.contains(&what) {
            d.content.push(what);
        }
    }
}

/// Reference resolution, self-containment and duality checks.
pub fn check_document(doc: &SpecDocument) -> Vec<SpecIssue> {
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    for a in &doc.agents {
        if !seen.insert(a.id.clone()) {
            issues.push(SpecIssue::DuplicateAgent { id: a.id.clone() });
        }
    }
    let known = &seen;
    let modeled: BTreeSet<&AgentId> = doc.agents.iter().filter(|a| !a.external).map(|a| &a.id).collect();

    for a in doc.agents.iter().filter(|a| !a.external) {
        let mut refs: Vec<(AgentId, String)> = Vec::new();
        refs.extend(a.content.iter().map(|m| (m.clone(), "content".to_string())));
        refs.extend(a.context.iter().map(|c| (c.clone(), "context".to_string())));
        for r in &a.rules {
            for f in [&r.premise, &r.consequence] {
                refs.extend(agent_refs(f).into_iter().map(|id| (id, format!("rule `{}`", r.name))));
            }
        }
        for s in &a.sends {
            refs.extend(agent_refs(s).into_iter().map(|id| (id, "send".to_string())));
            if !matches!(s, CrowdFormula::Msg { dir: Direction::Up, .. }) || !s.is_ground() {
                issues.push(SpecIssue::InvalidSend {
                    agent: a.id.clone(),
                    formula: s.to_string(),
                });
            }
        }
        for (reference, location) in refs {
            if !known.contains(&reference) {
                issues.push(SpecIssue::UnresolvedAgent {
                    agent: a.id.clone(),
                    reference,
                    location,
                });
            }
        }
        if a.content.contains(&a.id) || a.context.contains(&a.id) {
            issues.push(SpecIssue::SelfContainment { agent: a.id.clone() });
        }
    }

    for a in doc.agents.iter().filter(|a| !a.external) {
        for m in &a.content {
            if modeled.contains(m) && !doc.agent(m).is_some_and(|d| d.context.contains(&a.id)) {
                issues.push(SpecIssue::Duality {
                    container: a.id.clone(),
                    member: m.clone(),
                    missing: format!("`{}` missing from context of `{m}`", a.id),
                });
            }
        }
        for c in &a.context {
            if modeled.contains(c) && !doc.agent(c).is_some_and(|d| d.content.contains(&a.id)) {
                issues.push(SpecIssue::Duality {
                    container: c.clone(),
                    member: a.id.clone(),
                    missing: format!("`{}` missing from content of `{c}`", a.id),
                });
            }
        }
    }
    issues
}

/// Agent identifiers in agent positions: message peers and `cn`/`cx` arguments.
fn agent_refs(f: &CrowdFormula) -> Vec<AgentId> {
    let mut out = Vec::new();
    f.visit(&mut |n| match n {
        CrowdFormula::Msg {
            target: Target::Peer(Term::Id(id)),
            ..
        }
        | CrowdFormula::Cn(Term::Id(id))
        | CrowdFormula::Cx(Term::Id(id)) => out.push(id.clone()),
        _ => {}
    });
    out
}
