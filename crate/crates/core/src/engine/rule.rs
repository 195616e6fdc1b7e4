//! Rule compilation: premises become conjunctive patterns, consequences
//! become effects.

use std::collections::BTreeSet;

use crate::agent::simplify;
use crate::logic::{normalize_messages, AgentId, BdiFormula, CrowdFormula, Direction, MessageType, Modality, PropFormula, Target, Term};
use crate::parser::RuleDecl;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("temporal operator in premise: {0}")]
    TemporalPremise(String),
    #[error("formula variable `?{0}` cannot stand alone in a premise")]
    BareFormulaVariable(String),
    #[error("not an executable effect: {0}")]
    NotAnEffect(String),
    #[error("received message cannot be produced by a rule: {0}")]
    DownMessage(String),
    #[error("variable `?{0}` in consequence is not bound by the premise")]
    Unbound(String),
}

/// A positive premise atom that can bind variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    /// A member of one of the fact sets. Bare propositions read `bel`.
    Fact(Modality, PropFormula),
    Cn(Term),
    Cx(Term),
    Msg {
        dir: Direction,
        target: Target,
        kind: MessageType,
        body: CrowdFormula,
    },
}

impl Pattern {
    fn vars(&self) -> BTreeSet<String> {
        self.as_formula().all_vars()
    }

    pub fn as_formula(&self) -> CrowdFormula {
        match self {
            Pattern::Fact(m, p) => CrowdFormula::modal(*m, p.clone()),
            Pattern::Cn(t) => CrowdFormula::Cn(t.clone()),
            Pattern::Cx(t) => CrowdFormula::Cx(t.clone()),
            Pattern::Msg { dir, target, kind, body } => CrowdFormula::msg(*dir, target.clone(), *kind, body.clone()),
        }
    }
}

/// One disjunct of a compiled premise.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Conjunction {
    pub positives: Vec<Pattern>,
    /// Formulas evaluated closed-world once every variable in them is bound.
    pub tests: Vec<CrowdFormula>,
    /// Conjunctions of patterns that must have no extension of the binding.
    pub absent: Vec<Vec<Pattern>>,
}

impl Conjunction {
    pub fn bound_vars(&self) -> BTreeSet<String> {
        self.positives.iter().flat_map(|p| p.vars()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Assert(Modality, PropFormula),
    /// An outgoing message, possibly broadcast.
    Send(CrowdFormula),
    AddContent(Term),
    AddContext(Term),
    RemoveContent(Term),
    RemoveContext(Term),
    /// Assertions made `d` rounds later.
    Delayed(Vec<(Modality, PropFormula)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleKind {
    Firing {
        alternatives: Vec<Conjunction>,
        effects: Vec<Effect>,
    },
    /// A received message that counts as another received message. Applied
    /// at delivery instead of firing.
    Coercion { pattern: Pattern, result: CrowdFormula },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub owner: AgentId,
    pub distinct: Vec<String>,
    pub premise: CrowdFormula,
    pub consequence: CrowdFormula,
    pub kind: RuleKind,
}

impl Rule {
    pub fn is_coercion(&self) -> bool {
        matches!(self.kind, RuleKind::Coercion { .. })
    }
}

fn temporal(f: &CrowdFormula) -> bool {
    matches!(f, CrowdFormula::Until(..) | CrowdFormula::Next(_) | CrowdFormula::Eventually(_))
}

enum Class {
    Skip,
    Negated(CrowdFormula),
    Atoms(Vec<Pattern>),
}

fn classify(c: &CrowdFormula) -> Result<Class, RuleError> {
    if let Some(n) = c.strip_negation() {
        return Ok(Class::Negated(n));
    }
    Ok(match c {
        CrowdFormula::True => Class::Skip,
        CrowdFormula::Bdi(BdiFormula::Modal(m, p)) => Class::Atoms(simplify(p).into_iter().map(|l| Pattern::Fact(*m, l)).collect()),
        CrowdFormula::Bdi(BdiFormula::Prop(p)) => {
            Class::Atoms(simplify(p).into_iter().map(|l| Pattern::Fact(Modality::Belief, l)).collect())
        }
        CrowdFormula::Cn(t) => Class::Atoms(vec![Pattern::Cn(t.clone())]),
        CrowdFormula::Cx(t) => Class::Atoms(vec![Pattern::Cx(t.clone())]),
        CrowdFormula::Msg { .. } => {
            let CrowdFormula::Msg { dir, target, kind, body } = normalize_messages(c) else {
                unreachable!("normalizing a message yields a message")
            };
            Class::Atoms(vec![Pattern::Msg {
                dir,
                target,
                kind,
                body: *body,
            }])
        }
        CrowdFormula::Meta(m) => return Err(RuleError::BareFormulaVariable(m.clone())),
        f if temporal(f) => return Err(RuleError::TemporalPremise(f.to_string())),
        other => unreachable!("conjunct {other} is split or negated"),
    })
}

fn negate(c: &CrowdFormula) -> CrowdFormula {
    c.strip_negation().unwrap_or_else(|| CrowdFormula::not(c.clone()))
}

fn first_temporal(f: &CrowdFormula) -> Option<&CrowdFormula> {
    match f {
        f if temporal(f) => Some(f),
        CrowdFormula::Not(a) => first_temporal(a),
        CrowdFormula::And(a, b) => first_temporal(a).or_else(|| first_temporal(b)),
        // Temporal operators inside message bodies are content, not conditions.
        _ => None,
    }
}

fn alternatives(conjuncts: Vec<CrowdFormula>) -> Result<Vec<Conjunction>, RuleError> {
    let mut conj = Conjunction::default();
    let mut negated: Vec<(usize, CrowdFormula)> = Vec::new();
    for (i, c) in conjuncts.iter().enumerate() {
        match classify(c)? {
            Class::Skip => {}
            Class::Atoms(ps) => conj.positives.extend(ps),
            Class::Negated(n) => negated.push((i, n)),
        }
    }
    let bound = conj.bound_vars();
    for (i, n) in negated {
        if n.all_vars().is_subset(&bound) {
            conj.tests.push(CrowdFormula::not(n));
            continue;
        }
        let inner = n.conjuncts();
        let mut atoms = Vec::new();
        let mut all_positive = true;
        for c in &inner {
            match classify(c)? {
                Class::Atoms(ps) => atoms.extend(ps),
                Class::Skip => {}
                Class::Negated(_) => all_positive = false,
            }
        }
        if all_positive {
            conj.absent.push(atoms);
            continue;
        }
        // not (a & b) with fresh variables: one alternative per disjunct.
        let mut out = Vec::new();
        for c in &inner {
            let mut alt: Vec<CrowdFormula> = conjuncts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, f)| f.clone())
                .collect();
            alt.extend(negate(c).conjuncts());
            out.extend(alternatives(alt)?);
        }
        return Ok(out);
    }
    Ok(vec![conj])
}

/// Splits a premise into disjunctive alternatives.
pub fn compile_premise(premise: &CrowdFormula) -> Result<Vec<Conjunction>, RuleError> {
    if let Some(t) = first_temporal(premise) {
        return Err(RuleError::TemporalPremise(t.to_string()));
    }
    alternatives(premise.conjuncts())
}

fn assertions(f: &CrowdFormula) -> Result<Vec<(Modality, PropFormula)>, RuleError> {
    let mut out = Vec::new();
    for c in f.conjuncts() {
        match &c {
            CrowdFormula::Bdi(BdiFormula::Modal(m, p)) => out.push((*m, p.clone())),
            CrowdFormula::Bdi(BdiFormula::Prop(p)) if !p.is_negation() => out.push((Modality::Belief, p.clone())),
            _ => return Err(RuleError::NotAnEffect(c.to_string())),
        }
    }
    Ok(out)
}

pub fn compile_effects(consequence: &CrowdFormula) -> Result<Vec<Effect>, RuleError> {
    let mut out = Vec::new();
    for c in consequence.conjuncts() {
        if let Some(n) = c.strip_negation() {
            match n {
                CrowdFormula::Cn(t) => out.push(Effect::RemoveContent(t)),
                CrowdFormula::Cx(t) => out.push(Effect::RemoveContext(t)),
                _ => return Err(RuleError::NotAnEffect(c.to_string())),
            }
            continue;
        }
        match &c {
            CrowdFormula::True => {}
            CrowdFormula::Bdi(_) => out.extend(assertions(&c)?.into_iter().map(|(m, p)| Effect::Assert(m, p))),
            CrowdFormula::Msg { dir: Direction::Up, .. } => out.push(Effect::Send(c.clone())),
            CrowdFormula::Msg { dir: Direction::Down, .. } => return Err(RuleError::DownMessage(c.to_string())),
            CrowdFormula::Cn(t) => out.push(Effect::AddContent(t.clone())),
            CrowdFormula::Cx(t) => out.push(Effect::AddContext(t.clone())),
            CrowdFormula::Eventually(body) => out.push(Effect::Delayed(assertions(body)?)),
            _ => return Err(RuleError::NotAnEffect(c.to_string())),
        }
    }
    Ok(out)
}

fn as_coercion(r: &RuleDecl) -> Option<(Pattern, CrowdFormula)> {
    let down = |f: &CrowdFormula| matches!(f, CrowdFormula::Msg { dir: Direction::Down, target: Target::Peer(_), .. });
    if !down(&r.premise) || !down(&r.consequence) {
        return None;
    }
    if !r.consequence.all_vars().is_subset(&r.premise.all_vars()) {
        return None;
    }
    match classify(&r.premise).ok()? {
        Class::Atoms(mut ps) if ps.len() == 1 => Some((ps.remove(0), normalize_messages(&r.consequence))),
        _ => None,
    }
}

/// Compiles one declared rule of `owner`.
pub fn compile_rule(owner: &AgentId, r: &RuleDecl) -> Result<Rule, RuleError> {
    let kind = match as_coercion(r) {
        Some((pattern, result)) => RuleKind::Coercion { pattern, result },
        None => {
            let alternatives = compile_premise(&r.premise)?;
            let effects = compile_effects(&r.consequence)?;
            let needed = r.consequence.all_vars();
            for alt in &alternatives {
                let bound = alt.bound_vars();
                if let Some(v) = needed.difference(&bound).next() {
                    return Err(RuleError::Unbound(v.clone()));
                }
            }
            RuleKind::Firing { alternatives, effects }
        }
    };
    Ok(Rule {
        name: r.name.clone(),
        owner: owner.clone(),
        distinct: r.distinct.clone(),
        premise: r.premise.clone(),
        consequence: r.consequence.clone(),
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_spec_syntax;

    fn rule(src: &str) -> Result<Rule, RuleError> {
        let doc = parse_spec_syntax(&format!("agent a {{ rule r: {src}; }}")).unwrap();
        compile_rule(&"a".into(), &doc.agents[0].rules[0])
    }

    fn alts(r: &Rule) -> &[Conjunction] {
        match &r.kind {
            RuleKind::Firing { alternatives, .. } => alternatives,
            RuleKind::Coercion { .. } => panic!("coercion"),
        }
    }

    #[test]
    fn respond_to_incentive() {
        let r = rule("A find_nemo & G earn & M[down, ?j, adv] (A find_nemo -> <> A earn) -> M[up, ?j, tell] A find_nemo").unwrap();
        let a = alts(&r);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].positives.len(), 3);
        let RuleKind::Firing { effects, .. } = &r.kind else { unreachable!() };
        assert!(matches!(effects[0], Effect::Send(_)));
    }

    #[test]
    fn temporal_premise_rejected() {
        assert!(matches!(rule("<> B p -> B q"), Err(RuleError::TemporalPremise(_))));
        assert!(rule("M[down, ?j, adv] (A x -> <> A earn) -> B q").is_ok());
    }

    #[test]
    fn bad_effects() {
        assert!(matches!(rule("B p -> B q | B r"), Err(RuleError::NotAnEffect(_))));
        assert!(matches!(rule("B p -> M[up, ?x, tell] B q"), Err(RuleError::Unbound(_))));
        assert!(matches!(rule("B p -> M[down, b, tell] B q"), Err(RuleError::DownMessage(_))));
        assert!(matches!(rule("B p -> <> M[up, b, tell] B q"), Err(RuleError::NotAnEffect(_))));
    }

    #[test]
    fn negations_split_by_binding() {
        // Bound negation: a closed-world test.
        let r = rule("M[down, ?i, tell] B x & not B safe(?i) -> B y").unwrap();
        assert_eq!(alts(&r)[0].tests.len(), 1);
        // Fresh variables under a positive conjunction: no such extension.
        let r = rule("B x & not (B safe(?a) & B safe(?b)) -> B y").unwrap();
        assert_eq!(alts(&r)[0].absent[0].len(), 2);
        // Disjunction with fresh variables: one alternative per disjunct.
        let r = rule("B x & (M[down, ?k, tell] B ok | M[down, ?k, tell] B no) -> M[up, ?k, tell] B seen").unwrap();
        assert_eq!(alts(&r).len(), 2);
        assert!(alts(&r).iter().all(|a| a.positives.len() == 2));
    }

    #[test]
    fn coercion_detected() {
        let r = rule("M[down, ?k, tell] M[down, ?j, adv] ?x -> M[down, ?j, adv] ?x").unwrap();
        assert!(r.is_coercion());
    }
}
