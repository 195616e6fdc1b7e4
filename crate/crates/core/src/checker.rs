//! Temporal properties over finite traces.
//!
//! A trace is read as an infinite word whose final state repeats forever,
//! so `X` at the last state looks at the last state again. Message atoms
//! are true from the round their record appears onward. Properties are
//! evaluated from one subject agent's point of view.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::agent::{Agent, AgentError, MessageRecord};
use crate::engine::{holds, Trace};
use crate::logic::{substitute, AgentId, Binding, CrowdFormula, Target, Term, Value};

/// Stands for "any peer" in message atoms addressed to the subject itself.
const ANY_PEER: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("subject `{0}` is not a modeled agent")]
    UnknownSubject(AgentId),
    #[error("formula variable `?{0}` cannot be quantified in a property")]
    FormulaVariable(String),
    #[error("round {0} is past the end of the trace")]
    RoundOutOfRange(usize),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Fails,
    /// The run hit its round budget before quiescing.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub round: usize,
    /// Index of the top-level conjunct the witness is for.
    pub path: Vec<usize>,
    pub subformula: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub round: usize,
    pub formula: String,
}

/// The subject's state at one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSlice {
    pub agent: AgentId,
    pub round: usize,
    pub bel: Vec<String>,
    pub goal: Vec<String>,
    pub int: Vec<String>,
    pub ablt: Vec<String>,
    pub cn: Vec<AgentId>,
    pub cx: Vec<AgentId>,
    pub com: Vec<MessageRecord>,
}

impl StateSlice {
    pub(crate) fn of(a: &Agent, round: usize) -> Self {
        let strs = |s: &BTreeSet<crate::logic::PropFormula>| s.iter().map(|p| p.to_string()).collect();
        Self {
            agent: a.id.clone(),
            round,
            bel: strs(&a.bel),
            goal: strs(&a.goal),
            int: strs(&a.int),
            ablt: strs(&a.ablt),
            cn: a.cn.iter().cloned().collect(),
            cx: a.cx.iter().cloned().collect(),
            com: a.com.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub round: usize,
    pub falsified: String,
    /// Values of the property's free variables in the failing instance.
    pub bindings: BTreeMap<String, String>,
    /// How the failure was traced from the property down to `falsified`.
    pub trail: Vec<Step>,
    pub state: StateSlice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub holds: bool,
    pub subject: AgentId,
    pub property: String,
    pub rounds: usize,
    pub quiescent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub note: &'static str,
}

/// Every verdict is about the single trace the engine produces.
pub const NOTE: &str = "verified under the deterministic operational semantics";

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Holds => 0,
            Status::Fails => 1,
            Status::Inconclusive => 2,
        }
    }
}

/// Rewrites message atoms addressed to the subject into "any peer" atoms.
fn mark_self_peers(f: &CrowdFormula, subject: &AgentId) -> CrowdFormula {
    match f {
        CrowdFormula::Msg { dir, target, kind, body } => {
            let target = match target {
                Target::Peer(Term::Id(id)) if id == subject => Target::Peer(Term::Var(ANY_PEER.into())),
                other => other.clone(),
            };
            CrowdFormula::msg(*dir, target, *kind, (**body).clone())
        }
        CrowdFormula::Not(a) => CrowdFormula::Not(Box::new(mark_self_peers(a, subject))),
        CrowdFormula::And(a, b) => CrowdFormula::And(Box::new(mark_self_peers(a, subject)), Box::new(mark_self_peers(b, subject))),
        CrowdFormula::Until(a, b) => {
            CrowdFormula::Until(Box::new(mark_self_peers(a, subject)), Box::new(mark_self_peers(b, subject)))
        }
        CrowdFormula::Next(a) => CrowdFormula::Next(Box::new(mark_self_peers(a, subject))),
        CrowdFormula::Eventually(a) => CrowdFormula::Eventually(Box::new(mark_self_peers(a, subject))),
        other => other.clone(),
    }
}

struct Ctx<'a> {
    trace: &'a Trace,
    subject: &'a AgentId,
}

impl Ctx<'_> {
    fn last(&self) -> usize {
        self.trace.states.len() - 1
    }

    fn agent(&self, t: usize) -> Result<&Agent, CheckError> {
        self.trace.states[t]
            .agents
            .get(self.subject)
            .ok_or_else(|| CheckError::UnknownSubject(self.subject.clone()))
    }

    fn atom(&self, f: &CrowdFormula, t: usize) -> Result<bool, CheckError> {
        let a = self.agent(t)?;
        if let CrowdFormula::Msg {
            dir,
            target: Target::Peer(Term::Var(v)),
            kind,
            body,
        } = f
        {
            if v == ANY_PEER {
                let opts = self.trace.states[t].normalize;
                let probe = MessageRecord::new(*dir, self.subject.clone(), *kind, (**body).clone(), 0, opts);
                return Ok(a
                    .com
                    .iter()
                    .any(|r| r.dir == probe.dir && r.kind == probe.kind && r.body == probe.body));
            }
        }
        Ok(holds(a, f, self.trace.states[t].normalize)?)
    }

    fn eval(&self, f: &CrowdFormula, t: usize) -> Result<bool, CheckError> {
        let n = self.last();
        Ok(match f {
            CrowdFormula::Not(a) => !self.eval(a, t)?,
            CrowdFormula::And(a, b) => self.eval(a, t)? && self.eval(b, t)?,
            CrowdFormula::Next(a) => self.eval(a, (t + 1).min(n))?,
            CrowdFormula::Eventually(a) => self.first(a, t)?.is_some(),
            CrowdFormula::Until(a, b) => {
                let mut result = false;
                for k in t..=n {
                    if self.eval(b, k)? {
                        result = true;
                        break;
                    }
                    if !self.eval(a, k)? {
                        break;
                    }
                }
                result
            }
            _ => self.atom(f, t)?,
        })
    }

    /// First round at or after `t` where `f` holds.
    fn first(&self, f: &CrowdFormula, t: usize) -> Result<Option<usize>, CheckError> {
        for k in t..=self.last().max(t) {
            if self.eval(f, k)? {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// Follows a false formula down to the subformula and round responsible.
    fn explain_false(&self, f: &CrowdFormula, t: usize, trail: &mut Vec<Step>) -> Result<(), CheckError> {
        trail.push(Step {
            round: t,
            formula: f.to_string(),
        });
        if let Some(body) = f.as_always() {
            for k in t..=self.last() {
                if !self.eval(&body, k)? {
                    return self.explain_false(&body, k, trail);
                }
            }
            return Ok(());
        }
        if let Some((a, b)) = f.as_implication() {
            if self.eval(&a, t)? {
                return self.explain_false(&b, t, trail);
            }
        }
        if let Some((a, b)) = f.split_and() {
            let bad = if self.eval(&a, t)? { b } else { a };
            return self.explain_false(&bad, t, trail);
        }
        if let CrowdFormula::Eventually(_) = f {
            // Never true: the last state is where it stays false.
            trail.push(Step {
                round: self.last(),
                formula: f.to_string(),
            });
        }
        Ok(())
    }
}

fn has_temporal(f: &CrowdFormula) -> bool {
    match f {
        CrowdFormula::Until(..) | CrowdFormula::Next(_) | CrowdFormula::Eventually(_) => true,
        CrowdFormula::Not(a) => has_temporal(a),
        CrowdFormula::And(a, b) => has_temporal(a) || has_temporal(b),
        _ => false,
    }
}

/// Every identifier mentioned anywhere in the trace.
pub fn universe(trace: &Trace) -> BTreeSet<AgentId> {
    let mut out = BTreeSet::new();
    for s in &trace.states {
        out.extend(s.agents.keys().cloned());
        out.extend(s.externals.iter().cloned());
        for a in s.agents.values() {
            for set in [&a.bel, &a.goal, &a.int, &a.ablt] {
                for p in set {
                    CrowdFormula::from(p.clone()).visit_terms(&mut |t| {
                        if let Term::Id(id) = t {
                            out.insert(id.clone());
                        }
                    });
                }
            }
        }
    }
    out
}

/// Instantiations of the free identifier variables of `f` over `universe`.
fn instances(f: &CrowdFormula, universe: &BTreeSet<AgentId>) -> Result<Vec<Binding>, CheckError> {
    if let Some(m) = f.meta_vars().into_iter().next() {
        return Err(CheckError::FormulaVariable(m));
    }
    let vars: Vec<String> = f.id_vars().into_iter().filter(|v| v != ANY_PEER).collect();
    let mut out = vec![Binding::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|b| {
                let v = &v;
                universe.iter().map(move |id| {
                    let mut nb = b.clone();
                    nb.insert(v.clone(), Value::Id(id.clone()));
                    nb
                })
            })
            .collect();
    }
    Ok(out)
}

/// Truth of `f` at round `at` from `subject`'s point of view. Free
/// identifier variables are read universally over the trace's identifiers.
pub fn eval(trace: &Trace, f: &CrowdFormula, at: usize, subject: &AgentId) -> Result<bool, CheckError> {
    if at >= trace.states.len() {
        return Err(CheckError::RoundOutOfRange(at));
    }
    let ctx = Ctx { trace, subject };
    ctx.agent(at)?;
    let f = mark_self_peers(f, subject);
    for b in instances(&f, &universe(trace))? {
        if !ctx.eval(&substitute(&f, &b), at)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks `property` at round 0, with a witness or counterexample.
pub fn check(trace: &Trace, property: &CrowdFormula, subject: &AgentId) -> Result<Verdict, CheckError> {
    let ctx = Ctx { trace, subject };
    ctx.agent(0)?;
    let marked = mark_self_peers(property, subject);
    let all = instances(&marked, &universe(trace))?;
    let mut failing = None;
    for b in &all {
        if !ctx.eval(&substitute(&marked, b), 0)? {
            failing = Some(b.clone());
            break;
        }
    }
    let mut verdict = Verdict {
        status: Status::Holds,
        holds: failing.is_none(),
        subject: subject.clone(),
        property: property.to_string(),
        rounds: trace.rounds(),
        quiescent: trace.quiescent,
        witness: None,
        counterexample: None,
        note: NOTE,
    };
    if !trace.quiescent && has_temporal(property) {
        verdict.status = Status::Inconclusive;
        return Ok(verdict);
    }
    match failing {
        Some(b) => {
            verdict.status = Status::Fails;
            let mut trail = Vec::new();
            ctx.explain_false(&substitute(&marked, &b), 0, &mut trail)?;
            let last = trail.last().cloned().unwrap_or(Step {
                round: 0,
                formula: property.to_string(),
            });
            verdict.counterexample = Some(Counterexample {
                round: last.round,
                falsified: last.formula.replace(&format!("?{ANY_PEER}"), subject.as_str()),
                bindings: b.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
                trail: trail
                    .into_iter()
                    .map(|s| Step {
                        round: s.round,
                        formula: s.formula.replace(&format!("?{ANY_PEER}"), subject.as_str()),
                    })
                    .collect(),
                state: StateSlice::of(ctx.agent(last.round)?, last.round),
            });
        }
        None => verdict.witness = witness(&ctx, &marked, &all)?,
    }
    Ok(verdict)
}

fn witness(ctx: &Ctx, f: &CrowdFormula, all: &[Binding]) -> Result<Option<Witness>, CheckError> {
    for (i, c) in f.conjuncts().iter().enumerate() {
        let target = match c {
            CrowdFormula::Eventually(a) => (**a).clone(),
            CrowdFormula::Until(_, b) => (**b).clone(),
            _ => continue,
        };
        for b in all {
            if let Some(round) = ctx.first(&substitute(&target, b), 0)? {
                return Ok(Some(Witness {
                    round,
                    path: vec![i],
                    subformula: substitute(c, b).to_string(),
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{compile_rules, run, EngineConfig};
    use crate::parser::{parse_formula, parse_spec};

    fn trace(src: &str) -> Trace {
        run(&compile_rules(&parse_spec(src).unwrap()).unwrap(), &EngineConfig::default()).unwrap()
    }

    const GROW: &str = "agent a { belief p; rule r1: B p -> B q; rule r2: B q -> B r; }";

    #[test]
    fn lasso_semantics() {
        let t = trace(GROW);
        let a = AgentId::from("a");
        let f = |s: &str| parse_formula(s).unwrap();
        assert_eq!(t.rounds(), 2);
        assert!(eval(&t, &f("[] B p"), 0, &a).unwrap());
        assert!(eval(&t, &f("<> B r"), 0, &a).unwrap());
        assert!(!eval(&t, &f("B r"), 0, &a).unwrap());
        assert!(eval(&t, &f("X X X B r"), 0, &a).unwrap());
        assert!(eval(&t, &f("not B r U B q"), 0, &a).unwrap());
        assert!(!eval(&t, &f("B p U B missing"), 0, &a).unwrap());
        assert!(eval(&t, &f("[] (B q -> X B r)"), 0, &a).unwrap());
    }

    #[test]
    fn verdict_with_witness_and_counterexample() {
        let t = trace(GROW);
        let a = AgentId::from("a");
        let v = check(&t, &parse_formula("<> B r").unwrap(), &a).unwrap();
        assert_eq!(v.status, Status::Holds);
        assert_eq!(v.witness.unwrap().round, 2);
        let v = check(&t, &parse_formula("[] (B q -> <> B missing)").unwrap(), &a).unwrap();
        assert_eq!(v.status, Status::Fails);
        let cx = v.counterexample.unwrap();
        assert_eq!(cx.round, 2);
        assert_eq!(cx.trail[1].round, 1);
    }

    #[test]
    fn self_addressed_message_atoms_match_any_peer() {
        let t = trace("agent s { context k; send M[up, k, adv] B x; }\nagent k { content s; }");
        let s = AgentId::from("s");
        assert!(eval(&t, &parse_formula("M[up, s, adv] B x").unwrap(), 0, &s).unwrap());
        assert!(eval(&t, &parse_formula("M[up, k, adv] B x").unwrap(), 0, &s).unwrap());
        assert!(!eval(&t, &parse_formula("M[up, s, tell] B x").unwrap(), 0, &s).unwrap());
    }

    #[test]
    fn free_variables_are_universal() {
        let t = trace("agent a { belief ok(b), ok(c); }\nagent b { }\nagent c { }");
        let a = AgentId::from("a");
        assert!(!eval(&t, &parse_formula("B ok(?x)").unwrap(), 0, &a).unwrap());
        let v = check(&t, &parse_formula("B ok(?x)").unwrap(), &a).unwrap();
        assert_eq!(v.counterexample.unwrap().bindings["x"], "a");
    }

    #[test]
    fn budget_exhaustion_is_inconclusive() {
        let sys = compile_rules(&parse_spec(GROW).unwrap()).unwrap();
        let t = run(&sys, &EngineConfig { max_rounds: 1, ..Default::default() }).unwrap();
        assert!(!t.quiescent);
        let v = check(&t, &parse_formula("<> B r").unwrap(), &"a".into()).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        assert_eq!(v.exit_code(), 2);
    }

    #[test]
    fn unknown_subject() {
        let t = trace(GROW);
        assert!(matches!(
            check(&t, &CrowdFormula::True, &"zed".into()),
            Err(CheckError::UnknownSubject(_))
        ));
    }
}
