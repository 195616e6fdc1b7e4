//! Unification of premise patterns against an agent's state and
//! closed-world evaluation of ground premise formulas.

use crate::agent::{Agent, AgentError};
use crate::logic::{
    substitute, AgentId, BdiFormula, Binding, CrowdFormula, Modality, NormalizeOptions, PropFormula, Target, Term,
    Value,
};

use super::rule::{Conjunction, Pattern};

fn unify_term(pat: &Term, val: &AgentId, b: &mut Binding) -> bool {
    match pat {
        Term::Id(id) => id == val,
        Term::Var(v) => match b.get(v) {
            Some(Value::Id(bound)) => bound == val,
            Some(Value::Formula(_)) => false,
            None => {
                b.insert(v.clone(), Value::Id(val.clone()));
                true
            }
        },
    }
}

fn unify_prop(pat: &PropFormula, val: &PropFormula, b: &mut Binding) -> bool {
    match (pat, val) {
        (PropFormula::Atom(x), PropFormula::Atom(y)) => x == y,
        (PropFormula::Pred(n, xs), PropFormula::Pred(m, ys)) => {
            n == m
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(x, y)| match y {
                    Term::Id(id) => unify_term(x, id, b),
                    Term::Var(_) => false,
                })
        }
        (PropFormula::Not(x), PropFormula::Not(y)) => unify_prop(x, y, b),
        (PropFormula::And(x1, x2), PropFormula::And(y1, y2)) => unify_prop(x1, y1, b) && unify_prop(x2, y2, b),
        _ => false,
    }
}

fn unify_bdi(pat: &BdiFormula, val: &BdiFormula, b: &mut Binding) -> bool {
    match (pat, val) {
        (BdiFormula::Prop(x), BdiFormula::Prop(y)) => unify_prop(x, y, b),
        (BdiFormula::Modal(m, x), BdiFormula::Modal(n, y)) => m == n && unify_prop(x, y, b),
        (BdiFormula::Not(x), BdiFormula::Not(y)) => unify_bdi(x, y, b),
        (BdiFormula::And(x1, x2), BdiFormula::And(y1, y2)) => unify_bdi(x1, y1, b) && unify_bdi(x2, y2, b),
        _ => false,
    }
}

/// Structural matching of a formula pattern against a ground formula.
pub fn unify_formula(pat: &CrowdFormula, val: &CrowdFormula, b: &mut Binding) -> bool {
    use CrowdFormula as F;
    match (pat, val) {
        (F::Meta(m), _) => match b.get(m) {
            Some(Value::Formula(bound)) => bound == val,
            Some(Value::Id(_)) => false,
            None => {
                b.insert(m.clone(), Value::Formula(val.clone()));
                true
            }
        },
        (F::True, F::True) => true,
        (F::Bdi(x), F::Bdi(y)) => unify_bdi(x, y, b),
        (F::Not(x), F::Not(y)) | (F::Next(x), F::Next(y)) | (F::Eventually(x), F::Eventually(y)) => {
            unify_formula(x, y, b)
        }
        (F::And(x1, x2), F::And(y1, y2)) | (F::Until(x1, x2), F::Until(y1, y2)) => {
            unify_formula(x1, y1, b) && unify_formula(x2, y2, b)
        }
        (F::Cn(x), F::Cn(Term::Id(y))) | (F::Cx(x), F::Cx(Term::Id(y))) => unify_term(x, y, b),
        (
            F::Msg { dir, target, kind, body },
            F::Msg {
                dir: d2,
                target: t2,
                kind: k2,
                body: b2,
            },
        ) => {
            dir == d2
                && kind == k2
                && match (target, t2) {
                    (Target::Peer(x), Target::Peer(Term::Id(y))) => unify_term(x, y, b),
                    (x, y) => x == y,
                }
                && unify_formula(body, b2, b)
        }
        _ => false,
    }
}

/// Every extension of `b` under which `pat` matches the agent's state.
fn match_pattern(agent: &Agent, pat: &Pattern, b: &Binding) -> Vec<Binding> {
    let mut out = Vec::new();
    let mut try_with = |f: &mut dyn FnMut(&mut Binding) -> bool| {
        let mut nb = b.clone();
        if f(&mut nb) {
            out.push(nb);
        }
    };
    match pat {
        Pattern::Fact(m, p) => {
            for member in agent.facts(*m) {
                try_with(&mut |nb| unify_prop(p, member, nb));
            }
        }
        Pattern::Cn(t) => {
            for j in &agent.cn {
                try_with(&mut |nb| unify_term(t, j, nb));
            }
        }
        Pattern::Cx(t) => {
            for j in &agent.cx {
                try_with(&mut |nb| unify_term(t, j, nb));
            }
        }
        Pattern::Msg {
            dir,
            target: Target::Peer(t),
            kind,
            body,
        } => {
            for r in agent.com.iter().filter(|r| r.dir == *dir && r.kind == *kind) {
                try_with(&mut |nb| unify_term(t, &r.peer, nb) && unify_formula(body, &r.body, nb));
            }
        }
        Pattern::Msg { dir, target, kind, body } => {
            // A broadcast premise needs the record for every current member.
            let members = if *target == Target::ContentBroadcast { &agent.cn } else { &agent.cx };
            let mut partial = vec![b.clone()];
            for j in members {
                let peer = Pattern::Msg {
                    dir: *dir,
                    target: Target::Peer(Term::Id(j.clone())),
                    kind: *kind,
                    body: body.clone(),
                };
                partial = partial.iter().flat_map(|pb| match_pattern(agent, &peer, pb)).collect();
            }
            out = partial;
        }
    }
    out
}

fn distinct_ok(b: &Binding, distinct: &[String]) -> bool {
    let vals: Vec<&Value> = distinct.iter().filter_map(|v| b.get(v)).collect();
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            if vals[i] == vals[j] {
                return false;
            }
        }
    }
    true
}

fn solve_patterns(agent: &Agent, pats: &[Pattern], distinct: &[String], seed: Binding) -> Vec<Binding> {
    let mut bindings = vec![seed];
    for p in pats {
        bindings = bindings
            .iter()
            .flat_map(|b| match_pattern(agent, p, b))
            .filter(|b| distinct_ok(b, distinct))
            .collect();
        if bindings.is_empty() {
            break;
        }
    }
    bindings
}

/// Closed-world truth of a ground premise formula in one agent's state.
pub fn holds(agent: &Agent, f: &CrowdFormula, opts: NormalizeOptions) -> Result<bool, AgentError> {
    Ok(match f {
        CrowdFormula::Not(a) => !holds(agent, a, opts)?,
        CrowdFormula::And(a, b) => holds(agent, a, opts)? && holds(agent, b, opts)?,
        CrowdFormula::Bdi(b) => holds_bdi(agent, b),
        _ => agent.satisfies_atom_with(f, opts)?,
    })
}

fn holds_bdi(agent: &Agent, f: &BdiFormula) -> bool {
    match f {
        BdiFormula::Prop(p) => holds_bare(agent, p),
        BdiFormula::Modal(m, p) => agent.holds_fact(*m, p),
        BdiFormula::Not(a) => !holds_bdi(agent, a),
        BdiFormula::And(a, b) => holds_bdi(agent, a) && holds_bdi(agent, b),
    }
}

fn holds_bare(agent: &Agent, p: &PropFormula) -> bool {
    match p {
        PropFormula::Not(a) => !holds_bare(agent, a),
        PropFormula::And(a, b) => holds_bare(agent, a) && holds_bare(agent, b),
        _ => agent.holds_fact(Modality::Belief, p),
    }
}

/// All bindings extending `seed` that satisfy the conjunction, sorted and
/// without duplicates.
pub fn solve(
    agent: &Agent,
    conj: &Conjunction,
    distinct: &[String],
    seed: Binding,
    opts: NormalizeOptions,
) -> Result<Vec<Binding>, AgentError> {
    let mut out = Vec::new();
    'next: for b in solve_patterns(agent, &conj.positives, distinct, seed) {
        for t in &conj.tests {
            if !holds(agent, &substitute(t, &b), opts)? {
                continue 'next;
            }
        }
        for a in &conj.absent {
            if !solve_patterns(agent, a, distinct, b.clone()).is_empty() {
                continue 'next;
            }
        }
        out.push(b);
    }
    out.sort();
    out.dedup();
    Ok(out)
}
