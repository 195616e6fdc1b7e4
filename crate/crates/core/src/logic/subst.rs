//! Variable bindings and substitution.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use super::formula::{AgentId, BdiFormula, CrowdFormula, PropFormula, Target, Term};

/// What a variable is bound to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Id(AgentId),
    Formula(CrowdFormula),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Id(id) => write!(f, "{id}"),
            Value::Formula(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Variable name (without the `?`) to value, ordered for determinism.
pub type Binding = BTreeMap<String, Value>;

pub fn subst_term(t: &Term, b: &Binding) -> Term {
    match t {
        Term::Var(v) => match b.get(v) {
            Some(Value::Id(id)) => Term::Id(id.clone()),
            _ => t.clone(),
        },
        Term::Id(_) => t.clone(),
    }
}

pub fn subst_prop(p: &PropFormula, b: &Binding) -> PropFormula {
    match p {
        PropFormula::Atom(_) => p.clone(),
        PropFormula::Pred(n, args) => PropFormula::Pred(n.clone(), args.iter().map(|a| subst_term(a, b)).collect()),
        PropFormula::Not(a) => PropFormula::not(subst_prop(a, b)),
        PropFormula::And(x, y) => PropFormula::and(subst_prop(x, b), subst_prop(y, b)),
    }
}

pub fn subst_bdi(f: &BdiFormula, b: &Binding) -> BdiFormula {
    match f {
        BdiFormula::Prop(p) => BdiFormula::Prop(subst_prop(p, b)),
        BdiFormula::Modal(op, p) => BdiFormula::Modal(*op, subst_prop(p, b)),
        BdiFormula::Not(a) => BdiFormula::Not(Box::new(subst_bdi(a, b))),
        BdiFormula::And(x, y) => BdiFormula::And(Box::new(subst_bdi(x, b)), Box::new(subst_bdi(y, b))),
    }
}

/// Replaces bound variables. Formula variables bound to a BDI-level value
/// are re-canonicalized through the smart constructors of the enclosing
/// connectives.
pub fn substitute(f: &CrowdFormula, b: &Binding) -> CrowdFormula {
    match f {
        CrowdFormula::True => CrowdFormula::True,
        CrowdFormula::Bdi(x) => CrowdFormula::Bdi(subst_bdi(x, b)),
        CrowdFormula::Not(a) => CrowdFormula::not(substitute(a, b)),
        CrowdFormula::And(x, y) => CrowdFormula::and(substitute(x, b), substitute(y, b)),
        CrowdFormula::Until(x, y) => CrowdFormula::until(substitute(x, b), substitute(y, b)),
        CrowdFormula::Next(a) => CrowdFormula::next(substitute(a, b)),
        CrowdFormula::Eventually(a) => CrowdFormula::eventually(substitute(a, b)),
        CrowdFormula::Msg { dir, target, kind, body } => {
            let target = match target {
                Target::Peer(t) => Target::Peer(subst_term(t, b)),
                other => other.clone(),
            };
            CrowdFormula::msg(*dir, target, *kind, substitute(body, b))
        }
        CrowdFormula::Cn(t) => CrowdFormula::Cn(subst_term(t, b)),
        CrowdFormula::Cx(t) => CrowdFormula::Cx(subst_term(t, b)),
        CrowdFormula::Meta(m) => match b.get(m) {
            Some(Value::Formula(x)) => x.clone(),
            _ => f.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_formula;

    #[test]
    fn substitutes_ids_and_formulas() {
        let f = parse_formula("M[down, ?i, tell] ?phi & B safe(?i, s1)").unwrap();
        let mut b = Binding::new();
        b.insert("i".into(), Value::Id("c1".into()));
        b.insert("phi".into(), Value::Formula(parse_formula("B p").unwrap()));
        let g = substitute(&f, &b);
        assert_eq!(g, parse_formula("M[down, c1, tell] B p & B safe(c1, s1)").unwrap());
        assert!(g.is_ground());
    }

    #[test]
    fn unbound_left_alone() {
        let f = parse_formula("cn(?x)").unwrap();
        assert_eq!(substitute(&f, &Binding::new()), f);
    }
}
