//! Surface syntax tree shared by the parser and the printer.
//!
//! `Syn` keeps the sugar (`|`, `->`, `[]`) and knows nothing about layers.
//! [`lower`] maps it onto the canonical layered AST and [`raise`] goes back,
//! re-discovering sugar from its encodings.

use crate::logic::{CrowdFormula, Direction, MessageType, Modality, PropFormula, Target, Term, BdiFormula};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Syn {
    True,
    Atom(String),
    Pred(String, Vec<Term>),
    Meta(String),
    Cn(Term),
    Cx(Term),
    Not(Box<Syn>),
    And(Box<Syn>, Box<Syn>),
    Or(Box<Syn>, Box<Syn>),
    Implies(Box<Syn>, Box<Syn>),
    Until(Box<Syn>, Box<Syn>),
    Next(Box<Syn>),
    Eventually(Box<Syn>),
    Always(Box<Syn>),
    Modal(Modality, Box<Syn>),
    Msg(Direction, Target, MessageType, Box<Syn>),
}

impl Syn {
    pub(crate) fn precedence(&self) -> u8 {
        match self {
            Syn::Until(..) => 1,
            Syn::Implies(..) => 2,
            Syn::Or(..) => 3,
            Syn::And(..) => 4,
            Syn::Not(_)
            | Syn::Next(_)
            | Syn::Eventually(_)
            | Syn::Always(_)
            | Syn::Modal(..)
            | Syn::Msg(..) => 5,
            Syn::True | Syn::Atom(_) | Syn::Pred(..) | Syn::Meta(_) | Syn::Cn(_) | Syn::Cx(_) => 6,
        }
    }
}

/// Lowers a modal operand. Fails on anything outside the propositional layer.
pub(crate) fn lower_prop(s: &Syn) -> Result<PropFormula, String> {
    Ok(match s {
        Syn::Atom(a) => PropFormula::Atom(a.clone()),
        Syn::Pred(n, args) => PropFormula::Pred(n.clone(), args.clone()),
        Syn::Cn(t) => PropFormula::Pred("cn".into(), vec![t.clone()]),
        Syn::Cx(t) => PropFormula::Pred("cx".into(), vec![t.clone()]),
        Syn::Not(a) => PropFormula::not(lower_prop(a)?),
        Syn::And(a, b) => PropFormula::and(lower_prop(a)?, lower_prop(b)?),
        Syn::Or(a, b) => PropFormula::not(PropFormula::and(
            PropFormula::not(lower_prop(a)?),
            PropFormula::not(lower_prop(b)?),
        )),
        Syn::Implies(a, b) => PropFormula::not(PropFormula::and(lower_prop(a)?, PropFormula::not(lower_prop(b)?))),
        Syn::True => return Err("`true` is not a propositional formula".into()),
        Syn::Meta(m) => return Err(format!("formula variable `?{m}` cannot appear under a modal operator")),
        Syn::Modal(op, _) => return Err(format!("modal operator {} cannot be nested", op.symbol())),
        Syn::Msg(..) => return Err("message operator cannot appear under a modal operator".into()),
        Syn::Until(..) | Syn::Next(_) | Syn::Eventually(_) | Syn::Always(_) => {
            return Err("temporal operator cannot appear under a modal operator".into())
        }
    })
}

pub(crate) fn lower(s: &Syn) -> CrowdFormula {
    match s {
        Syn::True => CrowdFormula::True,
        Syn::Atom(a) => CrowdFormula::from(PropFormula::Atom(a.clone())),
        Syn::Pred(n, args) => CrowdFormula::from(PropFormula::Pred(n.clone(), args.clone())),
        Syn::Meta(m) => CrowdFormula::Meta(m.clone()),
        Syn::Cn(t) => CrowdFormula::Cn(t.clone()),
        Syn::Cx(t) => CrowdFormula::Cx(t.clone()),
        Syn::Not(a) => CrowdFormula::not(lower(a)),
        Syn::And(a, b) => CrowdFormula::and(lower(a), lower(b)),
        Syn::Or(a, b) => CrowdFormula::or(lower(a), lower(b)),
        Syn::Implies(a, b) => CrowdFormula::implies(lower(a), lower(b)),
        Syn::Until(a, b) => CrowdFormula::until(lower(a), lower(b)),
        Syn::Next(a) => CrowdFormula::next(lower(a)),
        Syn::Eventually(a) => CrowdFormula::eventually(lower(a)),
        Syn::Always(a) => CrowdFormula::always(lower(a)),
        // Operands were validated when parsed.
        Syn::Modal(op, a) => CrowdFormula::modal(*op, lower_prop(a).expect("modal operand checked at parse time")),
        Syn::Msg(d, t, k, body) => CrowdFormula::msg(*d, t.clone(), *k, lower(body)),
    }
}

fn bx(s: Syn) -> Box<Syn> {
    Box::new(s)
}

pub(crate) fn raise_prop(p: &PropFormula) -> Syn {
    if let PropFormula::Not(inner) = p {
        if let PropFormula::And(a, b) = &**inner {
            match (&**a, &**b) {
                (PropFormula::Not(x), PropFormula::Not(y)) => return Syn::Or(bx(raise_prop(x)), bx(raise_prop(y))),
                (x, PropFormula::Not(y)) => return Syn::Implies(bx(raise_prop(x)), bx(raise_prop(y))),
                _ => {}
            }
        }
    }
    match p {
        PropFormula::Atom(a) => Syn::Atom(a.clone()),
        PropFormula::Pred(n, args) if (n == "cn" || n == "cx") && args.len() == 1 => {
            if n == "cn" {
                Syn::Cn(args[0].clone())
            } else {
                Syn::Cx(args[0].clone())
            }
        }
        PropFormula::Pred(n, args) => Syn::Pred(n.clone(), args.clone()),
        PropFormula::Not(a) => Syn::Not(bx(raise_prop(a))),
        PropFormula::And(a, b) => Syn::And(bx(raise_prop(a)), bx(raise_prop(b))),
    }
}

pub(crate) fn raise(f: &CrowdFormula) -> Syn {
    if let Some(x) = f.as_always() {
        return Syn::Always(bx(raise(&x)));
    }
    if let Some((a, b)) = f.as_disjunction() {
        return Syn::Or(bx(raise(&a)), bx(raise(&b)));
    }
    if let Some((a, b)) = f.as_implication() {
        return Syn::Implies(bx(raise(&a)), bx(raise(&b)));
    }
    match f {
        CrowdFormula::True => Syn::True,
        CrowdFormula::Bdi(b) => match b {
            BdiFormula::Prop(p) => raise_prop(p),
            BdiFormula::Not(a) => Syn::Not(bx(raise(&CrowdFormula::Bdi((**a).clone())))),
            BdiFormula::And(a, c) => Syn::And(
                bx(raise(&CrowdFormula::Bdi((**a).clone()))),
                bx(raise(&CrowdFormula::Bdi((**c).clone()))),
            ),
            BdiFormula::Modal(op, p) => Syn::Modal(*op, bx(raise_prop(p))),
        },
        CrowdFormula::Not(a) => Syn::Not(bx(raise(a))),
        CrowdFormula::And(a, b) => Syn::And(bx(raise(a)), bx(raise(b))),
        CrowdFormula::Until(a, b) => Syn::Until(bx(raise(a)), bx(raise(b))),
        CrowdFormula::Next(a) => Syn::Next(bx(raise(a))),
        CrowdFormula::Eventually(a) => Syn::Eventually(bx(raise(a))),
        CrowdFormula::Msg { dir, target, kind, body } => Syn::Msg(*dir, target.clone(), *kind, bx(raise(body))),
        CrowdFormula::Cn(t) => Syn::Cn(t.clone()),
        CrowdFormula::Cx(t) => Syn::Cx(t.clone()),
        CrowdFormula::Meta(m) => Syn::Meta(m.clone()),
    }
}
