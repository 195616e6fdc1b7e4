//! Canonical text rendering. `parse(print(x)) == x` for every canonical AST.

use std::fmt::{self, Write as _};

use super::syntax::{raise, raise_prop, Syn};
use super::{AgentDecl, PropertyDecl, SpecDocument};
use crate::logic::{BdiFormula, CrowdFormula, PropFormula, Target, Term};

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Id(id) => write!(f, "{id}"),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Peer(t) => write!(f, "{t}"),
            Target::ContentBroadcast => f.write_str("CN"),
            Target::ContextBroadcast => f.write_str("CX"),
        }
    }
}

fn write_syn(out: &mut String, s: &Syn, min: u8) {
    let prec = s.precedence();
    let paren = prec < min;
    if paren {
        out.push('(');
    }
    match s {
        Syn::True => out.push_str("true"),
        Syn::Atom(a) => out.push_str(a),
        Syn::Pred(n, args) => {
            out.push_str(n);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{a}");
            }
            out.push(')');
        }
        Syn::Meta(m) => {
            let _ = write!(out, "?{m}");
        }
        Syn::Cn(t) => {
            let _ = write!(out, "cn({t})");
        }
        Syn::Cx(t) => {
            let _ = write!(out, "cx({t})");
        }
        Syn::Not(a) => prefix(out, "not ", a),
        Syn::Next(a) => prefix(out, "X ", a),
        Syn::Eventually(a) => prefix(out, "<> ", a),
        Syn::Always(a) => prefix(out, "[] ", a),
        Syn::Modal(op, a) => {
            out.push_str(op.symbol());
            out.push(' ');
            write_syn(out, a, 5);
        }
        Syn::Msg(d, t, k, body) => {
            let _ = write!(out, "M[{}, {}, {}] ", d.keyword(), t, k.keyword());
            write_syn(out, body, 5);
        }
        // Left-associative.
        Syn::And(a, b) => infix(out, a, " & ", b, prec, prec + 1),
        Syn::Or(a, b) => infix(out, a, " | ", b, prec, prec + 1),
        // Right-associative.
        Syn::Implies(a, b) => infix(out, a, " -> ", b, prec + 1, prec),
        Syn::Until(a, b) => infix(out, a, " U ", b, prec + 1, prec),
    }
    if paren {
        out.push(')');
    }
}

fn prefix(out: &mut String, op: &str, a: &Syn) {
    out.push_str(op);
    write_syn(out, a, 5);
}

fn infix(out: &mut String, a: &Syn, op: &str, b: &Syn, lmin: u8, rmin: u8) {
    write_syn(out, a, lmin);
    out.push_str(op);
    write_syn(out, b, rmin);
}

pub(crate) fn syn_to_string(s: &Syn, min: u8) -> String {
    let mut out = String::new();
    write_syn(&mut out, s, min);
    out
}

impl fmt::Display for CrowdFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&syn_to_string(&raise(self), 0))
    }
}

impl fmt::Display for BdiFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&syn_to_string(&raise(&CrowdFormula::Bdi(self.clone())), 0))
    }
}

impl fmt::Display for PropFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&syn_to_string(&raise_prop(self), 0))
    }
}

/// Renders a formula in canonical concrete syntax.
pub fn pretty_print_formula(f: &CrowdFormula) -> String {
    f.to_string()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

fn write_agent(out: &mut String, a: &AgentDecl) {
    if a.external {
        let _ = writeln!(out, "extern agent {};", a.id);
        return;
    }
    let _ = writeln!(out, "agent {} {{", a.id);
    for (kw, items) in [
        ("belief", &a.beliefs),
        ("goal", &a.goals),
        ("intention", &a.intentions),
        ("ability", &a.abilities),
    ] {
        if !items.is_empty() {
            // Operands print above `,` so each item re-parses on its own.
            let rendered: Vec<String> = items.iter().map(|p| syn_to_string(&raise_prop(p), 0)).collect();
            let _ = writeln!(out, "  {kw} {};", rendered.join(", "));
        }
    }
    if !a.content.is_empty() {
        let _ = writeln!(out, "  content {};", join(&a.content));
    }
    if !a.context.is_empty() {
        let _ = writeln!(out, "  context {};", join(&a.context));
    }
    for r in &a.rules {
        let _ = write!(out, "  rule {}", r.name);
        if !r.distinct.is_empty() {
            let vars: Vec<String> = r.distinct.iter().map(|v| format!("?{v}")).collect();
            let _ = write!(out, " distinct({})", vars.join(", "));
        }
        let syn = Syn::Implies(Box::new(raise(&r.premise)), Box::new(raise(&r.consequence)));
        let _ = writeln!(out, ": {};", syn_to_string(&syn, 0));
    }
    for s in &a.sends {
        let _ = writeln!(out, "  send {s};");
    }
    out.push_str("}\n");
}

/// Renders a specification document in canonical concrete syntax.
pub fn pretty_print_spec(doc: &SpecDocument) -> String {
    let mut out = String::new();
    for (i, a) in doc.agents.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_agent(&mut out, a);
    }
    out
}

/// Renders a property list in the `.props` format.
pub fn pretty_print_props(props: &[PropertyDecl]) -> String {
    let mut out = String::new();
    for p in props {
        let _ = write!(out, "property {} subject {}", p.name, p.subject);
        if let Some(e) = p.expect {
            let _ = write!(out, " expect {}", e.keyword());
        }
        let _ = writeln!(out, ": {};", p.formula);
    }
    out
}

#[cfg(test)]
mod tests {
    use crate::logic::{CrowdFormula, Modality, PropFormula, Target};
    use crate::parser::parse_formula;

    #[test]
    fn canonical_broadcast_form() {
        let f = CrowdFormula::send(
            Target::ContentBroadcast,
            crate::logic::MessageType::Tell,
            CrowdFormula::modal(Modality::Belief, PropFormula::atom("p")),
        );
        assert_eq!(f.to_string(), "M[up, CN, tell] B p");
    }

    #[test]
    fn precedence_parenthesization() {
        for src in [
            "not (p & q)",
            "p -> q -> r",
            "(p U q) U r",
            "p U q U r",
            "<> (p U q)",
            "<> p U q",
            "p & (q | r)",
            "p | q & r",
            "B (p & q) & G r",
            "M[up, j, tell] (B p & B q)",
            "not not p",
            "[] (p -> <> q)",
        ] {
            assert_eq!(parse_formula(src).unwrap().to_string(), src, "source {src}");
        }
    }

    #[test]
    fn sugar_with_shared_encoding_round_trips_structurally() {
        // `(p -> q) -> r` and `p & not q | r` share one encoding.
        let f = parse_formula("(p -> q) -> r").unwrap();
        let printed = f.to_string();
        assert_eq!(parse_formula(&printed).unwrap(), f);
        assert_eq!(parse_formula(&printed).unwrap().to_string(), printed);
    }
}
