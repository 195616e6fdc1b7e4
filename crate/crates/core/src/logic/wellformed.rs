//! Grammar checks for crowd formulas.

use std::fmt;

use serde::Serialize;

use super::formula::{CrowdFormula, Direction};

/// Which grammar a formula is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrammarMode {
    /// Temporal operators take only BDI arguments.
    Strict,
    /// Temporal operators may also range over message formulas.
    #[default]
    Liberal,
}

/// A grammar violation located by the child-index path from the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: Vec<usize>,
    pub subformula: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.path.iter().map(|i| i.to_string()).collect();
        write!(f, "at /{}: {} in `{}`", path.join("/"), self.message, self.subformula)
    }
}

/// Returns every grammar violation of `f` under `mode`; empty means well-formed.
pub fn check_wellformed(f: &CrowdFormula, mode: GrammarMode) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    walk(f, mode, &mut path, &mut out);
    out
}

fn report(f: &CrowdFormula, path: &[usize], message: &str, out: &mut Vec<Diagnostic>) {
    out.push(Diagnostic {
        path: path.to_vec(),
        subformula: f.to_string(),
        message: message.to_owned(),
    });
}

/// BDI-level in the strict sense: no temporal and no message operator.
fn is_bdi_level(f: &CrowdFormula) -> bool {
    match f {
        CrowdFormula::True
        | CrowdFormula::Bdi(_)
        | CrowdFormula::Cn(_)
        | CrowdFormula::Cx(_)
        | CrowdFormula::Meta(_) => true,
        CrowdFormula::Not(a) => is_bdi_level(a),
        CrowdFormula::And(a, b) => is_bdi_level(a) && is_bdi_level(b),
        _ => false,
    }
}

fn strict_temporal_arg(arg: &CrowdFormula, path: &[usize], out: &mut Vec<Diagnostic>, parent: &CrowdFormula) {
    if is_bdi_level(arg) {
        return;
    }
    let message = if arg.has_temporal_outside_messages() {
        "temporal over temporal outside message scope"
    } else {
        "temporal over message formula outside message scope"
    };
    report(parent, path, message, out);
}

fn walk(f: &CrowdFormula, mode: GrammarMode, path: &mut Vec<usize>, out: &mut Vec<Diagnostic>) {
    match f {
        CrowdFormula::Msg { dir, target, body, .. } => {
            if *dir == Direction::Down && target.is_broadcast() {
                report(f, path, "broadcast target in received-message position", out);
            }
            descend(body, 0, mode, path, out);
        }
        CrowdFormula::Not(a) => descend(a, 0, mode, path, out),
        CrowdFormula::And(a, b) => {
            descend(a, 0, mode, path, out);
            descend(b, 1, mode, path, out);
        }
        CrowdFormula::Next(a) | CrowdFormula::Eventually(a) => {
            if mode == GrammarMode::Strict {
                strict_temporal_arg(a, path, out, f);
            }
            descend(a, 0, mode, path, out);
        }
        CrowdFormula::Until(a, b) => {
            if mode == GrammarMode::Strict {
                if !is_bdi_level(a) {
                    strict_temporal_arg(a, path, out, f);
                } else {
                    strict_temporal_arg(b, path, out, f);
                }
            }
            descend(a, 0, mode, path, out);
            descend(b, 1, mode, path, out);
        }
        CrowdFormula::True
        | CrowdFormula::Bdi(_)
        | CrowdFormula::Cn(_)
        | CrowdFormula::Cx(_)
        | CrowdFormula::Meta(_) => {}
    }
}

fn descend(f: &CrowdFormula, idx: usize, mode: GrammarMode, path: &mut Vec<usize>, out: &mut Vec<Diagnostic>) {
    path.push(idx);
    walk(f, mode, path, out);
    path.pop();
}
