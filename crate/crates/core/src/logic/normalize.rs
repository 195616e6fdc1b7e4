//! Collapsing nested message chains.
//!
//! A chain `M M ... M f` of directly nested message operators keeps only
//! its outermost and innermost operators. Both keep their orientation and
//! target, the innermost keeps its type, and the outermost becomes `tell`.

use super::formula::{CrowdFormula, Direction, MessageType, Target};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Reproduce the literal second row of the nesting table: a chain whose
    /// outermost operator is received and whose innermost is sent collapses
    /// to a sent outer operator.
    pub compat_eq1_row2: bool,
}

pub fn normalize_messages(f: &CrowdFormula) -> CrowdFormula {
    normalize_messages_with(f, NormalizeOptions::default())
}

pub fn normalize_messages_with(f: &CrowdFormula, opts: NormalizeOptions) -> CrowdFormula {
    match f {
        CrowdFormula::Msg { dir, target, kind, body } => {
            let mut chain: Vec<(Direction, &Target, MessageType)> = vec![(*dir, target, *kind)];
            let mut cur: &CrowdFormula = body;
            while let CrowdFormula::Msg { dir, target, kind, body } = cur {
                chain.push((*dir, target, *kind));
                cur = body;
            }
            let content = normalize_messages_with(cur, opts);
            if chain.len() == 1 {
                return CrowdFormula::msg(*dir, target.clone(), *kind, content);
            }
            let (outer_dir, outer_target, _) = chain[0];
            let (inner_dir, inner_target, inner_kind) = chain[chain.len() - 1];
            let outer_dir = if opts.compat_eq1_row2 && outer_dir == Direction::Down && inner_dir == Direction::Up {
                Direction::Up
            } else {
                outer_dir
            };
            CrowdFormula::msg(
                outer_dir,
                outer_target.clone(),
                MessageType::Tell,
                CrowdFormula::msg(inner_dir, inner_target.clone(), inner_kind, content),
            )
        }
        CrowdFormula::Not(a) => CrowdFormula::Not(Box::new(normalize_messages_with(a, opts))),
        CrowdFormula::And(a, b) => CrowdFormula::And(
            Box::new(normalize_messages_with(a, opts)),
            Box::new(normalize_messages_with(b, opts)),
        ),
        CrowdFormula::Until(a, b) => CrowdFormula::Until(
            Box::new(normalize_messages_with(a, opts)),
            Box::new(normalize_messages_with(b, opts)),
        ),
        CrowdFormula::Next(a) => CrowdFormula::Next(Box::new(normalize_messages_with(a, opts))),
        CrowdFormula::Eventually(a) => CrowdFormula::Eventually(Box::new(normalize_messages_with(a, opts))),
        CrowdFormula::True
        | CrowdFormula::Bdi(_)
        | CrowdFormula::Cn(_)
        | CrowdFormula::Cx(_)
        | CrowdFormula::Meta(_) => f.clone(),
    }
}

pub fn is_normalized(f: &CrowdFormula) -> bool {
    normalize_messages(f) == *f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_formula;

    fn norm(src: &str) -> String {
        normalize_messages(&parse_formula(src).unwrap()).to_string()
    }

    #[test]
    fn depth_two_tell_is_fixpoint() {
        let src = "M[down, j, tell] M[down, j, adv] (A find_nemo -> <> A earn)";
        assert_eq!(norm(src), src);
    }

    #[test]
    fn three_deep_chain_keeps_ends() {
        assert_eq!(
            norm("M[down, i, ask] M[up, i, do] M[down, i, tell] p"),
            "M[down, i, tell] M[down, i, tell] p"
        );
    }

    #[test]
    fn outer_type_forced_to_tell() {
        assert_eq!(norm("M[up, i, adv] M[down, i, do] p"), "M[up, i, tell] M[down, i, do] p");
    }

    #[test]
    fn compat_flag_flips_row_two() {
        let f = parse_formula("M[down, i, ask] M[up, i, do] q").unwrap();
        let opts = NormalizeOptions { compat_eq1_row2: true };
        assert_eq!(
            normalize_messages_with(&f, opts).to_string(),
            "M[up, i, tell] M[up, i, do] q"
        );
        assert_eq!(normalize_messages(&f).to_string(), "M[down, i, tell] M[up, i, do] q");
    }

    #[test]
    fn message_free_untouched() {
        let f = parse_formula("[] (B p -> <> (G q U I r))").unwrap();
        assert_eq!(normalize_messages(&f), f);
    }

    #[test]
    fn chains_under_connectives_are_collapsed() {
        assert_eq!(
            norm("<> M[up, a, do] M[up, b, ask] M[up, c, adv] p & B q"),
            "<> M[up, a, tell] M[up, c, adv] p & B q"
        );
    }
}
