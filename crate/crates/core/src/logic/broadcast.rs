//! Expansion of the `CN`/`CX` broadcast shorthand.

use std::collections::BTreeSet;

use super::formula::{AgentId, CrowdFormula, Direction, Target, Term};
use super::LogicError;

/// Replaces every broadcast message with the conjunction of its peer-targeted
/// copies over `cn` or `cx`. An empty set yields `true`.
pub fn expand_broadcast(
    f: &CrowdFormula,
    cn: &BTreeSet<AgentId>,
    cx: &BTreeSet<AgentId>,
) -> Result<CrowdFormula, LogicError> {
    Ok(match f {
        CrowdFormula::Msg { dir, target, kind, body } => {
            let body = expand_broadcast(body, cn, cx)?;
            let members = match target {
                Target::Peer(_) => return Ok(CrowdFormula::msg(*dir, target.clone(), *kind, body)),
                Target::ContentBroadcast => cn,
                Target::ContextBroadcast => cx,
            };
            if *dir == Direction::Down {
                return Err(LogicError::BroadcastReceive(f.to_string()));
            }
            CrowdFormula::conjunction(
                members
                    .iter()
                    .map(|j| CrowdFormula::msg(*dir, Target::Peer(Term::Id(j.clone())), *kind, body.clone())),
            )
        }
        CrowdFormula::Not(a) => CrowdFormula::not(expand_broadcast(a, cn, cx)?),
        CrowdFormula::And(a, b) => CrowdFormula::and(expand_broadcast(a, cn, cx)?, expand_broadcast(b, cn, cx)?),
        CrowdFormula::Until(a, b) => CrowdFormula::until(expand_broadcast(a, cn, cx)?, expand_broadcast(b, cn, cx)?),
        CrowdFormula::Next(a) => CrowdFormula::next(expand_broadcast(a, cn, cx)?),
        CrowdFormula::Eventually(a) => CrowdFormula::eventually(expand_broadcast(a, cn, cx)?),
        other => other.clone(),
    })
}
