//! Relaying contexts, direct reachability and neighbourhoods over the
//! containment structure of a crowd.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::agent::{Agent, CrowdSystem};
use crate::engine::Rule;
use crate::logic::{AgentId, CrowdFormula, Direction, MessageType, Target, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
}

fn var(t: &Term) -> Option<&str> {
    match t {
        Term::Var(v) => Some(v),
        Term::Id(_) => None,
    }
}

/// Matches `(cn(?i) | cx(?i)) & M[down, ?i, tell] ?phi -> M[up, CN, tell] ?phi`
/// up to renaming of `?i` and `?phi` and the order of conjuncts and disjuncts.
pub fn is_relay_rule(r: &Rule) -> bool {
    let CrowdFormula::Msg {
        dir: Direction::Up,
        target: Target::ContentBroadcast,
        kind: MessageType::Tell,
        body,
    } = &r.consequence
    else {
        return false;
    };
    let CrowdFormula::Meta(phi) = &**body else { return false };
    let conj = r.premise.conjuncts();
    if conj.len() != 2 {
        return false;
    }
    let member = |f: &CrowdFormula| -> Option<String> {
        let (a, b) = f.as_disjunction()?;
        match (a, b) {
            (CrowdFormula::Cn(x), CrowdFormula::Cx(y)) | (CrowdFormula::Cx(y), CrowdFormula::Cn(x)) => {
                let (x, y) = (var(&x)?, var(&y)?);
                (x == y).then(|| x.to_string())
            }
            _ => None,
        }
    };
    let incoming = |f: &CrowdFormula| -> Option<String> {
        match f {
            CrowdFormula::Msg {
                dir: Direction::Down,
                target: Target::Peer(t),
                kind: MessageType::Tell,
                body,
            } if **body == CrowdFormula::Meta(phi.clone()) => var(t).map(str::to_string),
            _ => None,
        }
    };
    [(0, 1), (1, 0)].iter().any(|&(d, m)| match (member(&conj[d]), incoming(&conj[m])) {
        (Some(i), Some(j)) => i == j && i != *phi,
        _ => false,
    })
}

fn agent_is_relaying(a: &Agent) -> bool {
    a.rules.iter().any(is_relay_rule)
}

pub fn is_relaying(sys: &CrowdSystem, k: &AgentId) -> Result<bool, StructureError> {
    match sys.agents.get(k) {
        Some(a) => Ok(agent_is_relaying(a)),
        None if sys.externals.contains(k) => Ok(false),
        None => Err(StructureError::UnknownAgent(k.clone())),
    }
}

/// Containment edges and relay flags of a system, for repeated queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentGraph {
    pub nodes: BTreeSet<AgentId>,
    pub cn: BTreeMap<AgentId, BTreeSet<AgentId>>,
    pub cx: BTreeMap<AgentId, BTreeSet<AgentId>>,
    pub relaying: BTreeSet<AgentId>,
}

impl ContainmentGraph {
    pub fn from_system(sys: &CrowdSystem) -> Self {
        Self {
            nodes: sys.agents.keys().cloned().collect(),
            cn: sys.agents.iter().map(|(id, a)| (id.clone(), a.cn.clone())).collect(),
            cx: sys.agents.iter().map(|(id, a)| (id.clone(), a.cx.clone())).collect(),
            relaying: sys.agents.iter().filter(|(_, a)| agent_is_relaying(a)).map(|(id, _)| id.clone()).collect(),
        }
    }

    fn check(&self, id: &AgentId) -> Result<(), StructureError> {
        if self.nodes.contains(id) {
            Ok(())
        } else {
            Err(StructureError::UnknownAgent(id.clone()))
        }
    }

    fn contexts(&self, id: &AgentId) -> impl Iterator<Item = &AgentId> {
        self.cx.get(id).into_iter().flatten()
    }

    fn content(&self, id: &AgentId) -> Option<&BTreeSet<AgentId>> {
        self.cn.get(id)
    }

    /// Clause 1: a shared relaying context. Clause 2: relaying contexts
    /// of `i` and `j` whose contents overlap.
    pub fn directly_reachable(&self, i: &AgentId, j: &AgentId) -> Result<bool, StructureError> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Ok(false);
        }
        let ri: Vec<&AgentId> = self.contexts(i).filter(|k| self.relaying.contains(*k)).collect();
        let rj: Vec<&AgentId> = self.contexts(j).filter(|k| self.relaying.contains(*k)).collect();
        if ri.iter().any(|k| rj.contains(k)) {
            return Ok(true);
        }
        for k1 in &ri {
            for k2 in &rj {
                if let (Some(a), Some(b)) = (self.content(k1), self.content(k2)) {
                    if !a.is_disjoint(b) {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    pub fn neighbourhood(&self, source: &AgentId) -> Result<Neighbourhood, StructureError> {
        self.check(source)?;
        let mut parent: BTreeMap<AgentId, AgentId> = BTreeMap::new();
        let mut queue = VecDeque::from([source.clone()]);
        while let Some(cur) = queue.pop_front() {
            for next in &self.nodes {
                if next == source || parent.contains_key(next) {
                    continue;
                }
                if self.directly_reachable(&cur, next)? {
                    parent.insert(next.clone(), cur.clone());
                    queue.push_back(next.clone());
                }
            }
        }
        let mut witness_paths = BTreeMap::new();
        for id in parent.keys() {
            let mut path = vec![id.clone()];
            let mut at = id;
            while let Some(p) = parent.get(at) {
                path.push(p.clone());
                at = p;
            }
            path.reverse();
            witness_paths.insert(id.clone(), path);
        }
        Ok(Neighbourhood {
            source: source.clone(),
            neighbourhood: parent.keys().cloned().collect(),
            witness_paths,
        })
    }
}

/// Everything reachable from `source`, with one shortest hop path each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Neighbourhood {
    pub source: AgentId,
    pub neighbourhood: BTreeSet<AgentId>,
    /// `[source, ..., id]` for every member.
    pub witness_paths: BTreeMap<AgentId, Vec<AgentId>>,
}

pub fn directly_reachable(sys: &CrowdSystem, i: &AgentId, j: &AgentId) -> Result<bool, StructureError> {
    ContainmentGraph::from_system(sys).directly_reachable(i, j)
}

pub fn neighbourhood(sys: &CrowdSystem, source: &AgentId) -> Result<Neighbourhood, StructureError> {
    ContainmentGraph::from_system(sys).neighbourhood(source)
}
