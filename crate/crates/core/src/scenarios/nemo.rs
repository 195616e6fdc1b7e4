//! A seeker advertises a reward for finding Nemo and delegates the search
//! to whoever in its neighbourhood claims the ability.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::Serialize;

use crate::engine::{EventKind, Trace};
use crate::logic::{AgentId, CrowdFormula, Direction, MessageType};
use crate::parser::{parse_formula, SpecDocument};

use super::{list, ScenarioError, Source};

pub const NEMO_PROPERTY: &str = "[] (M[up, seeker, adv] (A find_nemo -> <> A earn) -> <> B find_nemo)";

const INC: &str = "(A find_nemo -> <> A earn)";

pub fn nemo_property() -> CrowdFormula {
    static P: OnceLock<CrowdFormula> = OnceLock::new();
    P.get_or_init(|| parse_formula(NEMO_PROPERTY).expect("property parses")).clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// One relaying platform holding the seeker and the whole crowd.
    Single,
    /// Up to four relaying contexts in a row, joined by bridge members.
    Chained,
    /// Two relaying contexts with no member in common; the seeker is in the first.
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FindNemoConfig {
    pub crowd_size: usize,
    /// Indices of crowd members with `A find_nemo`.
    pub able: BTreeSet<usize>,
    pub topology: Topology,
}

impl FindNemoConfig {
    pub fn new(crowd_size: usize, able: impl IntoIterator<Item = usize>, topology: Topology) -> Self {
        Self {
            crowd_size,
            able: able.into_iter().collect(),
            topology,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.crowd_size == 0 {
            return Err(ScenarioError::InvalidConfig("crowd_size must be positive".into()));
        }
        if let Some(i) = self.able.iter().find(|&&i| i >= self.crowd_size) {
            return Err(ScenarioError::InvalidConfig(format!(
                "able index {i} is outside a crowd of {}",
                self.crowd_size
            )));
        }
        Ok(())
    }

    /// Context names and, for each crowd member, the contexts it joins.
    fn layout(&self) -> (Vec<String>, Vec<Vec<usize>>) {
        let n = self.crowd_size;
        match self.topology {
            Topology::Single => (vec!["platform".into()], vec![vec![0]; n]),
            Topology::Chained => {
                let m = n.min(4);
                let block = |i: usize| i * m / n;
                let mut member: Vec<Vec<usize>> = (0..n).map(|i| vec![block(i)]).collect();
                // The last member of each block bridges into the next context.
                for (i, ctxs) in member.iter_mut().enumerate() {
                    let b = block(i);
                    if b + 1 < m && (i + 1 == n || block(i + 1) != b) {
                        ctxs.push(b + 1);
                    }
                }
                ((1..=m).map(|k| format!("p{k}")).collect(), member)
            }
            Topology::Isolated => {
                let half = n / 2;
                (
                    vec!["p1".into(), "p2".into()],
                    (0..n).map(|i| vec![usize::from(i >= half)]).collect(),
                )
            }
        }
    }
}

pub(super) fn crowd_id(i: usize) -> String {
    format!("c{i}")
}

/// Assumptions every agent carries: forward adverts both ways, treat a
/// forwarded advert as a direct one, answer adverts one can meet, and
/// never claim an ability one lacks.
fn universal() -> Vec<String> {
    vec![
        "goal earn".into(),
        "rule fwd_cn: M[down, ?j, adv] ?inc -> M[up, CN, tell] M[down, ?j, adv] ?inc".into(),
        "rule fwd_cx: M[down, ?j, adv] ?inc -> M[up, CX, tell] M[down, ?j, adv] ?inc".into(),
        "rule treat: M[down, ?k, tell] M[down, ?j, adv] ?inc -> M[down, ?j, adv] ?inc".into(),
        format!("rule respond: A find_nemo & G earn & M[down, ?j, adv] {INC} -> M[up, ?j, tell] A find_nemo"),
        "rule honest: M[up, ?j, tell] A find_nemo -> A find_nemo".into(),
        "rule achieve: A find_nemo & I find_nemo -> <> B find_nemo".into(),
    ]
}

const RELAY: &str = "rule relay: (cn(?i) | cx(?i)) & M[down, ?i, tell] ?phi -> M[up, CN, tell] ?phi";

pub fn build_find_nemo(cfg: &FindNemoConfig) -> Result<SpecDocument, ScenarioError> {
    cfg.validate()?;
    let (contexts, member) = cfg.layout();
    let mut src = Source::default();

    let mut seeker = universal();
    seeker.push(format!("context {}", contexts[0]));
    seeker.push(format!("send M[up, CX, adv] {INC}"));
    seeker.push(format!(
        "rule delegate: M[up, CX, adv] {INC} & M[down, ?k, tell] A find_nemo -> M[up, ?k, do] I find_nemo"
    ));
    seeker.push("rule found: M[up, ?k, do] I find_nemo & M[down, ?k, tell] B find_nemo -> B find_nemo".into());
    src.agent("seeker", &seeker);

    for (k, name) in contexts.iter().enumerate() {
        let mut content: Vec<String> = Vec::new();
        if k == 0 {
            content.push("seeker".into());
        }
        content.extend((0..cfg.crowd_size).filter(|&i| member[i].contains(&k)).map(crowd_id));
        let mut body = universal();
        if !content.is_empty() {
            body.push(format!("content {}", list(&content)));
        }
        body.push(RELAY.into());
        src.agent(name, &body);
    }

    for (i, joined) in member.iter().enumerate() {
        let mut body = universal();
        if cfg.able.contains(&i) {
            body.push("ability find_nemo".into());
        }
        let ctxs: Vec<String> = joined.iter().map(|&k| contexts[k].clone()).collect();
        body.push(format!("context {}", list(&ctxs)));
        body.push("rule adopt: M[up, ?i, tell] A find_nemo & M[down, ?i, do] I find_nemo -> I find_nemo".into());
        body.push("rule report: B find_nemo & M[down, ?i, do] I find_nemo -> M[up, ?i, tell] B find_nemo".into());
        src.agent(&crowd_id(i), &body);
    }
    Ok(src.finish())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStep {
    pub round: usize,
    pub receiver: AgentId,
    pub message: String,
}

/// The four deliveries of the search, in the order they occurred: the
/// advert reaching `able`, its ability claim reaching the seeker, the
/// delegation reaching `able`, and its success report reaching the seeker.
/// `None` if any is missing from the event log.
pub fn nemo_derivation(trace: &Trace, able: &AgentId) -> Option<[ChainStep; 4]> {
    let seeker = AgentId::from("seeker");
    let f = |s: &str| parse_formula(s).expect("chain message parses");
    let wanted = [
        (able.clone(), Direction::Down, seeker.clone(), MessageType::Adv, f(INC)),
        (seeker.clone(), Direction::Down, able.clone(), MessageType::Tell, f("A find_nemo")),
        (able.clone(), Direction::Down, seeker.clone(), MessageType::Do, f("I find_nemo")),
        (seeker.clone(), Direction::Down, able.clone(), MessageType::Tell, f("B find_nemo")),
    ];
    let last = trace.last();
    let mut steps = Vec::new();
    for (owner, dir, peer, kind, body) in wanted {
        let agent = last.agents.get(&owner)?;
        let probe = crate::agent::MessageRecord::new(dir, peer.clone(), kind, body, 0, last.normalize);
        let rec = agent
            .com
            .iter()
            .find(|r| r.dir == probe.dir && r.peer == probe.peer && r.kind == probe.kind && r.body == probe.body)?;
        let text = rec.as_formula().to_string();
        let logged = trace.events.get(rec.round)?.iter().any(|e| {
            e.kind == EventKind::Deliver && e.owner == owner && e.effects.iter().any(|x| x.starts_with(&text))
        });
        if !logged {
            return None;
        }
        steps.push(ChainStep {
            round: rec.round,
            receiver: owner,
            message: text,
        });
    }
    steps.try_into().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{check, Status};
    use crate::engine::{compile_rules, run, EngineConfig};
    use crate::structure::neighbourhood;

    fn verdict(cfg: &FindNemoConfig) -> (Trace, Status) {
        let sys = compile_rules(&build_find_nemo(cfg).unwrap()).unwrap();
        let t = run(&sys, &EngineConfig::default()).unwrap();
        let v = check(&t, &nemo_property(), &"seeker".into()).unwrap();
        (t, v.status)
    }

    #[test]
    fn single_platform_finds_nemo() {
        let (t, s) = verdict(&FindNemoConfig::new(5, [2], Topology::Single));
        assert_eq!(s, Status::Holds);
        assert!(t.quiescent);
        let chain = nemo_derivation(&t, &"c2".into()).unwrap();
        assert!(chain.windows(2).all(|w| w[0].round < w[1].round));
    }

    #[test]
    fn nobody_able_fails() {
        let (t, s) = verdict(&FindNemoConfig::new(5, [], Topology::Single));
        assert_eq!(s, Status::Fails);
        assert!(t.quiescent);
    }

    #[test]
    fn able_agent_in_other_pocket_fails() {
        let cfg = FindNemoConfig::new(5, [2], Topology::Isolated);
        let sys = compile_rules(&build_find_nemo(&cfg).unwrap()).unwrap();
        assert!(!neighbourhood(&sys, &"seeker".into()).unwrap().neighbourhood.contains(&AgentId::from("c2")));
        assert_eq!(verdict(&cfg).1, Status::Fails);
        assert_eq!(verdict(&FindNemoConfig::new(5, [1], Topology::Isolated)).1, Status::Holds);
    }

    #[test]
    fn chained_reaches_the_far_end() {
        let cfg = FindNemoConfig::new(8, [7], Topology::Chained);
        let sys = compile_rules(&build_find_nemo(&cfg).unwrap()).unwrap();
        let n = neighbourhood(&sys, &"seeker".into()).unwrap();
        assert!(n.witness_paths[&AgentId::from("c7")].len() > 2);
        assert_eq!(verdict(&cfg).1, Status::Holds);
    }

    #[test]
    fn invalid_configs() {
        assert!(build_find_nemo(&FindNemoConfig::new(0, [], Topology::Single)).is_err());
        assert!(build_find_nemo(&FindNemoConfig::new(3, [3], Topology::Single)).is_err());
    }
}
