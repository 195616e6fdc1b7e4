//! Formula languages: propositional, BDI and crowd (temporal + message) layers.

mod broadcast;
mod formula;
mod normalize;
mod subst;
mod wellformed;

pub use broadcast::expand_broadcast;
pub use formula::{AgentId, BdiFormula, CrowdFormula, Direction, MessageType, Modality, PropFormula, Target, Term};
pub use normalize::{is_normalized, normalize_messages, normalize_messages_with, NormalizeOptions};
pub use subst::{subst_bdi, subst_prop, subst_term, substitute, Binding, Value};
pub use wellformed::{check_wellformed, Diagnostic, GrammarMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogicError {
    #[error("malformed formula: broadcast target in received-message position: {0}")]
    BroadcastReceive(String),
}
