//! The two case studies as document builders: a seeker crowdsourcing a
//! search, and a crowd of software testers voting on fragments.

mod nemo;
mod testers;

pub use nemo::{build_find_nemo, nemo_derivation, nemo_property, ChainStep, FindNemoConfig, Topology, NEMO_PROPERTY};
pub use testers::{
    build_testers, check_confidentiality, delegated_fragments, testers_property, TestersConfig, TESTERS_PROPERTY,
};

use crate::parser::{parse_spec, SpecDocument};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trace does not match the configuration: {0}")]
    Mismatch(String),
}

/// Accumulates `.crowd` source one agent at a time.
#[derive(Default)]
struct Source {
    text: String,
}

impl Source {
    fn agent(&mut self, id: &str, body: &[String]) {
        self.text.push_str("agent ");
        self.text.push_str(id);
        self.text.push_str(" {\n");
        for line in body {
            self.text.push_str("  ");
            self.text.push_str(line);
            self.text.push_str(";\n");
        }
        self.text.push_str("}\n\n");
    }

    fn finish(self) -> SpecDocument {
        match parse_spec(&self.text) {
            Ok(doc) => doc,
            Err(e) => panic!("generated scenario does not parse: {e}\n{}", self.text),
        }
    }
}

fn list(items: &[String]) -> String {
    items.join(", ")
}
