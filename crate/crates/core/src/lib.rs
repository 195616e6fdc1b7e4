//! Specification language, rule engine and trace checker for digital crowds.

#[cfg(feature = "arbitrary")]
pub mod arbitrary;
pub mod agent;
pub mod checker;
pub mod engine;
pub mod logic;
pub mod parser;
pub mod scenarios;
pub mod structure;
