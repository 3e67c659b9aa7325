//! Linked European Parliament roll-call data, an LLM prediction harness
//! for vote and gender prediction, an append-only prediction log, and bias
//! analysis over the reasoning of wrong answers.

pub mod aggregation;
pub mod analysis;
pub mod corpus;
pub mod gateway;
pub mod predict;
pub mod store;
