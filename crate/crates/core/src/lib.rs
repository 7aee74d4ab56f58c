//! Multi-label classification with dynamic classifier chains.
//!
//! Two model families share the chaining machinery: random decision trees
//! with label tests ([`rdt`]) and multi-label gradient boosted trees
//! ([`mlboost`]) chained dynamically by [`xdcc`].

pub mod dataset;
pub mod metrics;
pub mod mlboost;
pub mod model;
pub mod rdt;
pub mod synth;
pub mod xdcc;
