//! Automated assignment of issue reports to development teams.

pub mod classify;
pub mod corpus;
pub mod driftmon;
pub mod eval;
pub mod explain;
pub mod service;
pub mod synth;
pub mod textpipe;
