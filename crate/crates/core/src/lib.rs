//! Conversational explanations for scientific abstract writing support.

pub mod analysis;
pub mod artifacts;
pub mod corpus;
pub mod dialogue;
pub mod exec;
pub mod explain;
pub mod intent;
pub mod label;
pub mod models;
pub mod profile;
pub mod review;
pub mod service;
pub mod stats;
pub mod synth;
pub mod templates;
pub mod text;
