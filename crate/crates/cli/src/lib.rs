//! Operator CLI and HTTP wiring around the conversational engine.

pub mod commands;
pub mod generator;
pub mod server;
