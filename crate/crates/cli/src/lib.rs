//! Command implementations and the HTTP service behind the `layoutforge`
//! binary.

pub mod commands;
pub mod server;
