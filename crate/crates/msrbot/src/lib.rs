//! Front ends for the repository bot: configuration and startup wiring, the
//! HTTP chat service and the terminal REPL.

pub mod config;
pub mod repl;
pub mod service;

pub use config::{load_bot, ServiceConfig};
