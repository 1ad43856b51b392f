//! Daemon around the jamloop engine: command-line configuration, the OSC and
//! WebSocket front ends, and a deterministic script simulator.

pub mod app;
pub mod config;
pub mod sha1;
pub mod sim;
pub mod ws;

pub use app::{run, App, AppError};
pub use config::{Args, EngineConfig, GeneratorChoice};
pub use sim::{simulate, Script, SimReport};
