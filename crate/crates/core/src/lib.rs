//! Real-time looper and call-and-response improvisation engine.
//!
//! The timing math, key inference and improvisation state machine are generic
//! over the millisecond scalar ([`Scalar`], implemented for `f32` and `f64`).
//! The engine and its runtime use `f64`; the aliases below name the concrete
//! instantiations.

pub mod clock;
pub mod control;
pub mod drums;
pub mod engine;
pub mod generator;
pub mod improv;
pub mod mailbox;
pub mod model;
pub mod num;
pub mod osc;
pub mod runtime;
pub mod transport;

pub use control::{CcAction, CcMap, ControlCommand, InboundEvent};
pub use engine::{Emission, EngineError, EngineOptions, EngineSnapshot, Looper, Origin};
pub use model::{Instrument, Mode, Pitch, PlayableNote, SixteenthIndex, TimeSignature, TrackKind, Velocity};
pub use num::Scalar;

pub type Tempo64 = model::Tempo<f64>;
pub type Tempo32 = model::Tempo<f32>;
pub type LoopSpec64 = transport::LoopSpec<f64>;
pub type LoopSpec32 = transport::LoopSpec<f32>;
pub type LiveNote64 = model::LiveNote<f64>;
pub type LiveNote32 = model::LiveNote<f32>;
pub type ImprovMachine64 = improv::ImprovMachine<f64>;
pub type ImprovMachine32 = improv::ImprovMachine<f32>;
pub type KeyEstimate64 = generator::KeyEstimate<f64>;
pub type KeyEstimate32 = generator::KeyEstimate<f32>;
