//! Command-line flags and their validation into an [`EngineConfig`].
//!
//! Every flag can also be set through an environment variable with the
//! `JAMLOOP_` prefix, e.g. `JAMLOOP_QPM=90`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use clap::Parser;
use jamloop_core::control::CcAction;
use jamloop_core::improv::ImprovConfig;
use jamloop_core::model::{ModelError, TimeSignature};
use jamloop_core::{CcMap, EngineOptions, LoopSpec64};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorChoice {
    Stub,
    Remote(SocketAddr),
}

impl FromStr for GeneratorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stub" {
            return Ok(GeneratorChoice::Stub);
        }
        match s.strip_prefix("remote:") {
            Some(addr) => {
                addr.parse().map(GeneratorChoice::Remote).map_err(|e| format!("bad remote endpoint {addr:?}: {e}"))
            }
            None => Err(format!("expected `stub` or `remote:HOST:PORT`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "jamloop", version, about = "Real-time looper and call-and-response improvisation daemon")]
pub struct Args {
    /// Loop length in bars.
    #[arg(long, env = "JAMLOOP_BARS", default_value_t = 1)]
    pub bars: i64,

    /// Time signature, N/D with D in {4, 8, 16}.
    #[arg(long, env = "JAMLOOP_TS", default_value = "4/4")]
    pub ts: TimeSignature,

    /// Tempo in quarter notes per minute.
    #[arg(long, env = "JAMLOOP_QPM", default_value_t = 120.0)]
    pub qpm: f64,

    /// UDP address for inbound MIDI-over-OSC.
    #[arg(long, env = "JAMLOOP_OSC_LISTEN", default_value = "127.0.0.1:57121")]
    pub osc_listen: SocketAddr,

    /// UDP address of the sound engine.
    #[arg(long, env = "JAMLOOP_OSC_SEND", default_value = "127.0.0.1:57120")]
    pub osc_send: SocketAddr,

    /// WebSocket port for the control UI on 127.0.0.1. 0 picks a free port.
    #[arg(long, env = "JAMLOOP_WS_PORT", default_value_t = 8765)]
    pub ws_port: u16,

    /// Melody/drum generator: `stub` or `remote:HOST:PORT`.
    #[arg(long, env = "JAMLOOP_GENERATOR", default_value = "stub")]
    pub generator: GeneratorChoice,

    /// Base seed for generation requests.
    #[arg(long, env = "JAMLOOP_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Performer notes collected before asking for a continuation.
    #[arg(long, env = "JAMLOOP_THRESHOLD", default_value_t = 16)]
    pub threshold: usize,

    /// Shift generated lines by octaves toward the performer's register.
    #[arg(long, env = "JAMLOOP_OCTAVE_ALIGN")]
    pub octave_align: bool,

    /// Controller number of the improv gate pedal.
    #[arg(long, env = "JAMLOOP_GATE_CC", default_value_t = 64, value_parser = clap::value_parser!(u8).range(0..=127))]
    pub gate_cc: u8,

    /// Log level: error, warn, info, debug or trace.
    #[arg(long, env = "JAMLOOP_LOG_LEVEL", default_value = "info")]
    pub log_level: tracing::Level,

    /// Run a script against a virtual clock, print the event log and exit.
    #[arg(long, env = "JAMLOOP_SIMULATE")]
    pub simulate: Option<PathBuf>,

    /// How long a remote generator may take before its request is dropped.
    #[arg(long, env = "JAMLOOP_GEN_DEADLINE_MS", default_value_t = 5000)]
    pub gen_deadline_ms: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid loop settings: {0}")]
    Loop(#[from] ModelError),
    #[error("threshold must be at least 1")]
    Threshold,
    #[error("generator deadline must be positive")]
    Deadline,
}

/// Validated daemon settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub engine: EngineOptions,
    pub osc_listen: SocketAddr,
    pub osc_send: SocketAddr,
    pub ws_port: u16,
    pub generator: GeneratorChoice,
    pub gen_deadline: Duration,
    pub cc_map: CcMap,
    pub log_level: tracing::Level,
    pub simulate: Option<PathBuf>,
}

impl EngineConfig {
    pub fn from_args(a: Args) -> Result<Self, ConfigError> {
        let bars = u32::try_from(a.bars).map_err(|_| ModelError::NoBars)?;
        let spec = LoopSpec64::new(bars, a.ts, jamloop_core::Tempo64::new(a.qpm)?)?;
        if a.threshold == 0 {
            return Err(ConfigError::Threshold);
        }
        if a.gen_deadline_ms == 0 {
            return Err(ConfigError::Deadline);
        }
        let improv =
            ImprovConfig { threshold: a.threshold, octave_align: a.octave_align, seed: a.seed, ..Default::default() };
        let mut cc_map = CcMap::default();
        cc_map.bind(a.gate_cc, CcAction::Gate);
        Ok(EngineConfig {
            engine: EngineOptions { spec, improv, drum_seed: Some(a.seed) },
            osc_listen: a.osc_listen,
            osc_send: a.osc_send,
            ws_port: a.ws_port,
            generator: a.generator,
            gen_deadline: Duration::from_millis(a.gen_deadline_ms),
            cc_map,
            log_level: a.log_level,
            simulate: a.simulate,
        })
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::from_args(Args::parse_from(["jamloop"])).expect("defaults are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(extra: &[&str]) -> Result<EngineConfig, ConfigError> {
        let argv = std::iter::once("jamloop").chain(extra.iter().copied());
        EngineConfig::from_args(Args::try_parse_from(argv).unwrap())
    }

    #[test]
    fn defaults() {
        let c = EngineConfig::default();
        assert_eq!(c.engine.spec.sequence_length(), 16);
        assert_eq!(c.engine.spec.tempo().qpm(), 120.0);
        assert_eq!(c.engine.improv.threshold, 16);
        assert_eq!(c.generator, GeneratorChoice::Stub);
        assert_eq!(c.cc_map.controller_for(CcAction::Gate), Some(64));
    }

    #[test]
    fn flags_reach_the_engine() {
        let c = parse(&["--bars", "2", "--ts", "6/8", "--qpm", "90", "--threshold", "4", "--gate-cc", "20"]).unwrap();
        assert_eq!(c.engine.spec.sequence_length(), 24);
        assert_eq!(c.engine.improv.threshold, 4);
        assert_eq!(c.cc_map.controller_for(CcAction::Gate), Some(20));
        assert_eq!(c.cc_map.action(64), None);
    }

    #[test]
    fn invalid_time_signature_is_rejected() {
        for ts in ["4/5", "17/4", "0/4", "four"] {
            assert!(Args::try_parse_from(["jamloop", "--ts", ts]).is_err(), "{ts}");
        }
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(parse(&["--bars", "0"]).is_err());
        assert!(parse(&["--bars=-1"]).is_err());
        assert!(parse(&["--qpm", "500"]).is_err());
        assert_eq!(parse(&["--threshold", "0"]), Err(ConfigError::Threshold));
        assert!(Args::try_parse_from(["jamloop", "--gate-cc", "200"]).is_err());
    }

    #[test]
    fn generator_choice_parses() {
        assert_eq!("stub".parse::<GeneratorChoice>(), Ok(GeneratorChoice::Stub));
        assert_eq!(
            "remote:127.0.0.1:9000".parse::<GeneratorChoice>(),
            Ok(GeneratorChoice::Remote("127.0.0.1:9000".parse().unwrap()))
        );
        assert!("magenta".parse::<GeneratorChoice>().is_err());
    }
}
