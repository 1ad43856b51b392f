//! Deterministic replay of a timestamped script against a virtual clock.
//!
//! One event per line, `TIME_MS KIND [ARGS...]`; `#` starts a comment.
//!
//! ```text
//! 0     spec 1 4/4      # bars, time signature
//! 0     qpm 120
//! 0     play
//! 250   mode improv
//! 500   on 60 100       # pitch, optional velocity
//! 620   off 60
//! 700   cc 64 0         # controller, value (through the CC map)
//! 4000  end
//! ```
//!
//! Other kinds: `stop`, `tap`, `drums`, `gate on|off`, `mute on|off`.
//! Grid steps due at or before an event's time are emitted before the event.
//! The run ends at `end` (or the last event), with steps due strictly before
//! that time emitted, then playback is stopped. Generator requests are answered
//! synchronously at the virtual time they were raised.

use std::fmt::{self, Write as _};

use jamloop_core::generator::{GeneratorPlugin, GeneratorRequest, GeneratorResponse};
use jamloop_core::{
    CcMap, ControlCommand, Emission, EngineError, EngineOptions, EngineSnapshot, InboundEvent, Looper, Mode, Origin,
    Pitch, Velocity,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptAction {
    Event(InboundEvent),
    Cc { controller: u8, value: u8 },
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEvent {
    pub line: usize,
    pub time_ms: f64,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script {
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let mut events = Vec::new();
        let mut last = 0.0;
        let mut ended = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScriptError { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if ended {
                return Err(err("event after `end`".into()));
            }
            let mut words = body.split_whitespace();
            let time = words.next().unwrap_or_default();
            let time_ms: f64 = time.parse().map_err(|_| err(format!("bad time {time:?}")))?;
            if !time_ms.is_finite() || time_ms < 0.0 {
                return Err(err(format!("time {time_ms} must be a non-negative number")));
            }
            if time_ms < last {
                return Err(err(format!("time {time_ms} is earlier than the previous event at {last}")));
            }
            last = time_ms;
            let kind = words.next().ok_or_else(|| err("missing event kind".into()))?;
            let args: Vec<&str> = words.collect();
            let action = parse_action(kind, &args).map_err(err)?;
            ended = action == ScriptAction::End;
            events.push(ScriptEvent { line, time_ms, action });
        }
        Ok(Script { events })
    }
}

fn parse_action(kind: &str, args: &[&str]) -> Result<ScriptAction, String> {
    let arity = |n: std::ops::RangeInclusive<usize>| {
        if n.contains(&args.len()) {
            Ok(())
        } else {
            Err(format!("`{kind}` takes {n:?} arguments, got {}", args.len()))
        }
    };
    let int = |s: &str| s.parse::<i64>().map_err(|_| format!("bad integer {s:?}"));
    let switch = |s: &str| match s {
        "on" | "1" | "true" => Ok(true),
        "off" | "0" | "false" => Ok(false),
        _ => Err(format!("expected on/off, got {s:?}")),
    };
    let control = |c: ControlCommand| ScriptAction::Event(c.into());
    Ok(match kind {
        "play" | "stop" | "tap" | "drums" | "end" => {
            arity(0..=0)?;
            match kind {
                "play" => control(ControlCommand::Play),
                "stop" => control(ControlCommand::Stop),
                "tap" => control(ControlCommand::Tap),
                "drums" => control(ControlCommand::Drums),
                _ => ScriptAction::End,
            }
        }
        "spec" => {
            arity(2..=2)?;
            let bars = u32::try_from(int(args[0])?).map_err(|_| format!("bad bar count {:?}", args[0]))?;
            let (n, d) = args[1].split_once('/').ok_or_else(|| format!("expected N/D, got {:?}", args[1]))?;
            let n = u32::try_from(int(n)?).map_err(|_| format!("bad numerator {n:?}"))?;
            let d = u32::try_from(int(d)?).map_err(|_| format!("bad denominator {d:?}"))?;
            control(ControlCommand::Spec { bars, numerator: n, denominator: d })
        }
        "qpm" => {
            arity(1..=1)?;
            let qpm: f64 = args[0].parse().map_err(|_| format!("bad tempo {:?}", args[0]))?;
            control(ControlCommand::Qpm { qpm })
        }
        "mode" => {
            arity(1..=1)?;
            let mode: Mode = args[0].parse().map_err(|e| format!("{e}"))?;
            control(ControlCommand::Mode { mode })
        }
        "gate" => {
            arity(1..=1)?;
            control(ControlCommand::Gate { engaged: switch(args[0])? })
        }
        "mute" => {
            arity(1..=1)?;
            control(ControlCommand::MuteClick { muted: switch(args[0])? })
        }
        "on" => {
            arity(1..=2)?;
            let pitch = Pitch::new(int(args[0])?).map_err(|e| e.to_string())?;
            let velocity = match args.get(1) {
                Some(v) => Velocity::new(int(v)?).map_err(|e| e.to_string())?,
                None => Velocity::DEFAULT,
            };
            ScriptAction::Event(InboundEvent::NoteOn { pitch, velocity })
        }
        "off" => {
            arity(1..=1)?;
            let pitch = Pitch::new(int(args[0])?).map_err(|e| e.to_string())?;
            ScriptAction::Event(InboundEvent::NoteOff { pitch })
        }
        "cc" => {
            arity(2..=2)?;
            let byte = |s: &str| {
                int(s).and_then(|v| u8::try_from(v).ok().filter(|v| *v <= 127).ok_or(format!("{v} outside 0..=127")))
            };
            ScriptAction::Cc { controller: byte(args[0])?, value: byte(args[1])? }
        }
        other => return Err(format!("unknown event kind {other:?}")),
    })
}

/// One outbound note with the grid time it was due and the virtual time it
/// was emitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub ideal_ms: f64,
    pub actual_ms: f64,
    pub emission: Emission,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = &self.emission.note;
        write!(
            f,
            "{:.3} {:.3} {} {} {} {}",
            self.ideal_ms,
            self.actual_ms,
            if n.is_on() { "on" } else { "off" },
            n.instrument.name(),
            n.pitch.value(),
            n.velocity
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub error: EngineError,
}

#[derive(Debug, Clone, Default)]
pub struct SimReport {
    pub log: Vec<LogEntry>,
    pub requests: Vec<GeneratorRequest>,
    pub responses: Vec<GeneratorResponse>,
    pub rejections: Vec<Rejection>,
    /// Engine state after each script event, in order.
    pub snapshots: Vec<EngineSnapshot>,
}

impl SimReport {
    /// The log as text, one event per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            let _ = writeln!(s, "{e}");
        }
        s
    }

    pub fn scheduled(&self) -> impl Iterator<Item = &LogEntry> {
        self.log.iter().filter(|e| e.emission.origin == Origin::Scheduled)
    }

    pub fn live(&self) -> impl Iterator<Item = &LogEntry> {
        self.log.iter().filter(|e| e.emission.origin == Origin::Live)
    }
}

struct Sim<'a> {
    looper: Looper,
    generator: &'a dyn GeneratorPlugin,
    report: SimReport,
}

impl Sim<'_> {
    fn record(&mut self, emissions: Vec<Emission>, now_ms: f64) {
        self.report.log.extend(emissions.into_iter().map(|e| LogEntry {
            ideal_ms: e.ideal_ms,
            actual_ms: now_ms,
            emission: e,
        }));
    }

    fn serve(&mut self) {
        for req in self.looper.take_requests() {
            let resp = if self.generator.supports(req.kind()) {
                self.generator.generate(&req)
            } else {
                GeneratorResponse::empty_for(&req)
            };
            self.looper.on_generator_response(&resp);
            self.report.requests.push(req);
            self.report.responses.push(resp);
        }
    }

    fn advance(&mut self, to_ms: f64, inclusive: bool) {
        while let Some(due) = self.looper.next_due_ms() {
            if due > to_ms || (!inclusive && due == to_ms) {
                break;
            }
            let emissions = self.looper.tick(due);
            self.record(emissions, due);
            self.serve();
        }
    }
}

/// Runs `script` from a fresh engine.
pub fn simulate(
    script: &Script,
    options: &EngineOptions,
    cc_map: &CcMap,
    generator: &dyn GeneratorPlugin,
) -> SimReport {
    let mut sim = Sim { looper: Looper::new(options.clone()), generator, report: SimReport::default() };
    let mut end_ms = 0.0;
    for ev in &script.events {
        end_ms = ev.time_ms;
        if ev.action == ScriptAction::End {
            break;
        }
        sim.advance(ev.time_ms, true);
        let event = match ev.action {
            ScriptAction::Event(e) => Some(e),
            ScriptAction::Cc { controller, value } => cc_map.translate(controller, value).map(InboundEvent::from),
            ScriptAction::End => None,
        };
        if let Some(event) = event {
            match sim.looper.apply(event, ev.time_ms) {
                Ok(emissions) => sim.record(emissions, ev.time_ms),
                Err(error) => sim.report.rejections.push(Rejection { line: ev.line, error }),
            }
            sim.serve();
        }
        sim.report.snapshots.push(sim.looper.snapshot());
    }
    sim.advance(end_ms, false);
    // End of session mirrors daemon shutdown: stop, then release held keys.
    let mut tail = sim.looper.stop_playback(end_ms);
    tail.extend(sim.looper.all_notes_off(end_ms));
    sim.record(tail, end_ms);
    sim.report
}
