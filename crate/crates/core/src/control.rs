//! Inbound events and the MIDI CC mapping for transport/mode buttons.
//!
//! Every control, whatever its source (OSC CC, WebSocket, simulator script),
//! becomes a [`ControlCommand`] before it reaches the engine, so all sources
//! share one code path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Mode, Pitch, Velocity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum ControlCommand {
    Play,
    Stop,
    Mode { mode: Mode },
    Tap,
    Qpm { qpm: f64 },
    Spec { bars: u32, numerator: u32, denominator: u32 },
    Bars { bars: u32 },
    Numerator { numerator: u32 },
    Denominator { denominator: u32 },
    Gate { engaged: bool },
    Drums,
    MuteClick { muted: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InboundEvent {
    NoteOn { pitch: Pitch, velocity: Velocity },
    NoteOff { pitch: Pitch },
    Control(ControlCommand),
}

impl From<ControlCommand> for InboundEvent {
    fn from(c: ControlCommand) -> Self {
        InboundEvent::Control(c)
    }
}

/// What a controller number does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcAction {
    Play,
    Stop,
    Mode(Mode),
    Tap,
    Drums,
    MuteClick,
    Gate,
    QpmKnob,
    BarsKnob,
    NumeratorKnob,
    DenominatorKnob,
}

/// Values at or above this count as "pressed" / "on".
pub const CC_ON: u8 = 64;

/// Controller-number to action table. The defaults follow a Korg
/// nanoKONTROL2 in CC mode, with the sustain pedal (CC 64) as the improv gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcMap {
    actions: BTreeMap<u8, CcAction>,
}

impl Default for CcMap {
    fn default() -> Self {
        let actions = [
            (41, CcAction::Play),
            (42, CcAction::Stop),
            (32, CcAction::Mode(Mode::Bass)),
            (33, CcAction::Mode(Mode::Chords)),
            (34, CcAction::Mode(Mode::Improv)),
            (35, CcAction::Mode(Mode::Free)),
            (46, CcAction::Tap),
            (45, CcAction::Drums),
            (48, CcAction::MuteClick),
            (16, CcAction::QpmKnob),
            (17, CcAction::BarsKnob),
            (18, CcAction::NumeratorKnob),
            (19, CcAction::DenominatorKnob),
            (64, CcAction::Gate),
        ]
        .into_iter()
        .collect();
        CcMap { actions }
    }
}

impl CcMap {
    pub fn empty() -> Self {
        CcMap { actions: BTreeMap::new() }
    }

    /// Binds `controller` to `action`, dropping any other binding of the
    /// same action.
    pub fn bind(&mut self, controller: u8, action: CcAction) -> &mut Self {
        self.actions.retain(|_, a| *a != action);
        self.actions.insert(controller, action);
        self
    }

    pub fn action(&self, controller: u8) -> Option<CcAction> {
        self.actions.get(&controller).copied()
    }

    pub fn controller_for(&self, action: CcAction) -> Option<u8> {
        self.actions.iter().find(|(_, a)| **a == action).map(|(c, _)| *c)
    }

    /// Translates a CC message. Button releases and unmapped controllers
    /// yield `None`.
    pub fn translate(&self, controller: u8, value: u8) -> Option<ControlCommand> {
        let value = value.min(127);
        let pressed = value >= CC_ON;
        let v = u32::from(value);
        Some(match self.action(controller)? {
            CcAction::Play if pressed => ControlCommand::Play,
            CcAction::Stop if pressed => ControlCommand::Stop,
            CcAction::Mode(mode) if pressed => ControlCommand::Mode { mode },
            CcAction::Tap if pressed => ControlCommand::Tap,
            CcAction::Drums if pressed => ControlCommand::Drums,
            CcAction::MuteClick => ControlCommand::MuteClick { muted: pressed },
            CcAction::Gate => ControlCommand::Gate { engaged: pressed },
            CcAction::QpmKnob => ControlCommand::Qpm { qpm: knob_qpm(value) },
            CcAction::BarsKnob => ControlCommand::Bars { bars: v * 8 / 128 + 1 },
            CcAction::NumeratorKnob => ControlCommand::Numerator { numerator: v * 16 / 128 + 1 },
            CcAction::DenominatorKnob => ControlCommand::Denominator {
                denominator: match value {
                    0..=42 => 4,
                    43..=85 => 8,
                    _ => 16,
                },
            },
            _ => return None,
        })
    }
}

/// Linear knob over the full tempo range, 0 → 20 qpm, 127 → 400 qpm.
pub fn knob_qpm(value: u8) -> f64 {
    20.0 + f64::from(value.min(127)) * 380.0 / 127.0
}
