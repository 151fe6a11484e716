//! Live control protocol, version 1: JSON text messages tagged by `type`.

use cadenza_core::render::{BarPlan, EventKind, TimedEvent};
use serde::{Deserialize, Serialize};

pub const PROTO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Affect { v: f64, a: f64 },
    /// Without a value: query. With one: reseed at the next bar.
    Seed {
        #[serde(default)]
        value: Option<u64>,
    },
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarStatus {
    pub index: u64,
    pub v: f64,
    pub a: f64,
    pub tempo: f64,
    pub chord: String,
    pub symbol: String,
    pub doubled: bool,
    pub theme_bar: u8,
}

impl From<&BarPlan> for BarStatus {
    fn from(plan: &BarPlan) -> Self {
        Self {
            index: plan.bar_index,
            v: plan.affect.valence(),
            a: plan.affect.arousal(),
            tempo: plan.tempo_bpm,
            chord: plan.chord.label.clone(),
            symbol: plan.chord.symbol(),
            doubled: plan.marimba_doubled,
            theme_bar: plan.theme_bar,
        }
    }
}

/// A note event as sent to visualizers; `time` is seconds from session start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub on: bool,
    pub tick: u64,
    pub time: f64,
    pub channel: u8,
    pub pitch: u8,
    pub velocity: u8,
}

impl NoteRecord {
    pub fn from_event(e: &TimedEvent) -> Option<Self> {
        let (on, pitch, velocity) = match e.kind {
            EventKind::NoteOn { pitch, velocity } => (true, pitch, velocity),
            EventKind::NoteOff { pitch } => (false, pitch, 0),
            _ => return None,
        };
        Some(Self {
            on,
            tick: e.tick,
            time: e.seconds,
            channel: e.channel,
            pitch,
            velocity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    Hello { proto: u32, seed: u64 },
    /// Echo of an accepted affect update after clamping.
    Ack { v: f64, a: f64 },
    Seed { value: u64 },
    Bar(BarStatus),
    Note(NoteRecord),
    Stopping,
    Error { message: String },
}

impl Outbound {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outbound messages always serialize")
    }
}

pub fn parse_inbound(text: &str) -> Result<Inbound, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inbound_shapes() {
        assert_eq!(parse_inbound(r#"{"type":"affect","v":0.2,"a":1}"#), Ok(Inbound::Affect { v: 0.2, a: 1.0 }));
        assert_eq!(parse_inbound(r#"{"type":"seed"}"#), Ok(Inbound::Seed { value: None }));
        assert_eq!(parse_inbound(r#"{"type":"seed","value":7}"#), Ok(Inbound::Seed { value: Some(7) }));
        assert_eq!(parse_inbound(r#"{"type":"stop"}"#), Ok(Inbound::Stop));
        assert!(parse_inbound(r#"{"type":"affect","v":"x","a":1}"#).is_err());
        assert!(parse_inbound(r#"{"type":"dance"}"#).is_err());
        assert!(parse_inbound("not json").is_err());
    }

    #[test]
    fn outbound_shapes() {
        assert_eq!(Outbound::Hello { proto: 1, seed: 3 }.to_json(), r#"{"type":"hello","proto":1,"seed":3}"#);
        let err = Outbound::Error { message: "bad".into() }.to_json();
        assert_eq!(err, r#"{"type":"error","message":"bad"}"#);
        let bar = Outbound::Bar(BarStatus {
            index: 4,
            v: 1.0,
            a: 1.0,
            tempo: 200.0,
            chord: "V7".into(),
            symbol: "G7".into(),
            doubled: true,
            theme_bar: 5,
        });
        let json: serde_json::Value = serde_json::from_str(&bar.to_json()).unwrap();
        assert_eq!(json["type"], "bar");
        assert_eq!(json["tempo"], 200.0);
        assert_eq!(json["doubled"], true);
    }
}
