//! Absolute-time MIDI events and the offline renderer.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{bar_seconds, BarPlan, Generator};
use crate::affect::Trajectory;
use crate::rhythm::SUBDIVISIONS;
use crate::voice::Instrument;

pub const PPQN: u16 = 480;
pub const TICKS_PER_SUBDIVISION: u64 = PPQN as u64 / 2;
pub const TICKS_PER_BAR: u64 = TICKS_PER_SUBDIVISION * SUBDIVISIONS as u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    TempoChange { bpm: f64, micros_per_quarter: u32 },
    ProgramChange { program: u8 },
    NoteOff { pitch: u8 },
    NoteOn { pitch: u8, velocity: u8 },
}

impl EventKind {
    pub fn tempo(bpm: f64) -> Self {
        Self::TempoChange {
            bpm,
            micros_per_quarter: (60_000_000.0 / bpm).round() as u32,
        }
    }

    /// Order of kinds sharing a tick: tempo and program setup first, then
    /// releases before new attacks so repeated pitches re-strike cleanly.
    fn rank(&self) -> u8 {
        match self {
            Self::TempoChange { .. } => 0,
            Self::ProgramChange { .. } => 1,
            Self::NoteOff { .. } => 2,
            Self::NoteOn { .. } => 3,
        }
    }

    fn pitch(&self) -> u8 {
        match *self {
            Self::NoteOff { pitch } | Self::NoteOn { pitch, .. } => pitch,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub tick: u64,
    pub seconds: f64,
    pub channel: u8,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl TimedEvent {
    pub fn sort_cmp(&self, other: &Self) -> Ordering {
        (self.tick, self.kind.rank(), self.channel, self.kind.pitch()).cmp(&(
            other.tick,
            other.kind.rank(),
            other.channel,
            other.kind.pitch(),
        ))
    }
}

/// Stable sort into canonical stream order.
pub fn sort_events(events: &mut [TimedEvent]) {
    events.sort_by(TimedEvent::sort_cmp);
}

/// Program changes for every instrument at time zero.
pub fn setup_events() -> Vec<TimedEvent> {
    Instrument::ALL
        .iter()
        .map(|i| TimedEvent {
            tick: 0,
            seconds: 0.0,
            channel: i.channel(),
            kind: EventKind::ProgramChange { program: i.gm_program() },
        })
        .collect()
}

/// Running position of the next bar in ticks and seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BarClock {
    pub tick: u64,
    pub seconds: f64,
    pub tempo_bpm: Option<f64>,
}

impl BarClock {
    /// Events of `plan` placed at the clock's position, then advances past the
    /// bar. The bar's own tempo sets its length.
    pub fn place(&mut self, plan: &BarPlan) -> Vec<TimedEvent> {
        let sub_seconds = plan.seconds() / SUBDIVISIONS as f64;
        let at = |sub: u8| {
            let k = sub as u64 - 1;
            (self.tick + k * TICKS_PER_SUBDIVISION, self.seconds + k as f64 * sub_seconds)
        };
        let mut out = Vec::with_capacity(plan.notes.len() * 2 + 1);
        if self.tempo_bpm != Some(plan.tempo_bpm) {
            out.push(TimedEvent {
                tick: self.tick,
                seconds: self.seconds,
                channel: 0,
                kind: EventKind::tempo(plan.tempo_bpm),
            });
        }
        for n in &plan.notes {
            let channel = n.instrument.channel();
            let pitch = n.pitch.midi();
            let (tick, seconds) = at(n.onset);
            out.push(TimedEvent {
                tick,
                seconds,
                channel,
                kind: EventKind::NoteOn {
                    pitch,
                    velocity: n.velocity,
                },
            });
            let (tick, seconds) = at(n.onset + n.duration);
            out.push(TimedEvent {
                tick,
                seconds,
                channel,
                kind: EventKind::NoteOff { pitch },
            });
        }
        self.tick += TICKS_PER_BAR;
        self.seconds += bar_seconds(plan.tempo_bpm);
        self.tempo_bpm = Some(plan.tempo_bpm);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub plans: Vec<BarPlan>,
    pub events: Vec<TimedEvent>,
    pub duration_seconds: f64,
}

/// Renders `bars` bars, sampling the trajectory at each bar's start time.
pub fn render_offline(generator: &mut Generator, trajectory: &Trajectory, bars: usize) -> Rendering {
    let mut clock = BarClock::default();
    let mut events = setup_events();
    let mut plans = Vec::with_capacity(bars);
    for _ in 0..bars {
        let affect = trajectory
            .sample(clock.seconds)
            .expect("bar start times are finite and non-negative");
        let plan = generator.generate_bar(affect);
        events.extend(clock.place(&plan));
        plans.push(plan);
    }
    sort_events(&mut events);
    Rendering {
        plans,
        events,
        duration_seconds: clock.seconds,
    }
}

/// Result of checking a stream for ordering and NoteOn/NoteOff pairing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamAudit {
    pub sorted: bool,
    pub note_ons: usize,
    /// NoteOns still sounding at the end of the stream.
    pub unmatched_on: usize,
    /// NoteOffs with no sounding note to release.
    pub orphan_off: usize,
}

impl StreamAudit {
    pub fn is_clean(&self) -> bool {
        self.sorted && self.unmatched_on == 0 && self.orphan_off == 0
    }
}

pub fn audit_stream(events: &[TimedEvent]) -> StreamAudit {
    let mut audit = StreamAudit {
        sorted: events.windows(2).all(|w| w[0].tick <= w[1].tick && w[0].seconds <= w[1].seconds),
        ..Default::default()
    };
    let mut sounding: HashMap<(u8, u8), usize> = HashMap::new();
    for e in events {
        match e.kind {
            EventKind::NoteOn { pitch, .. } => {
                audit.note_ons += 1;
                *sounding.entry((e.channel, pitch)).or_default() += 1;
            }
            EventKind::NoteOff { pitch } => match sounding.get_mut(&(e.channel, pitch)) {
                Some(n) if *n > 0 => *n -= 1,
                _ => audit.orphan_off += 1,
            },
            _ => {}
        }
    }
    audit.unmatched_on = sounding.values().sum();
    audit
}
