//! Real-time backend: schedules each bar's events against the wall clock.
//!
//! The loop wakes shortly before every bar boundary, reads the affect source
//! once, generates the bar and then releases its events at their absolute
//! deadlines (sleep, then spin for the last stretch). Events falling exactly on
//! the next boundary are held back and merged with the next bar, so the
//! emitted sequence equals the offline stream event for event.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::events::{setup_events, sort_events, BarClock, EventKind, TimedEvent, TICKS_PER_BAR};
use super::{BarPlan, Generator};
use crate::affect::{AffectMailbox, AffectState, Trajectory};

const SPIN_WINDOW: Duration = Duration::from_micros(1500);
const MAX_NAP: Duration = Duration::from_millis(20);

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("midi sink i/o: {0}")]
    Io(#[from] io::Error),
    #[error("midi sink closed: {0}")]
    Closed(String),
}

/// Receives events from the scheduling loop, in stream order.
pub trait MidiSink {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError>;

    /// Called once per bar, before its events, with the resolved plan.
    fn bar(&mut self, _plan: &BarPlan) -> Result<(), SinkError> {
        Ok(())
    }
}

impl<S: MidiSink + ?Sized> MidiSink for &mut S {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        (**self).send(event)
    }

    fn bar(&mut self, plan: &BarPlan) -> Result<(), SinkError> {
        (**self).bar(plan)
    }
}

impl<S: MidiSink + ?Sized> MidiSink for Box<S> {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        (**self).send(event)
    }

    fn bar(&mut self, plan: &BarPlan) -> Result<(), SinkError> {
        (**self).bar(plan)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl MidiSink for NullSink {
    fn send(&mut self, _event: &TimedEvent) -> Result<(), SinkError> {
        Ok(())
    }
}

/// Keeps every event together with the instant it was handed over.
#[derive(Debug, Default, Clone)]
pub struct RecordingSink {
    pub events: Vec<(Instant, TimedEvent)>,
    pub plans: Vec<BarPlan>,
}

impl RecordingSink {
    pub fn logical(&self) -> Vec<TimedEvent> {
        self.events.iter().map(|(_, e)| *e).collect()
    }
}

impl MidiSink for RecordingSink {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        self.events.push((Instant::now(), *event));
        Ok(())
    }

    fn bar(&mut self, plan: &BarPlan) -> Result<(), SinkError> {
        self.plans.push(plan.clone());
        Ok(())
    }
}

/// Raw MIDI wire bytes to a writer (a rawmidi device node, FIFO or file).
/// Tempo changes have no channel message and are skipped.
#[derive(Debug)]
pub struct RawMidiSink<W: Write> {
    out: W,
}

impl RawMidiSink<File> {
    pub fn open(path: &Path) -> Result<Self, SinkError> {
        let out = OpenOptions::new().write(true).create(true).truncate(true).open(path)?;
        Ok(Self { out })
    }
}

impl<W: Write> RawMidiSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Channel-voice bytes for one event.
pub fn wire_bytes(event: &TimedEvent) -> Option<Vec<u8>> {
    let ch = event.channel & 0x0f;
    match event.kind {
        EventKind::NoteOn { pitch, velocity } => Some(vec![0x90 | ch, pitch & 0x7f, velocity & 0x7f]),
        EventKind::NoteOff { pitch } => Some(vec![0x80 | ch, pitch & 0x7f, 0]),
        EventKind::ProgramChange { program } => Some(vec![0xc0 | ch, program & 0x7f]),
        EventKind::TempoChange { .. } => None,
    }
}

impl<W: Write> MidiSink for RawMidiSink<W> {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        if let Some(bytes) = wire_bytes(event) {
            self.out.write_all(&bytes)?;
            self.out.flush()?;
        }
        Ok(())
    }
}

/// One JSON object per event, newline separated.
#[derive(Debug)]
pub struct EventLogSink<W: Write> {
    out: W,
}

impl<W: Write> EventLogSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> MidiSink for EventLogSink<W> {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        serde_json::to_writer(&mut self.out, event).map_err(io::Error::from)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

/// Forwards to both sinks; the first error wins.
#[derive(Debug, Default)]
pub struct Tee<A, B>(pub A, pub B);

impl<A: MidiSink, B: MidiSink> MidiSink for Tee<A, B> {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        self.0.send(event)?;
        self.1.send(event)
    }

    fn bar(&mut self, plan: &BarPlan) -> Result<(), SinkError> {
        self.0.bar(plan)?;
        self.1.bar(plan)
    }
}

/// Where the loop reads the affect for the next bar.
pub trait AffectSource {
    fn affect_at(&mut self, bar_index: u64, seconds: f64) -> AffectState;
}

impl AffectSource for AffectMailbox {
    fn affect_at(&mut self, _bar_index: u64, _seconds: f64) -> AffectState {
        self.load()
    }
}

impl AffectSource for Trajectory {
    fn affect_at(&mut self, _bar_index: u64, seconds: f64) -> AffectState {
        self.sample(seconds).expect("bar start times are finite and non-negative")
    }
}

/// Shared handle for stopping a running loop or reseeding it at the next bar.
#[derive(Debug, Clone, Default)]
pub struct LiveControl {
    stop: Arc<AtomicBool>,
    reseed: Arc<Mutex<Option<u64>>>,
}

impl LiveControl {
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    pub fn request_reseed(&self, seed: u64) {
        *self.reseed.lock().unwrap_or_else(|e| e.into_inner()) = Some(seed);
    }

    fn take_reseed(&self) -> Option<u64> {
        self.reseed.lock().unwrap_or_else(|e| e.into_inner()).take()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LiveOptions {
    pub max_bars: Option<u64>,
    /// How long before a boundary the affect is read and the bar generated.
    pub lead: Duration,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            max_bars: None,
            lead: Duration::from_millis(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum StopReason {
    BarLimit,
    Stopped,
    SinkLost(String),
}

/// Timing of one bar. Offsets are measured from [`LiveReport::start`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarRecord {
    pub index: u64,
    pub tempo_bpm: f64,
    pub deadline: Duration,
    /// When the affect source was read for this bar.
    pub read_at: Duration,
    /// When the first event on the boundary was handed to the sink.
    pub emitted_at: Option<Duration>,
}

impl BarRecord {
    /// Signed scheduling error of the boundary, in seconds.
    pub fn boundary_error(&self) -> Option<f64> {
        self.emitted_at.map(|t| t.as_secs_f64() - self.deadline.as_secs_f64())
    }
}

#[derive(Debug, Clone)]
pub struct LiveReport {
    pub start: Instant,
    pub bars: Vec<BarRecord>,
    pub events_sent: usize,
    /// NoteOffs sent on stop for notes that were still sounding.
    pub flushed_notes: usize,
    pub stop: StopReason,
}

impl LiveReport {
    /// Median absolute boundary error in seconds.
    pub fn median_boundary_error(&self) -> Option<f64> {
        let mut errs: Vec<f64> = self.bars.iter().filter_map(|b| b.boundary_error()).map(f64::abs).collect();
        if errs.is_empty() {
            return None;
        }
        errs.sort_by(f64::total_cmp);
        let n = errs.len();
        Some(if n % 2 == 1 {
            errs[n / 2]
        } else {
            (errs[n / 2 - 1] + errs[n / 2]) / 2.0
        })
    }
}

/// Sleeps, then spins, until `deadline`. Returns false if stopped meanwhile.
fn wait_until(deadline: Instant, control: &LiveControl) -> bool {
    loop {
        if control.is_stopped() {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        let remaining = deadline - now;
        if remaining > SPIN_WINDOW {
            thread::sleep((remaining - SPIN_WINDOW).min(MAX_NAP));
        } else {
            std::hint::spin_loop();
        }
    }
}

struct Emitter<'a, S: MidiSink + ?Sized> {
    sink: &'a mut S,
    sounding: BTreeMap<(u8, u8), u32>,
    sent: usize,
    last: (u64, f64),
}

impl<S: MidiSink + ?Sized> Emitter<'_, S> {
    fn send(&mut self, e: &TimedEvent) -> Result<(), SinkError> {
        self.sink.send(e)?;
        self.sent += 1;
        self.last = (e.tick, e.seconds);
        match e.kind {
            EventKind::NoteOn { pitch, .. } => *self.sounding.entry((e.channel, pitch)).or_default() += 1,
            EventKind::NoteOff { pitch } => {
                if let Some(n) = self.sounding.get_mut(&(e.channel, pitch)) {
                    *n -= 1;
                    if *n == 0 {
                        self.sounding.remove(&(e.channel, pitch));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Releases every sounding note at position (`tick`, `seconds`).
    fn flood(&mut self, tick: u64, seconds: f64) -> usize {
        let tick = tick.max(self.last.0);
        let seconds = seconds.max(self.last.1);
        let held: Vec<((u8, u8), u32)> = self.sounding.iter().map(|(k, n)| (*k, *n)).collect();
        let mut flushed = 0;
        for ((channel, pitch), n) in held {
            for _ in 0..n {
                let off = TimedEvent {
                    tick,
                    seconds,
                    channel,
                    kind: EventKind::NoteOff { pitch },
                };
                // a lost sink gets the attempt; failures are not actionable here
                let _ = self.send(&off);
                flushed += 1;
            }
        }
        self.sounding.clear();
        flushed
    }
}

/// Runs until the bar limit, a stop request, or a sink failure.
pub fn run_live<A, S>(
    generator: &mut Generator,
    source: &mut A,
    sink: &mut S,
    control: &LiveControl,
    options: &LiveOptions,
) -> LiveReport
where
    A: AffectSource + ?Sized,
    S: MidiSink + ?Sized,
{
    let start = Instant::now() + options.lead * 2;
    let at = |seconds: f64| start + Duration::from_secs_f64(seconds);
    let mut clock = BarClock::default();
    let mut pending = setup_events();
    let mut bars: Vec<BarRecord> = Vec::new();
    let mut out = Emitter {
        sink,
        sounding: BTreeMap::new(),
        sent: 0,
        last: (0, 0.0),
    };
    let mut bar_start = clock;
    let mut bars_done = 0u64;

    let stop = 'bars: loop {
        if options.max_bars.is_some_and(|m| bars_done >= m) {
            break StopReason::BarLimit;
        }
        let deadline = at(clock.seconds);
        if !wait_until(deadline.checked_sub(options.lead).unwrap_or(deadline), control) {
            break StopReason::Stopped;
        }
        if let Some(seed) = control.take_reseed() {
            generator.reseed(seed);
        }
        let read_at = Instant::now().saturating_duration_since(start);
        let affect = source.affect_at(generator.bar_index(), clock.seconds);
        let plan = generator.generate_bar(affect);
        if let Err(e) = out.sink.bar(&plan) {
            break StopReason::SinkLost(e.to_string());
        }
        bar_start = clock;
        let mut window = std::mem::take(&mut pending);
        window.extend(clock.place(&plan));
        sort_events(&mut window);
        let split = window.partition_point(|e| e.tick < clock.tick);
        pending = window.split_off(split);

        bars.push(BarRecord {
            index: plan.bar_index,
            tempo_bpm: plan.tempo_bpm,
            deadline: Duration::from_secs_f64(bar_start.seconds),
            read_at,
            emitted_at: None,
        });
        for e in &window {
            if !wait_until(at(e.seconds), control) {
                break 'bars StopReason::Stopped;
            }
            let sent_at = Instant::now();
            if let Err(err) = out.send(e) {
                break 'bars StopReason::SinkLost(err.to_string());
            }
            let record = bars.last_mut().expect("record pushed above");
            if e.tick == bar_start.tick && record.emitted_at.is_none() {
                record.emitted_at = Some(sent_at.saturating_duration_since(start));
            }
        }
        bars_done += 1;
    };

    let mut stop = stop;
    if stop == StopReason::BarLimit {
        for e in &pending {
            if !wait_until(at(e.seconds), control) {
                stop = StopReason::Stopped;
                break;
            }
            if let Err(err) = out.send(e) {
                stop = StopReason::SinkLost(err.to_string());
                break;
            }
        }
    }
    let mut flushed_notes = 0;
    if !out.sounding.is_empty() {
        let elapsed = Instant::now().saturating_duration_since(start).as_secs_f64();
        let bar_len = clock.seconds - bar_start.seconds;
        let frac = if bar_len > 0.0 {
            ((elapsed - bar_start.seconds) / bar_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let tick = bar_start.tick + (frac * TICKS_PER_BAR as f64) as u64;
        flushed_notes = out.flood(tick, elapsed);
    }
    LiveReport {
        start,
        bars,
        events_sent: out.sent,
        flushed_notes,
        stop,
    }
}
