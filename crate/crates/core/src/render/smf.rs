//! Format-1 Standard MIDI File writer: a tempo track followed by one track per
//! channel in ascending channel order.

use std::collections::BTreeMap;

use super::events::{EventKind, TimedEvent, PPQN};

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 5];
    let mut i = buf.len() - 1;
    buf[i] = (value & 0x7f) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = 0x80 | (value & 0x7f) as u8;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

struct TrackWriter {
    body: Vec<u8>,
    last_tick: u64,
}

impl TrackWriter {
    fn new() -> Self {
        Self {
            body: Vec::new(),
            last_tick: 0,
        }
    }

    fn event(&mut self, tick: u64, bytes: &[u8]) {
        let delta = tick.saturating_sub(self.last_tick);
        write_vlq(&mut self.body, u32::try_from(delta).expect("delta fits the SMF range"));
        self.body.extend_from_slice(bytes);
        self.last_tick = tick.max(self.last_tick);
    }

    fn finish(mut self, out: &mut Vec<u8>) {
        let last = self.last_tick;
        self.event(last, &[0xff, 0x2f, 0x00]);
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
    }
}

/// Serializes a sorted event stream. Identical input yields identical bytes.
pub fn write_smf(events: &[TimedEvent]) -> Vec<u8> {
    let mut tempo = TrackWriter::new();
    let mut channels: BTreeMap<u8, TrackWriter> = BTreeMap::new();
    for e in events {
        let ch = e.channel & 0x0f;
        match e.kind {
            EventKind::TempoChange { micros_per_quarter, .. } => {
                let m = micros_per_quarter.to_be_bytes();
                tempo.event(e.tick, &[0xff, 0x51, 0x03, m[1], m[2], m[3]]);
            }
            EventKind::ProgramChange { program } => {
                channels.entry(ch).or_insert_with(TrackWriter::new).event(e.tick, &[0xc0 | ch, program & 0x7f]);
            }
            EventKind::NoteOn { pitch, velocity } => {
                channels
                    .entry(ch)
                    .or_insert_with(TrackWriter::new)
                    .event(e.tick, &[0x90 | ch, pitch & 0x7f, velocity & 0x7f]);
            }
            EventKind::NoteOff { pitch } => {
                channels
                    .entry(ch)
                    .or_insert_with(TrackWriter::new)
                    .event(e.tick, &[0x80 | ch, pitch & 0x7f, 0]);
            }
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(1 + channels.len() as u16).to_be_bytes());
    out.extend_from_slice(&PPQN.to_be_bytes());
    tempo.finish(&mut out);
    for (_, track) in channels {
        track.finish(&mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vlq_reference_values() {
        // Values and encodings from the Standard MIDI File description.
        let cases: [(u32, &[u8]); 8] = [
            (0x00, &[0x00]),
            (0x40, &[0x40]),
            (0x7f, &[0x7f]),
            (0x80, &[0x81, 0x00]),
            (0x2000, &[0xc0, 0x00]),
            (0x3fff, &[0xff, 0x7f]),
            (0x4000, &[0x81, 0x80, 0x00]),
            (0x0fff_ffff, &[0xff, 0xff, 0xff, 0x7f]),
        ];
        for (v, bytes) in cases {
            let mut out = Vec::new();
            write_vlq(&mut out, v);
            assert_eq!(out, bytes, "{v:#x}");
        }
    }

    #[test]
    fn empty_stream() {
        let bytes = write_smf(&[]);
        let expected: Vec<u8> = [
            &b"MThd"[..],
            &[0, 0, 0, 6, 0, 1, 0, 1, 0x01, 0xe0],
            b"MTrk",
            &[0, 0, 0, 4, 0x00, 0xff, 0x2f, 0x00],
        ]
        .concat();
        assert_eq!(bytes, expected);
    }
}
