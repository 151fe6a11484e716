//! Per-bar generation loop and its output backends.
//!
//! A [`Generator`] owns all musical state. Each call to
//! [`Generator::generate_bar`] resolves one bar into a [`BarPlan`]; the
//! [`events`] module turns plans into a time-ordered MIDI event stream, which
//! [`smf`] writes to a Standard MIDI File and [`live`] schedules against the
//! wall clock.

pub mod events;
pub mod live;
pub mod smf;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::affect::AffectState;
use crate::harmony::{advance, load_matrix, select_chord, ChordProgressionMatrix, HarmonicState, MatrixError};
use crate::rhythm::{
    alto_pattern, bar_velocity, marimba_doubles, note_velocity, register_bounds, roughness, soprano_pattern,
    tempo_bpm, velocity_range, FixtureError, LickBank, RegisterTable, RhythmPattern, VelocityRange, SUBDIVISIONS,
};
use crate::rng::Streams;
use crate::theory::{Chord, Pitch, Register};
use crate::voice::{
    alto_next, bass_note, centered_root_voicing, nearest_chord_tone, soprano_pitches, tenor_voicing, Instrument,
    Motive, MotiveError, MotiveMatrices, NoteSet, Voice,
};

pub use events::{render_offline, EventKind, Rendering, TimedEvent};

/// The four loaded rule tables a session runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub matrix: ChordProgressionMatrix,
    pub motives: MotiveMatrices,
    pub licks: LickBank,
    pub registers: RegisterTable,
}

#[derive(Debug, Error)]
pub enum FixtureLoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Matrix { path: PathBuf, source: MatrixError },
    #[error("{path}: {source}")]
    Motives { path: PathBuf, source: MotiveError },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: FixtureError },
}

/// Optional overrides for the shipped fixtures.
#[derive(Debug, Clone, Default)]
pub struct FixturePaths {
    pub matrix: Option<PathBuf>,
    pub motives: Option<PathBuf>,
    pub licks: Option<PathBuf>,
    pub registers: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, FixtureLoadError> {
    std::fs::read_to_string(path).map_err(|source| FixtureLoadError::Io {
        path: path.to_owned(),
        source,
    })
}

impl Fixtures {
    pub fn shipped() -> Self {
        Self {
            matrix: ChordProgressionMatrix::shipped(),
            motives: MotiveMatrices::shipped(),
            licks: LickBank::shipped(),
            registers: RegisterTable::shipped(),
        }
    }

    /// Loads each table from its path when given, otherwise uses the shipped one.
    pub fn load(paths: &FixturePaths) -> Result<Self, FixtureLoadError> {
        let mut f = Self::shipped();
        if let Some(p) = &paths.matrix {
            f.matrix = load_matrix(read(p)?.as_bytes()).map_err(|source| FixtureLoadError::Matrix {
                path: p.clone(),
                source,
            })?;
        }
        if let Some(p) = &paths.motives {
            f.motives = MotiveMatrices::load(&read(p)?).map_err(|source| FixtureLoadError::Motives {
                path: p.clone(),
                source,
            })?;
        }
        if let Some(p) = &paths.licks {
            f.licks = LickBank::load(&read(p)?).map_err(|source| FixtureLoadError::Table {
                path: p.clone(),
                source,
            })?;
        }
        if let Some(p) = &paths.registers {
            f.registers = RegisterTable::load(&read(p)?).map_err(|source| FixtureLoadError::Table {
                path: p.clone(),
                source,
            })?;
        }
        Ok(f)
    }
}

/// One sounding note of a bar. Onset and duration count eighth-note
/// subdivisions, onsets starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlannedNote {
    pub voice: Voice,
    pub instrument: Instrument,
    pub onset: u8,
    pub duration: u8,
    pub pitch: Pitch,
    pub velocity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The inter-bar velocity cap forced the base velocity out of range.
    VelocityRangeConflict { range: VelocityRange, previous: u8, value: u8 },
    /// No closed tenor voicing fit the register until it was widened.
    RegisterWidened { octaves: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarPlan {
    pub bar_index: u64,
    pub affect: AffectState,
    /// Position in the 8-bar theme, 1-based.
    pub theme_bar: u8,
    pub tempo_bpm: f64,
    pub chord: Chord,
    pub register: Register,
    pub soprano_rhythm: RhythmPattern,
    pub alto_rhythm: RhythmPattern,
    pub alto_motives: Vec<Motive>,
    pub base_velocity: u8,
    pub marimba_doubled: bool,
    pub notes: Vec<PlannedNote>,
    pub warnings: Vec<Warning>,
}

impl BarPlan {
    pub fn voice_notes(&self, voice: Voice) -> impl Iterator<Item = &PlannedNote> {
        self.notes
            .iter()
            .filter(move |n| n.voice == voice && n.instrument != Instrument::Marimba)
    }

    /// Wall-clock length of the bar.
    pub fn seconds(&self) -> f64 {
        bar_seconds(self.tempo_bpm)
    }
}

/// 4/4 bar duration at the given tempo.
pub fn bar_seconds(tempo_bpm: f64) -> f64 {
    4.0 * 60.0 / tempo_bpm
}

/// Session state: fixtures, random streams and everything carried across bars.
#[derive(Debug, Clone)]
pub struct Generator {
    fixtures: Arc<Fixtures>,
    seed: u64,
    streams: Streams,
    harmonic: HarmonicState,
    bar_index: u64,
    prev_tenor: Option<NoteSet>,
    prev_alto: Option<Pitch>,
    prev_motive: Motive,
    prev_velocity: Option<u8>,
}

impl Generator {
    pub fn new(fixtures: Arc<Fixtures>, seed: u64) -> Self {
        Self {
            fixtures,
            seed,
            streams: Streams::new(seed),
            harmonic: HarmonicState::default(),
            bar_index: 0,
            prev_tenor: None,
            prev_alto: None,
            prev_motive: Motive::Hold,
            prev_velocity: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fixtures(&self) -> &Fixtures {
        &self.fixtures
    }

    pub fn bar_index(&self) -> u64 {
        self.bar_index
    }

    pub fn harmonic_state(&self) -> &HarmonicState {
        &self.harmonic
    }

    /// Replaces the random streams; musical continuity (theme position,
    /// previous voicing, melody and velocity) is kept.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.streams = Streams::new(seed);
    }

    pub fn generate_bar(&mut self, affect: AffectState) -> BarPlan {
        let fx = Arc::clone(&self.fixtures);
        let vregion = affect.valence_region();
        let theme_bar = self.harmonic.theme_bar;

        let chord = select_chord(&fx.matrix, vregion, theme_bar, &mut self.streams.chord).clone();
        let scale = fx.matrix.key(vregion);
        let tempo = tempo_bpm(affect.arousal());
        let register = register_bounds(vregion, &fx.registers);

        let soprano_rhythm = soprano_pattern(affect.rhythm_region(), &fx.licks, &mut self.streams.lick);
        let alto_rhythm = alto_pattern(roughness(affect.arousal()), &mut self.streams.alto_rhythm);

        let mut warnings = Vec::new();

        let bass = bass_note(&chord);
        let prev_tenor = self
            .prev_tenor
            .take()
            .unwrap_or_else(|| centered_root_voicing(&chord, &register));
        let tenor = tenor_voicing(&chord, &prev_tenor, &register);
        if tenor.widened_octaves > 0 {
            log::warn!("bar {}: tenor register widened by {} octave(s)", self.bar_index, tenor.widened_octaves);
            warnings.push(Warning::RegisterWidened {
                octaves: tenor.widened_octaves,
            });
        }

        let matrix = fx.motives.for_region(affect.melody_region());
        let mut alto_prev = self
            .prev_alto
            .unwrap_or_else(|| nearest_chord_tone(&chord, &register, register.midpoint()));
        let mut motive = self.prev_motive;
        let mut alto = Vec::new();
        let mut alto_motives = Vec::new();
        for _ in 0..alto_rhythm.onset_count() {
            let (p, m) = alto_next(alto_prev, matrix, motive, &chord, &scale, &register, &mut self.streams.motive);
            alto.push(p);
            alto_motives.push(m);
            alto_prev = p;
            motive = m;
        }

        let soprano = soprano_pitches(&chord, soprano_rhythm.onset_count(), &register, &mut self.streams.soprano);

        let range = velocity_range(affect.arousal());
        let base = bar_velocity(range, self.prev_velocity, &mut self.streams.velocity);
        if base.range_conflict {
            let previous = self.prev_velocity.unwrap_or(base.value);
            log::warn!(
                "bar {}: velocity {} outside {}..={} after the inter-bar cap",
                self.bar_index,
                base.value,
                range.lo,
                range.hi
            );
            warnings.push(Warning::VelocityRangeConflict {
                range,
                previous,
                value: base.value,
            });
        }
        let doubled = marimba_doubles(affect.valence());

        let whole = SUBDIVISIONS as u8;
        let mut notes = vec![PlannedNote {
            voice: Voice::Bass,
            instrument: Voice::Bass.instrument(),
            onset: 1,
            duration: whole,
            pitch: bass,
            velocity: base.value,
        }];
        notes.extend(tenor.notes.pitches().iter().map(|&pitch| PlannedNote {
            voice: Voice::Tenor,
            instrument: Voice::Tenor.instrument(),
            onset: 1,
            duration: whole,
            pitch,
            velocity: base.value,
        }));
        for (&(onset, duration), &pitch) in alto_rhythm.legato_notes().iter().zip(&alto) {
            notes.push(PlannedNote {
                voice: Voice::Alto,
                instrument: Voice::Alto.instrument(),
                onset,
                duration,
                pitch,
                velocity: note_velocity(base.value, &mut self.streams.jitter),
            });
        }
        for (&(onset, duration), &pitch) in soprano_rhythm.legato_notes().iter().zip(&soprano) {
            let note = PlannedNote {
                voice: Voice::Soprano,
                instrument: Voice::Soprano.instrument(),
                onset,
                duration,
                pitch,
                velocity: note_velocity(base.value, &mut self.streams.jitter),
            };
            notes.push(note);
            if doubled {
                notes.push(PlannedNote {
                    instrument: Instrument::Marimba,
                    ..note
                });
            }
        }

        let plan = BarPlan {
            bar_index: self.bar_index,
            affect,
            theme_bar,
            tempo_bpm: tempo,
            chord: chord.clone(),
            register,
            soprano_rhythm,
            alto_rhythm,
            alto_motives,
            base_velocity: base.value,
            marimba_doubled: doubled,
            notes,
            warnings,
        };

        self.prev_tenor = Some(tenor.notes);
        self.prev_alto = Some(alto_prev);
        self.prev_motive = motive;
        self.prev_velocity = Some(base.value);
        self.harmonic = advance(&self.harmonic);
        self.harmonic.current_chord = Some(chord);
        self.bar_index += 1;
        plan
    }
}
