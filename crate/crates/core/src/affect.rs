//! Affect-state representation, region quantization and trajectories.
//!
//! Valence and arousal are the only external control signals. Every rule in
//! the generator reads them through one of the region quantizers below, once
//! per bar.

use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AffectError {
    #[error("affect coordinates must be finite (got valence={valence}, arousal={arousal})")]
    NonFinite { valence: f64, arousal: f64 },
    #[error("trajectory has no points")]
    EmptyTrajectory,
    #[error("trajectory must start at offset 0 (got {0})")]
    FirstOffsetNotZero(f64),
    #[error("trajectory offsets must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: f64, next: f64 },
    #[error("sample time must be a finite value >= 0 (got {0})")]
    BadSampleTime(f64),
    #[error("trajectory line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A (valence, arousal) pair, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectState {
    valence: f64,
    arousal: f64,
}

impl AffectState {
    /// Clamps both coordinates into `[0, 1]`. Non-finite input is rejected.
    pub fn clamped(valence: f64, arousal: f64) -> Result<Self, AffectError> {
        if !valence.is_finite() || !arousal.is_finite() {
            return Err(AffectError::NonFinite { valence, arousal });
        }
        Ok(Self {
            valence: valence.clamp(0.0, 1.0),
            arousal: arousal.clamp(0.0, 1.0),
        })
    }

    pub fn valence(&self) -> f64 {
        self.valence
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }

    pub fn valence_region(&self) -> ValenceRegion {
        valence_region(*self)
    }

    pub fn rhythm_region(&self) -> ArousalRhythmRegion {
        arousal_rhythm_region(*self)
    }

    pub fn melody_region(&self) -> ArousalMelodyRegion {
        arousal_melody_region(*self)
    }
}

impl Default for AffectState {
    fn default() -> Self {
        Self {
            valence: 0.5,
            arousal: 0.5,
        }
    }
}

impl fmt::Display for AffectState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(v={:.3}, a={:.3})", self.valence, self.arousal)
    }
}

pub fn clamp_affect(valence: f64, arousal: f64) -> Result<AffectState, AffectError> {
    AffectState::clamped(valence, arousal)
}

/// One of ten equal-width valence bands; index 9 is closed at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValenceRegion(u8);

impl ValenceRegion {
    pub const COUNT: usize = 10;

    pub fn new(index: u8) -> Option<Self> {
        (index < Self::COUNT as u8).then_some(Self(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ValenceRegion> {
        (0..Self::COUNT as u8).map(ValenceRegion)
    }
}

pub fn valence_region(state: AffectState) -> ValenceRegion {
    let idx = (state.valence * 10.0).floor() as i64;
    ValenceRegion(idx.clamp(0, 9) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArousalRhythmRegion {
    Low,
    Moderate,
    High,
}

impl ArousalRhythmRegion {
    pub const ALL: [ArousalRhythmRegion; 3] = [Self::Low, Self::Moderate, Self::High];
}

pub fn arousal_rhythm_region(state: AffectState) -> ArousalRhythmRegion {
    if state.arousal < 0.4 {
        ArousalRhythmRegion::Low
    } else if state.arousal < 0.75 {
        ArousalRhythmRegion::Moderate
    } else {
        ArousalRhythmRegion::High
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArousalMelodyRegion {
    Lower,
    Upper,
}

pub fn arousal_melody_region(state: AffectState) -> ArousalMelodyRegion {
    if state.arousal < 0.5 {
        ArousalMelodyRegion::Lower
    } else {
        ArousalMelodyRegion::Upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    #[default]
    Hold,
    Linear,
}

impl FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hold" => Ok(Self::Hold),
            "linear" => Ok(Self::Linear),
            other => Err(format!("unknown interpolation '{other}' (expected hold|linear)")),
        }
    }
}

/// Time-stamped affect points, offsets in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<(f64, AffectState)>,
    interpolation: Interpolation,
}

impl Trajectory {
    pub fn new(
        points: Vec<(f64, AffectState)>,
        interpolation: Interpolation,
    ) -> Result<Self, AffectError> {
        let first = points.first().ok_or(AffectError::EmptyTrajectory)?;
        if first.0 != 0.0 {
            return Err(AffectError::FirstOffsetNotZero(first.0));
        }
        for pair in points.windows(2) {
            let (prev, next) = (pair[0].0, pair[1].0);
            if !(next > prev) || !next.is_finite() {
                return Err(AffectError::NotIncreasing { prev, next });
            }
        }
        Ok(Self {
            points,
            interpolation,
        })
    }

    pub fn constant(state: AffectState) -> Self {
        Self {
            points: vec![(0.0, state)],
            interpolation: Interpolation::Hold,
        }
    }

    pub fn points(&self) -> &[(f64, AffectState)] {
        &self.points
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn sample(&self, t: f64) -> Result<AffectState, AffectError> {
        sample_trajectory(self, t)
    }

    /// Parses `time_seconds,valence,arousal` records. Lines starting with `#`
    /// are comments; a non-numeric first record is treated as a header.
    pub fn parse<R: Read>(reader: R, interpolation: Interpolation) -> Result<Self, AffectError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut points = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| AffectError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 3 {
                return Err(AffectError::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let nums: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match nums {
                Ok(v) => {
                    let state = AffectState::clamped(v[1], v[2]).map_err(|e| AffectError::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                    points.push((v[0], state));
                }
                Err(_) if points.is_empty() && is_header(&record) => continue,
                Err(e) => {
                    return Err(AffectError::Parse {
                        line,
                        message: e.to_string(),
                    })
                }
            }
        }
        Trajectory::new(points, interpolation)
    }
}

fn is_header(record: &csv::StringRecord) -> bool {
    record.iter().all(|f| f.chars().any(|c| c.is_ascii_alphabetic()))
}

pub fn sample_trajectory(traj: &Trajectory, t: f64) -> Result<AffectState, AffectError> {
    if !t.is_finite() || t < 0.0 {
        return Err(AffectError::BadSampleTime(t));
    }
    let points = &traj.points;
    if points.is_empty() {
        return Err(AffectError::EmptyTrajectory);
    }
    // index of the last point with offset <= t
    let idx = points.partition_point(|(off, _)| *off <= t).saturating_sub(1);
    let (t0, s0) = points[idx];
    match (traj.interpolation, points.get(idx + 1)) {
        (Interpolation::Linear, Some(&(t1, s1))) => {
            let w = (t - t0) / (t1 - t0);
            AffectState::clamped(
                s0.valence + w * (s1.valence - s0.valence),
                s0.arousal + w * (s1.arousal - s0.arousal),
            )
        }
        _ => Ok(s0),
    }
}

/// Single-slot "latest value wins" cell shared between a control surface and
/// the generation loop.
#[derive(Debug, Clone, Default)]
pub struct AffectMailbox {
    slot: Arc<Mutex<AffectState>>,
}

impl AffectMailbox {
    pub fn new(initial: AffectState) -> Self {
        Self {
            slot: Arc::new(Mutex::new(initial)),
        }
    }

    pub fn store(&self, state: AffectState) {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner()) = state;
    }

    pub fn load(&self) -> AffectState {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner())
    }
}
