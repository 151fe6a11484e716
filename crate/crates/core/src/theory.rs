//! Pitches, scales, chords and diatonic step motion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TheoryError {
    #[error("malformed note name '{0}'")]
    BadNoteName(String),
    #[error("malformed pitch class '{0}'")]
    BadPitchClass(String),
    #[error("pitch {0} is outside the MIDI range 0..=127")]
    OutOfRange(i32),
    #[error("unknown chord quality '{0}'")]
    BadQuality(String),
    #[error("unknown scale mode '{0}'")]
    BadMode(String),
}

/// A MIDI note number, C4 = 60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pitch(u8);

impl Pitch {
    pub const MAX: Pitch = Pitch(127);

    pub fn new(midi: i32) -> Result<Self, TheoryError> {
        if (0..=127).contains(&midi) {
            Ok(Pitch(midi as u8))
        } else {
            Err(TheoryError::OutOfRange(midi))
        }
    }

    /// Saturates into `0..=127`.
    pub fn saturating(midi: i32) -> Self {
        Pitch(midi.clamp(0, 127) as u8)
    }

    pub fn midi(self) -> u8 {
        self.0
    }

    pub fn class(self) -> PitchClass {
        PitchClass(self.0 % 12)
    }

    pub fn octave(self) -> i32 {
        self.0 as i32 / 12 - 1
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class(), self.octave())
    }
}

impl FromStr for Pitch {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        note_name_to_midi(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PitchClass(u8);

const SHARP_NAMES: [&str; 12] = ["C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"];

impl PitchClass {
    pub fn new(pc: i32) -> Self {
        PitchClass(pc.rem_euclid(12) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i32) -> Self {
        Self::new(self.0 as i32 + semitones)
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(SHARP_NAMES[self.0 as usize])
    }
}

impl FromStr for PitchClass {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (pc, rest) = parse_pitch_class(s).ok_or_else(|| TheoryError::BadPitchClass(s.into()))?;
        if !rest.is_empty() {
            return Err(TheoryError::BadPitchClass(s.into()));
        }
        Ok(pc)
    }
}

/// Letter plus optional single accidental; returns the unparsed tail.
fn parse_pitch_class(s: &str) -> Option<(PitchClass, &str)> {
    let mut chars = s.chars();
    let base = match chars.next()?.to_ascii_uppercase() {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = chars.as_str();
    let (shift, rest) = match rest.chars().next() {
        Some('#') => (1, &rest[1..]),
        Some('b') => (-1, &rest[1..]),
        _ => (0, rest),
    };
    Some((PitchClass::new(base + shift), rest))
}

/// Parses names like `C4`, `F#3`, `Bb-1` using the C4 = 60 convention.
pub fn note_name_to_midi(name: &str) -> Result<Pitch, TheoryError> {
    let bad = || TheoryError::BadNoteName(name.to_string());
    let trimmed = name.trim();
    let (pc, octave) = parse_pitch_class(trimmed).ok_or_else(bad)?;
    if octave.is_empty() || !octave.trim_start_matches('-').chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let octave: i32 = octave.parse().map_err(|_| bad())?;
    // Cb and B# wrap across the octave boundary
    let letter_octave_fix = match (trimmed.as_bytes()[0].to_ascii_uppercase(), pc.value()) {
        (b'C', 11) => -1,
        (b'B', 0) => 1,
        _ => 0,
    };
    let midi = (octave + 1 + letter_octave_fix) * 12 + pc.value() as i32;
    Pitch::new(midi).map_err(|_| TheoryError::OutOfRange(midi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChordQuality {
    Major,
    Minor,
    Diminished,
    Augmented,
    Dominant7,
    Major7,
    Minor7,
    HalfDiminished7,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 8] = [
        Self::Major,
        Self::Minor,
        Self::Diminished,
        Self::Augmented,
        Self::Dominant7,
        Self::Major7,
        Self::Minor7,
        Self::HalfDiminished7,
    ];

    /// Semitone offsets above the root, in stacking order.
    pub fn intervals(self) -> &'static [u8] {
        match self {
            Self::Major => &[0, 4, 7],
            Self::Minor => &[0, 3, 7],
            Self::Diminished => &[0, 3, 6],
            Self::Augmented => &[0, 4, 8],
            Self::Dominant7 => &[0, 4, 7, 10],
            Self::Major7 => &[0, 4, 7, 11],
            Self::Minor7 => &[0, 3, 7, 10],
            Self::HalfDiminished7 => &[0, 3, 6, 10],
        }
    }

    /// Minor-third based qualities: the "darker" chord family.
    pub fn is_minor_family(self) -> bool {
        matches!(
            self,
            Self::Minor | Self::Diminished | Self::Minor7 | Self::HalfDiminished7
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Major => "major",
            Self::Minor => "minor",
            Self::Diminished => "diminished",
            Self::Augmented => "augmented",
            Self::Dominant7 => "dominant7",
            Self::Major7 => "major7",
            Self::Minor7 => "minor7",
            Self::HalfDiminished7 => "half_diminished7",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Self::Major => "",
            Self::Minor => "m",
            Self::Diminished => "dim",
            Self::Augmented => "aug",
            Self::Dominant7 => "7",
            Self::Major7 => "maj7",
            Self::Minor7 => "m7",
            Self::HalfDiminished7 => "m7b5",
        }
    }
}

impl FromStr for ChordQuality {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|q| q.name() == s.to_ascii_lowercase())
            .ok_or_else(|| TheoryError::BadQuality(s.into()))
    }
}

/// Harmonic role of a chord within its key, read off the roman numeral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HarmonicFunction {
    Tonic,
    Subdominant,
    Dominant,
}

impl HarmonicFunction {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Tonic => "T",
            Self::Subdominant => "S",
            Self::Dominant => "D",
        }
    }
}

impl FromStr for HarmonicFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(Self::Tonic),
            "S" => Ok(Self::Subdominant),
            "D" => Ok(Self::Dominant),
            other => Err(format!("unknown harmonic function '{other}' (expected T|S|D)")),
        }
    }
}

/// Scale degree (1..=7) of a roman-numeral label such as `bVI`, `vii°`, `V7`.
pub fn roman_degree(label: &str) -> Option<u8> {
    let body = label.trim_start_matches(['b', '#']);
    let numeral: String = body
        .chars()
        .take_while(|c| matches!(c.to_ascii_uppercase(), 'I' | 'V'))
        .collect::<String>()
        .to_ascii_uppercase();
    let degree = match numeral.as_str() {
        "I" => 1,
        "II" => 2,
        "III" => 3,
        "IV" => 4,
        "V" => 5,
        "VI" => 6,
        "VII" => 7,
        _ => return None,
    };
    Some(degree)
}

/// I, III, VI are tonic family; II, IV predominant; V, VII dominant.
pub fn harmonic_function(label: &str) -> Option<HarmonicFunction> {
    Some(match roman_degree(label)? {
        1 | 3 | 6 => HarmonicFunction::Tonic,
        2 | 4 => HarmonicFunction::Subdominant,
        _ => HarmonicFunction::Dominant,
    })
}

/// True only for the tonic chord itself (degree I), as required at cadences.
pub fn is_tonic_chord(label: &str) -> bool {
    roman_degree(label) == Some(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chord {
    pub root: PitchClass,
    pub quality: ChordQuality,
    pub label: String,
}

impl Chord {
    pub fn new(root: PitchClass, quality: ChordQuality, label: impl Into<String>) -> Self {
        Self {
            root,
            quality,
            label: label.into(),
        }
    }

    /// Pitch classes in stacking order (root, third, fifth[, seventh]).
    pub fn tones(&self) -> Vec<PitchClass> {
        self.quality
            .intervals()
            .iter()
            .map(|&i| self.root.transpose(i as i32))
            .collect()
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.tones().contains(&pc)
    }

    pub fn function(&self) -> Option<HarmonicFunction> {
        harmonic_function(&self.label)
    }

    /// Lead-sheet symbol, e.g. `G7` or `Ebmaj7`.
    pub fn symbol(&self) -> String {
        format!("{}{}", self.root, self.quality.suffix())
    }
}

impl fmt::Display for Chord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.label, self.symbol())
    }
}

pub fn chord_tones(chord: &Chord) -> Vec<PitchClass> {
    chord.tones()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Major,
    NaturalMinor,
    HarmonicMinor,
}

impl ScaleMode {
    pub fn steps(self) -> [u8; 7] {
        match self {
            Self::Major => [0, 2, 4, 5, 7, 9, 11],
            Self::NaturalMinor => [0, 2, 3, 5, 7, 8, 10],
            Self::HarmonicMinor => [0, 2, 3, 5, 7, 8, 11],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Major => "major",
            Self::NaturalMinor => "natural_minor",
            Self::HarmonicMinor => "harmonic_minor",
        }
    }
}

impl FromStr for ScaleMode {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "major" => Ok(Self::Major),
            "natural_minor" | "minor" => Ok(Self::NaturalMinor),
            "harmonic_minor" => Ok(Self::HarmonicMinor),
            _ => Err(TheoryError::BadMode(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    pub tonic: PitchClass,
    pub mode: ScaleMode,
}

impl Scale {
    pub fn new(tonic: PitchClass, mode: ScaleMode) -> Self {
        Self { tonic, mode }
    }

    pub fn degrees(&self) -> [PitchClass; 7] {
        self.mode.steps().map(|s| self.tonic.transpose(s as i32))
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.degrees().contains(&pc)
    }

    /// The major scale on the same tonic.
    pub fn parallel_major(&self) -> Scale {
        Scale::new(self.tonic, ScaleMode::Major)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.tonic, self.mode.name())
    }
}

impl FromStr for Scale {
    type Err = TheoryError;

    /// `"C major"`, `"A harmonic_minor"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let (Some(tonic), Some(mode), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(TheoryError::BadMode(s.into()));
        };
        Ok(Scale::new(tonic.parse()?, mode.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Down,
    Up,
}

/// Highest scale member at or below `midi`, if any exists in `0..=midi`.
/// Moves to the nearest scale member strictly above or below `p`. For scale
/// members this is the adjacent degree; a pitch outside the scale moves to
/// the closest member in that direction. Stays put at the edge of the MIDI
/// range.
pub fn diatonic_step(p: Pitch, scale: &Scale, direction: Direction) -> Pitch {
    let start = p.midi() as i32;
    let member = |m: &i32| scale.contains(PitchClass::new(*m));
    let next = match direction {
        Direction::Up => ((start + 1)..=127).find(member),
        Direction::Down => (0..start).rev().find(member),
    };
    Pitch::saturating(next.unwrap_or(start))
}

/// Inclusive pitch range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Register {
    pub low: Pitch,
    pub high: Pitch,
}

impl Register {
    pub fn new(low: Pitch, high: Pitch) -> Result<Self, TheoryError> {
        if low > high {
            return Err(TheoryError::OutOfRange(low.midi() as i32));
        }
        Ok(Self { low, high })
    }

    pub fn contains(&self, p: Pitch) -> bool {
        (self.low..=self.high).contains(&p)
    }

    pub fn midpoint(&self) -> f64 {
        (self.low.midi() as f64 + self.high.midi() as f64) / 2.0
    }

    /// Every pitch in the range whose class is `pc`, ascending.
    pub fn realizations(&self, pc: PitchClass) -> impl Iterator<Item = Pitch> + '_ {
        (self.low.midi()..=self.high.midi())
            .filter(move |m| m % 12 == pc.value())
            .map(Pitch)
    }

    /// Shifts by whole octaves until inside the range; falls back to the
    /// nearest bound when the range is narrower than the gap.
    pub fn fold(&self, midi: i32) -> Pitch {
        let (lo, hi) = (self.low.midi() as i32, self.high.midi() as i32);
        let mut m = midi;
        while m > hi {
            m -= 12;
        }
        while m < lo {
            m += 12;
        }
        Pitch::saturating(m.clamp(lo, hi))
    }

    /// Widens by one octave on each side, saturating at the MIDI range.
    pub fn widened(&self) -> Register {
        Register {
            low: Pitch::saturating(self.low.midi() as i32 - 12),
            high: Pitch::saturating(self.high.midi() as i32 + 12),
        }
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.low, self.high)
    }
}
