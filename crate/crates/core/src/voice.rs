//! Four-voice pitch resolution.
//!
//! * bass: chord root in the octave starting at C3
//! * tenor: the closed voicing least dissimilar to the previous one
//! * alto: a Markov chain over melodic motives (step down, step up, hold,
//!   chord-tone jump) with one transition matrix per arousal half
//! * soprano: uniformly random chord tones

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::ArousalMelodyRegion;
use crate::theory::{diatonic_step, Chord, Direction, Pitch, PitchClass, Register, Scale};

pub const SHIPPED_MOTIVES: &str = include_str!("../fixtures/motive_matrices.toml");

const BASS_OCTAVE_START: u8 = 48; // C3

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instrument {
    Piano,
    Strings,
    Clarinet,
    Marimba,
}

impl Instrument {
    pub const ALL: [Instrument; 4] = [Self::Piano, Self::Strings, Self::Clarinet, Self::Marimba];

    pub fn channel(self) -> u8 {
        match self {
            Self::Piano => 0,
            Self::Strings => 1,
            Self::Clarinet => 2,
            Self::Marimba => 3,
        }
    }

    /// General MIDI program number (0-based).
    pub fn gm_program(self) -> u8 {
        match self {
            Self::Piano => 0,
            Self::Strings => 48,
            Self::Clarinet => 71,
            Self::Marimba => 12,
        }
    }

    pub fn from_channel(channel: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.channel() == channel)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Piano => "Piano",
            Self::Strings => "Strings",
            Self::Clarinet => "Clarinet",
            Self::Marimba => "Marimba",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Voice {
    Bass,
    Tenor,
    Alto,
    Soprano,
}

impl Voice {
    pub const ALL: [Voice; 4] = [Self::Bass, Self::Tenor, Self::Alto, Self::Soprano];

    /// Fixed voice-to-instrument assignment. The soprano may additionally be
    /// doubled on marimba.
    pub fn instrument(self) -> Instrument {
        match self {
            Self::Bass => Instrument::Strings,
            Self::Tenor | Self::Alto => Instrument::Piano,
            Self::Soprano => Instrument::Clarinet,
        }
    }
}

/// Simultaneous pitches, ascending and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoteSet(Vec<Pitch>);

impl NoteSet {
    /// Sorts and deduplicates; `None` when empty.
    pub fn new(mut pitches: Vec<Pitch>) -> Option<Self> {
        pitches.sort();
        pitches.dedup();
        (!pitches.is_empty()).then_some(Self(pitches))
    }

    pub fn pitches(&self) -> &[Pitch] {
        &self.0
    }

    pub fn lowest(&self) -> Pitch {
        self.0[0]
    }

    pub fn highest(&self) -> Pitch {
        self.0[self.0.len() - 1]
    }
}

impl fmt::Display for NoteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

/// Sum of absolute pitch differences over every cross pair of the two sets.
pub fn dissimilarity(a: &NoteSet, b: &NoteSet) -> u32 {
    a.0.iter()
        .flat_map(|&x| b.0.iter().map(move |&y| (x.midi() as i32 - y.midi() as i32).unsigned_abs()))
        .sum()
}

/// Closed-position voicings (root position and every inversion, stacked
/// within one octave) that fit entirely inside `register`.
pub fn closed_voicings(chord: &Chord, register: &Register) -> Vec<NoteSet> {
    let tones = chord.tones();
    let mut out = Vec::new();
    for inversion in 0..tones.len() {
        let order: Vec<PitchClass> = tones.iter().cycle().skip(inversion).take(tones.len()).copied().collect();
        for bottom in register.realizations(order[0]) {
            let mut current = bottom.midi() as i32;
            let mut pitches = vec![bottom];
            let mut fits = true;
            for pc in &order[1..] {
                let gap = (pc.value() as i32 - current).rem_euclid(12);
                current += if gap == 0 { 12 } else { gap };
                match Pitch::new(current) {
                    Ok(p) if register.contains(p) => pitches.push(p),
                    _ => {
                        fits = false;
                        break;
                    }
                }
            }
            if fits {
                out.extend(NoteSet::new(pitches));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TenorVoicing {
    pub notes: NoteSet,
    /// Octaves the register had to be widened by on each side to fit any
    /// voicing; non-zero values are reported as warnings.
    pub widened_octaves: u8,
}

/// Picks the closed voicing minimizing [`dissimilarity`] to `prev`. Ties go to
/// the lowest bass pitch, then to lexicographic pitch order.
pub fn tenor_voicing(chord: &Chord, prev: &NoteSet, register: &Register) -> TenorVoicing {
    let mut reg = *register;
    let mut widened_octaves = 0;
    loop {
        let best = closed_voicings(chord, &reg)
            .into_iter()
            .min_by(|a, b| {
                dissimilarity(prev, a)
                    .cmp(&dissimilarity(prev, b))
                    .then_with(|| a.lowest().cmp(&b.lowest()))
                    .then_with(|| a.pitches().cmp(b.pitches()))
            });
        if let Some(notes) = best {
            return TenorVoicing {
                notes,
                widened_octaves,
            };
        }
        let next = reg.widened();
        assert!(next != reg, "no closed voicing of {chord} fits the MIDI range");
        reg = next;
        widened_octaves += 1;
    }
}

/// Root-position voicing whose mean pitch is nearest the register midpoint.
pub fn centered_root_voicing(chord: &Chord, register: &Register) -> NoteSet {
    let mid = register.midpoint();
    let mut reg = *register;
    loop {
        let candidates: Vec<NoteSet> = closed_voicings(chord, &reg)
            .into_iter()
            .filter(|v| v.lowest().class() == chord.root)
            .collect();
        let mean = |v: &NoteSet| v.pitches().iter().map(|p| p.midi() as f64).sum::<f64>() / v.pitches().len() as f64;
        if let Some(best) = candidates.into_iter().min_by(|a, b| {
            (mean(a) - mid)
                .abs()
                .total_cmp(&(mean(b) - mid).abs())
                .then_with(|| a.lowest().cmp(&b.lowest()))
        }) {
            return best;
        }
        reg = reg.widened();
    }
}

/// Chord root realized in the C3 octave (MIDI 48-59).
pub fn bass_note(chord: &Chord) -> Pitch {
    Pitch::saturating(BASS_OCTAVE_START as i32 + chord.root.value() as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motive {
    StepDown,
    StepUp,
    Hold,
    ChordTone,
}

impl Motive {
    pub const ALL: [Motive; 4] = [Self::StepDown, Self::StepUp, Self::Hold, Self::ChordTone];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::StepDown => "-1",
            Self::StepUp => "+1",
            Self::Hold => "0",
            Self::ChordTone => "CT",
        }
    }
}

#[derive(Debug, Error)]
pub enum MotiveError {
    #[error("motive matrix document does not parse: {0}")]
    Parse(String),
    #[error("{region:?} matrix row {row:?}: {message}")]
    Row {
        region: ArousalMelodyRegion,
        row: Motive,
        message: String,
    },
}

/// Row-stochastic 4x4 matrix indexed by [`Motive`] (rows: previous motive).
#[derive(Debug, Clone, PartialEq)]
pub struct MotiveTransitionMatrix {
    pub region: ArousalMelodyRegion,
    rows: [[f64; 4]; 4],
}

impl MotiveTransitionMatrix {
    pub fn new(region: ArousalMelodyRegion, rows: [[f64; 4]; 4]) -> Result<Self, MotiveError> {
        for (motive, row) in Motive::ALL.into_iter().zip(&rows) {
            let err = |message: String| MotiveError::Row {
                region,
                row: motive,
                message,
            };
            if let Some(bad) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(err(format!("entry {bad} is negative or not finite")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(err(format!("row sums to {sum}")));
            }
        }
        Ok(Self { region, rows })
    }

    pub fn row(&self, prev: Motive) -> &[f64; 4] {
        &self.rows[prev.index()]
    }

    pub fn sample<R: Rng + ?Sized>(&self, prev: Motive, rng: &mut R) -> Motive {
        let dist = WeightedIndex::new(self.row(prev)).expect("validated row");
        Motive::ALL[dist.sample(rng)]
    }

    /// Probability mass on the two step motives for a given row.
    pub fn step_mass(&self, prev: Motive) -> f64 {
        let r = self.row(prev);
        r[Motive::StepDown.index()] + r[Motive::StepUp.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotiveMatrices {
    pub lower: MotiveTransitionMatrix,
    pub upper: MotiveTransitionMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotives {
    format: String,
    lower: RawRows,
    upper: RawRows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRows {
    step_down: [f64; 4],
    step_up: [f64; 4],
    hold: [f64; 4],
    chord_tone: [f64; 4],
}

impl RawRows {
    fn rows(&self) -> [[f64; 4]; 4] {
        [self.step_down, self.step_up, self.hold, self.chord_tone]
    }
}

impl MotiveMatrices {
    /// Loads the two matrices from a TOML document with `[lower]` and
    /// `[upper]` tables, each holding rows `step_down`, `step_up`, `hold`,
    /// `chord_tone`; columns are in the same order.
    pub fn load(document: &str) -> Result<Self, MotiveError> {
        let raw: RawMotives = toml::from_str(document).map_err(|e| MotiveError::Parse(e.to_string()))?;
        if raw.format != "motive-matrices/1" {
            return Err(MotiveError::Parse(format!("unsupported format '{}'", raw.format)));
        }
        Ok(Self {
            lower: MotiveTransitionMatrix::new(ArousalMelodyRegion::Lower, raw.lower.rows())?,
            upper: MotiveTransitionMatrix::new(ArousalMelodyRegion::Upper, raw.upper.rows())?,
        })
    }

    pub fn shipped() -> Self {
        Self::load(SHIPPED_MOTIVES).expect("shipped motive matrices are valid")
    }

    pub fn for_region(&self, region: ArousalMelodyRegion) -> &MotiveTransitionMatrix {
        match region {
            ArousalMelodyRegion::Lower => &self.lower,
            ArousalMelodyRegion::Upper => &self.upper,
        }
    }
}

/// Chord tone nearest `target` within the register (ties go low).
pub fn nearest_chord_tone(chord: &Chord, register: &Register, target: f64) -> Pitch {
    chord
        .tones()
        .into_iter()
        .flat_map(|pc| register.realizations(pc).collect::<Vec<_>>())
        .min_by(|a, b| {
            (a.midi() as f64 - target)
                .abs()
                .total_cmp(&(b.midi() as f64 - target).abs())
                .then(a.cmp(b))
        })
        .unwrap_or_else(|| register.fold(chord.root.value() as i32 + 60))
}

/// Applies one motive to `prev` (first folded into the register) and returns
/// the new pitch with the motive actually applied. A step that would leave
/// the register turns around, so step motives always move by exactly one
/// diatonic step; if neither direction fits the line holds.
pub fn apply_motive<R: Rng + ?Sized>(
    prev: Pitch,
    motive: Motive,
    chord: &Chord,
    scale: &Scale,
    register: &Register,
    rng: &mut R,
) -> (Pitch, Motive) {
    let prev = register.fold(prev.midi() as i32);
    let step = |dir| Some(diatonic_step(prev, scale, dir)).filter(|q| register.contains(*q) && *q != prev);
    match motive {
        Motive::StepDown | Motive::StepUp => {
            let (dir, back, reverse) = if motive == Motive::StepDown {
                (Direction::Down, Direction::Up, Motive::StepUp)
            } else {
                (Direction::Up, Direction::Down, Motive::StepDown)
            };
            step(dir)
                .map(|q| (q, motive))
                .or_else(|| step(back).map(|q| (q, reverse)))
                .unwrap_or((prev, Motive::Hold))
        }
        Motive::Hold => (prev, Motive::Hold),
        Motive::ChordTone => {
            let tones = chord.tones();
            let pc = tones[rng.random_range(0..tones.len())];
            // the realization closest to where the line currently is
            let q = register
                .realizations(pc)
                .min_by_key(|p| ((p.midi() as i32 - prev.midi() as i32).abs(), *p))
                .unwrap_or_else(|| register.fold(pc.value() as i32 + 12 * (prev.midi() as i32 / 12)));
            (q, Motive::ChordTone)
        }
    }
}

/// Samples the next motive from the row of `prev_motive` and applies it.
pub fn alto_next<R: Rng + ?Sized>(
    prev: Pitch,
    matrix: &MotiveTransitionMatrix,
    prev_motive: Motive,
    chord: &Chord,
    scale: &Scale,
    register: &Register,
    rng: &mut R,
) -> (Pitch, Motive) {
    let motive = matrix.sample(prev_motive, rng);
    apply_motive(prev, motive, chord, scale, register, rng)
}

/// `onset_count` pitches drawn uniformly from the chord tones realized within
/// the register.
pub fn soprano_pitches<R: Rng + ?Sized>(
    chord: &Chord,
    onset_count: usize,
    register: &Register,
    rng: &mut R,
) -> Vec<Pitch> {
    let mut pool: Vec<Pitch> = chord.tones().into_iter().flat_map(|pc| register.realizations(pc).collect::<Vec<_>>()).collect();
    pool.sort();
    if pool.is_empty() {
        pool.push(nearest_chord_tone(chord, &register.widened(), register.midpoint()));
    }
    (0..onset_count).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::theory::{ChordQuality, ScaleMode};

    fn p(m: i32) -> Pitch {
        Pitch::new(m).unwrap()
    }

    fn ns(v: &[i32]) -> NoteSet {
        NoteSet::new(v.iter().map(|&m| p(m)).collect()).unwrap()
    }

    fn reg(lo: i32, hi: i32) -> Register {
        Register::new(p(lo), p(hi)).unwrap()
    }

    fn chord(root: &str, q: ChordQuality) -> Chord {
        Chord::new(root.parse().unwrap(), q, "I")
    }

    #[test]
    fn dissimilarity_examples() {
        assert_eq!(dissimilarity(&ns(&[60]), &ns(&[60])), 0);
        assert_eq!(dissimilarity(&ns(&[60]), &ns(&[62])), 2);
        // |0|+|4|+|7| + |4|+|0|+|3| + |7|+|3|+|0| = 28
        assert_eq!(dissimilarity(&ns(&[60, 64, 67]), &ns(&[60, 64, 67])), 28);
    }

    #[test]
    fn noteset_normalizes() {
        assert_eq!(ns(&[67, 60, 64, 60]).pitches(), &[p(60), p(64), p(67)]);
        assert!(NoteSet::new(vec![]).is_none());
    }

    #[test]
    fn tenor_keeps_identical_chord() {
        let v = tenor_voicing(&chord("C", ChordQuality::Major), &ns(&[60, 64, 67]), &reg(48, 96));
        assert_eq!(v.notes, ns(&[60, 64, 67]));
        assert_eq!(v.widened_octaves, 0);
    }

    #[test]
    fn tenor_singleton_candidate() {
        let v = tenor_voicing(&chord("C", ChordQuality::Major), &ns(&[60]), &reg(60, 67));
        assert_eq!(v.notes, ns(&[60, 64, 67]));
    }

    #[test]
    fn tenor_widens_narrow_register() {
        let v = tenor_voicing(&chord("C", ChordQuality::Major), &ns(&[60]), &reg(61, 63));
        assert_eq!(v.widened_octaves, 1);
        assert!(closed_voicings(&chord("C", ChordQuality::Major), &reg(49, 75)).contains(&v.notes));
    }

    #[test]
    fn closed_voicings_stay_within_octave() {
        for q in ChordQuality::ALL {
            for v in closed_voicings(&chord("D", q), &reg(24, 96)) {
                assert!(v.highest().midi() - v.lowest().midi() < 12);
                assert_eq!(v.pitches().len(), q.intervals().len());
            }
        }
    }

    #[test]
    fn centered_voicing_is_root_position() {
        let v = centered_root_voicing(&chord("G", ChordQuality::Major), &reg(48, 84));
        assert_eq!(v, ns(&[67, 71, 74]));
    }

    #[test]
    fn bass_examples() {
        assert_eq!(bass_note(&chord("C", ChordQuality::Major)), p(48));
        assert_eq!(bass_note(&chord("G", ChordQuality::Major)), p(55));
        assert_eq!(bass_note(&chord("B", ChordQuality::Diminished)), p(59));
    }

    #[test]
    fn forced_motives() {
        let c = chord("C", ChordQuality::Major);
        let s = Scale::new("C".parse().unwrap(), ScaleMode::Major);
        let r = reg(48, 84);
        let mut rng = substream(0, "t");
        assert_eq!(apply_motive(p(64), Motive::StepDown, &c, &s, &r, &mut rng), (p(62), Motive::StepDown));
        assert_eq!(apply_motive(p(64), Motive::StepUp, &c, &s, &r, &mut rng), (p(65), Motive::StepUp));
        assert_eq!(apply_motive(p(64), Motive::Hold, &c, &s, &r, &mut rng), (p(64), Motive::Hold));
        for _ in 0..1000 {
            let (out, m) = apply_motive(p(64), Motive::ChordTone, &c, &s, &r, &mut rng);
            assert_eq!(m, Motive::ChordTone);
            assert!(c.contains(out.class()));
            assert!(r.contains(out));
        }
    }

    #[test]
    fn step_at_register_edge_turns_around() {
        let c = chord("C", ChordQuality::Major);
        let s = Scale::new("C".parse().unwrap(), ScaleMode::Major);
        let r = reg(60, 72);
        let mut rng = substream(0, "t");
        assert_eq!(apply_motive(p(72), Motive::StepUp, &c, &s, &r, &mut rng), (p(71), Motive::StepDown));
        assert_eq!(apply_motive(p(60), Motive::StepDown, &c, &s, &r, &mut rng), (p(62), Motive::StepUp));
        // out-of-register previous pitch is folded before moving
        assert_eq!(apply_motive(p(88), Motive::StepDown, &c, &s, &r, &mut rng), (p(62), Motive::StepDown));
        // nothing fits either way
        let tiny = reg(60, 61);
        assert_eq!(apply_motive(p(60), Motive::StepUp, &c, &s, &tiny, &mut rng), (p(60), Motive::Hold));
    }

    #[test]
    fn soprano_examples() {
        let c = chord("C", ChordQuality::Major);
        let mut rng = substream(5, "s");
        assert!(soprano_pitches(&c, 0, &reg(60, 96), &mut rng).is_empty());
        let out = soprano_pitches(&c, 1000, &reg(60, 96), &mut rng);
        assert_eq!(out.len(), 1000);
        assert!(out.iter().all(|x| c.contains(x.class()) && (60..=96).contains(&x.midi())));
        assert!(soprano_pitches(&c, 20, &reg(64, 64), &mut rng).iter().all(|&x| x == p(64)));
    }

    #[test]
    fn shipped_motives_favor_steps_at_high_arousal() {
        let m = MotiveMatrices::shipped();
        for row in Motive::ALL {
            assert!(m.upper.step_mass(row) >= m.lower.step_mass(row), "{row:?}");
        }
    }

    #[test]
    fn motive_matrix_rejects_bad_rows() {
        let bad = SHIPPED_MOTIVES.replacen("[0.30, 0.15, 0.25, 0.30]", "[0.30, 0.15, 0.25, 0.20]", 1);
        assert!(matches!(MotiveMatrices::load(&bad), Err(MotiveError::Row { .. })));
        let neg = SHIPPED_MOTIVES.replacen("[0.30, 0.15, 0.25, 0.30]", "[0.40, -0.05, 0.35, 0.30]", 1);
        assert!(matches!(MotiveMatrices::load(&neg), Err(MotiveError::Row { .. })));
        assert!(matches!(MotiveMatrices::load("x = 1"), Err(MotiveError::Parse(_))));
    }

    #[test]
    fn instrument_mapping_is_fixed() {
        assert_eq!(Voice::Bass.instrument(), Instrument::Strings);
        assert_eq!(Voice::Tenor.instrument(), Instrument::Piano);
        assert_eq!(Voice::Alto.instrument(), Instrument::Piano);
        assert_eq!(Voice::Soprano.instrument(), Instrument::Clarinet);
        let chans: Vec<u8> = Instrument::ALL.iter().map(|i| i.channel()).collect();
        assert_eq!(chans, vec![0, 1, 2, 3]);
        let progs: Vec<u8> = Instrument::ALL.iter().map(|i| i.gm_program()).collect();
        assert_eq!(progs, vec![0, 48, 71, 12]);
    }
}
