//! Scalar parameter mappings: tempo, rhythm patterns, rhythmic roughness,
//! velocity, pitch register and marimba doubling.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{ArousalRhythmRegion, ValenceRegion};
use crate::theory::{note_name_to_midi, Register};

pub const SUBDIVISIONS: usize = 8;

pub const MIN_TEMPO_BPM: f64 = 60.0;
pub const MAX_TEMPO_BPM: f64 = 200.0;
pub const ROUGHNESS_FLOOR: f64 = 0.3;
pub const MARIMBA_VALENCE_THRESHOLD: f64 = 0.8;
/// Largest allowed change of the base velocity from one bar to the next.
pub const VELOCITY_BAR_CAP: i32 = 15;
/// Per-note velocity jitter around the bar's base velocity.
pub const VELOCITY_NOTE_JITTER: i32 = 5;

pub const SHIPPED_LICKS: &str = include_str!("../fixtures/licks.toml");
pub const SHIPPED_REGISTERS: &str = include_str!("../fixtures/registers.toml");

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{what} document does not parse: {message}")]
    Parse { what: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub fn tempo_bpm(arousal: f64) -> f64 {
    MIN_TEMPO_BPM + (MAX_TEMPO_BPM - MIN_TEMPO_BPM) * arousal
}

/// One 4/4 bar as eight eighth-note subdivisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RhythmPattern([bool; SUBDIVISIONS]);

impl RhythmPattern {
    pub fn new(onsets: [bool; SUBDIVISIONS]) -> Self {
        Self(onsets)
    }

    pub fn downbeat() -> Self {
        let mut p = [false; SUBDIVISIONS];
        p[0] = true;
        Self(p)
    }

    pub fn slots(&self) -> &[bool; SUBDIVISIONS] {
        &self.0
    }

    pub fn onset_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// 1-based subdivisions carrying an onset.
    pub fn onsets(&self) -> Vec<u8> {
        (1..=SUBDIVISIONS as u8).filter(|&s| self.0[s as usize - 1]).collect()
    }

    /// (onset, duration) pairs in subdivisions; each note sustains until the
    /// next onset or the end of the bar.
    pub fn legato_notes(&self) -> Vec<(u8, u8)> {
        let onsets = self.onsets();
        onsets
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let end = onsets.get(i + 1).copied().unwrap_or(SUBDIVISIONS as u8 + 1);
                (s, end - s)
            })
            .collect()
    }
}

impl fmt::Display for RhythmPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "x" } else { "." })?;
        }
        Ok(())
    }
}

impl FromStr for RhythmPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.chars().count() != SUBDIVISIONS {
            return Err(format!("pattern '{s}' must have exactly {SUBDIVISIONS} slots"));
        }
        let mut out = [false; SUBDIVISIONS];
        for (slot, c) in out.iter_mut().zip(s.chars()) {
            *slot = match c {
                'x' | 'X' | '1' => true,
                '.' | '0' => false,
                other => return Err(format!("pattern '{s}': unexpected character '{other}'")),
            };
        }
        Ok(Self(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LickBank {
    licks: [[RhythmPattern; 2]; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLicks {
    format: String,
    low: Vec<String>,
    moderate: Vec<String>,
    high: Vec<String>,
}

fn region_slot(region: ArousalRhythmRegion) -> usize {
    match region {
        ArousalRhythmRegion::Low => 0,
        ArousalRhythmRegion::Moderate => 1,
        ArousalRhythmRegion::High => 2,
    }
}

impl LickBank {
    pub fn new(licks: [[RhythmPattern; 2]; 3]) -> Result<Self, FixtureError> {
        for region in ArousalRhythmRegion::ALL {
            let [a, b] = licks[region_slot(region)];
            if a == b {
                return Err(FixtureError::Invalid(format!(
                    "licks for {region:?} arousal must be distinct (both are {a})"
                )));
            }
        }
        Ok(Self { licks })
    }

    /// TOML document with `low`, `moderate`, `high` arrays of exactly two
    /// patterns written as 8-character strings (`x` onset, `.` rest).
    pub fn load(document: &str) -> Result<Self, FixtureError> {
        let raw: RawLicks = toml::from_str(document).map_err(|e| FixtureError::Parse {
            what: "lick bank",
            message: e.to_string(),
        })?;
        if raw.format != "licks/1" {
            return Err(FixtureError::Invalid(format!("unsupported lick format '{}'", raw.format)));
        }
        let parse = |name: &str, v: &[String]| -> Result<[RhythmPattern; 2], FixtureError> {
            let pats: Vec<RhythmPattern> = v
                .iter()
                .map(|s| s.parse().map_err(FixtureError::Invalid))
                .collect::<Result<_, _>>()?;
            pats.try_into()
                .map_err(|p: Vec<_>| FixtureError::Invalid(format!("{name}: expected 2 licks, found {}", p.len())))
        };
        Self::new([
            parse("low", &raw.low)?,
            parse("moderate", &raw.moderate)?,
            parse("high", &raw.high)?,
        ])
    }

    pub fn shipped() -> Self {
        Self::load(SHIPPED_LICKS).expect("shipped lick bank is valid")
    }

    pub fn licks(&self, region: ArousalRhythmRegion) -> &[RhythmPattern; 2] {
        &self.licks[region_slot(region)]
    }
}

/// One of the region's two licks with equal probability.
pub fn soprano_pattern<R: Rng + ?Sized>(
    region: ArousalRhythmRegion,
    bank: &LickBank,
    rng: &mut R,
) -> RhythmPattern {
    bank.licks(region)[rng.random_range(0..2)]
}

pub fn roughness(arousal: f64) -> f64 {
    (1.0 - arousal).max(ROUGHNESS_FLOOR)
}

pub fn alto_onset_count(roughness: f64) -> usize {
    ((SUBDIVISIONS as f64 * (1.0 - roughness)).round() as i64).clamp(1, SUBDIVISIONS as i64) as usize
}

/// Note-density pattern: subdivision 1 always sounds, the remaining onsets
/// are spread uniformly without replacement over subdivisions 2-8.
pub fn alto_pattern<R: Rng + ?Sized>(roughness: f64, rng: &mut R) -> RhythmPattern {
    let n = alto_onset_count(roughness);
    let mut slots = [false; SUBDIVISIONS];
    slots[0] = true;
    for i in index::sample(rng, SUBDIVISIONS - 1, n - 1) {
        slots[i + 1] = true;
    }
    RhythmPattern(slots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VelocityRange {
    pub lo: u8,
    pub hi: u8,
}

impl VelocityRange {
    pub fn contains(&self, v: u8) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

/// `[40, 70]` at arousal 0 rising linearly to `[85, 115]` at arousal 1.
pub fn velocity_range(arousal: f64) -> VelocityRange {
    VelocityRange {
        lo: (40.0 + 45.0 * arousal).round() as u8,
        hi: (70.0 + 45.0 * arousal).round() as u8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarVelocity {
    pub value: u8,
    /// The inter-bar cap pushed the value outside the current range.
    pub range_conflict: bool,
}

/// Uniform draw over the range, then limited to within
/// [`VELOCITY_BAR_CAP`] of the previous bar. The cap wins over the range.
pub fn bar_velocity<R: Rng + ?Sized>(range: VelocityRange, prev: Option<u8>, rng: &mut R) -> BarVelocity {
    let drawn = rng.random_range(range.lo..=range.hi) as i32;
    let value = match prev {
        Some(p) => drawn.clamp(p as i32 - VELOCITY_BAR_CAP, p as i32 + VELOCITY_BAR_CAP),
        None => drawn,
    }
    .clamp(1, 127) as u8;
    BarVelocity {
        value,
        range_conflict: !range.contains(value),
    }
}

/// Per-note velocity around the bar base, clipped to `1..=127`.
pub fn note_velocity<R: Rng + ?Sized>(base: u8, rng: &mut R) -> u8 {
    let j = rng.random_range(-VELOCITY_NOTE_JITTER..=VELOCITY_NOTE_JITTER);
    (base as i32 + j).clamp(1, 127) as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisterTable {
    rows: [Register; ValenceRegion::COUNT],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegisters {
    format: String,
    rows: Vec<[String; 2]>,
}

impl RegisterTable {
    pub fn new(rows: [Register; ValenceRegion::COUNT]) -> Result<Self, FixtureError> {
        let c1 = note_name_to_midi("C1").unwrap();
        let c5 = note_name_to_midi("C5").unwrap();
        let g3 = note_name_to_midi("G3").unwrap();
        let c6 = note_name_to_midi("C6").unwrap();
        for (i, r) in rows.iter().enumerate() {
            if r.low >= r.high {
                return Err(FixtureError::Invalid(format!("register row {i}: low {} >= high {}", r.low, r.high)));
            }
        }
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].low < w[0].low || w[1].high < w[0].high {
                return Err(FixtureError::Invalid(format!(
                    "register rows {i}-{}: bounds must not decrease ({} then {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        if (rows[0].low, rows[0].high) != (c1, c5) {
            return Err(FixtureError::Invalid(format!("register row 0 must be [C1, C5], found {}", rows[0])));
        }
        if (rows[9].low, rows[9].high) != (g3, c6) {
            return Err(FixtureError::Invalid(format!("register row 9 must be [G3, C6], found {}", rows[9])));
        }
        Ok(Self { rows })
    }

    /// TOML document with `rows`: ten `[low, high]` note-name pairs.
    pub fn load(document: &str) -> Result<Self, FixtureError> {
        let raw: RawRegisters = toml::from_str(document).map_err(|e| FixtureError::Parse {
            what: "register table",
            message: e.to_string(),
        })?;
        if raw.format != "registers/1" {
            return Err(FixtureError::Invalid(format!("unsupported register format '{}'", raw.format)));
        }
        let rows: Vec<Register> = raw
            .rows
            .iter()
            .enumerate()
            .map(|(i, [lo, hi])| {
                let parse = |s: &str| note_name_to_midi(s).map_err(|e| FixtureError::Invalid(format!("register row {i}: {e}")));
                Ok(Register { low: parse(lo)?, high: parse(hi)? })
            })
            .collect::<Result<_, FixtureError>>()?;
        let rows: [Register; ValenceRegion::COUNT] = rows
            .try_into()
            .map_err(|r: Vec<_>| FixtureError::Invalid(format!("expected 10 register rows, found {}", r.len())))?;
        Self::new(rows)
    }

    pub fn shipped() -> Self {
        Self::load(SHIPPED_REGISTERS).expect("shipped register table is valid")
    }

    pub fn rows(&self) -> &[Register; ValenceRegion::COUNT] {
        &self.rows
    }
}

pub fn register_bounds(region: ValenceRegion, table: &RegisterTable) -> Register {
    table.rows[region.index()]
}

pub fn marimba_doubles(valence: f64) -> bool {
    valence > MARIMBA_VALENCE_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn tempo_examples() {
        assert_eq!(tempo_bpm(0.0), 60.0);
        assert_eq!(tempo_bpm(1.0), 200.0);
        assert_eq!(tempo_bpm(0.5), 130.0);
    }

    #[test]
    fn velocity_range_examples() {
        assert_eq!(velocity_range(0.0), VelocityRange { lo: 40, hi: 70 });
        assert_eq!(velocity_range(1.0), VelocityRange { lo: 85, hi: 115 });
        assert_eq!(velocity_range(0.5), VelocityRange { lo: 63, hi: 93 });
    }

    #[test]
    fn bar_velocity_in_range_without_prev() {
        let mut rng = substream(1, "v");
        for _ in 0..1000 {
            let v = bar_velocity(velocity_range(0.0), None, &mut rng);
            assert!((40..=70).contains(&v.value));
            assert!(!v.range_conflict);
        }
    }

    #[test]
    fn cap_beats_range() {
        let mut rng = substream(1, "v");
        for _ in 0..100 {
            let v = bar_velocity(VelocityRange { lo: 85, hi: 115 }, Some(50), &mut rng);
            assert_eq!(v.value, 65);
            assert!(v.range_conflict);
        }
    }

    #[test]
    fn bar_velocity_uniformity() {
        let mut rng = substream(99, "v");
        let draws: Vec<u8> = (0..10_000)
            .map(|_| bar_velocity(VelocityRange { lo: 40, hi: 70 }, None, &mut rng).value)
            .collect();
        assert_eq!(*draws.iter().min().unwrap(), 40);
        assert_eq!(*draws.iter().max().unwrap(), 70);
        let mean = draws.iter().map(|&v| v as f64).sum::<f64>() / draws.len() as f64;
        assert!((mean - 55.0).abs() <= 1.0, "mean {mean}");
    }

    #[test]
    fn note_velocity_bounds() {
        let mut rng = substream(3, "j");
        for _ in 0..1000 {
            let v = note_velocity(60, &mut rng);
            assert!((55..=65).contains(&v));
            assert!((1..=6).contains(&note_velocity(1, &mut rng)));
            assert!((122..=127).contains(&note_velocity(127, &mut rng)));
        }
    }

    #[test]
    fn roughness_examples() {
        assert_eq!(roughness(1.0), 0.3);
        assert_eq!(roughness(0.0), 1.0);
        assert_eq!(roughness(0.5), 0.5);
    }

    #[test]
    fn alto_pattern_examples() {
        let mut rng = substream(4, "a");
        let full = alto_pattern(0.0, &mut rng);
        assert_eq!(full.onset_count(), 8);
        let one = alto_pattern(1.0, &mut rng);
        assert_eq!(one.onsets(), vec![1]);
        for _ in 0..200 {
            let p = alto_pattern(0.3, &mut rng);
            assert_eq!(p.onset_count(), 6);
            assert!(p.slots()[0]);
        }
    }

    #[test]
    fn alto_density_monotone_in_arousal() {
        let mut prev = 0;
        for i in 0..=1000 {
            let n = alto_onset_count(roughness(i as f64 / 1000.0));
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn legato_durations_fill_bar() {
        let p: RhythmPattern = "x.xx..x.".parse().unwrap();
        assert_eq!(p.legato_notes(), vec![(1, 2), (3, 1), (4, 3), (7, 2)]);
        assert_eq!(RhythmPattern::downbeat().legato_notes(), vec![(1, 8)]);
    }

    #[test]
    fn lick_bank_loading() {
        let bank = LickBank::shipped();
        let max_low = bank.licks(ArousalRhythmRegion::Low).iter().map(|p| p.onset_count()).max().unwrap();
        let min_mod = bank.licks(ArousalRhythmRegion::Moderate).iter().map(|p| p.onset_count()).min().unwrap();
        let max_mod = bank.licks(ArousalRhythmRegion::Moderate).iter().map(|p| p.onset_count()).max().unwrap();
        let min_high = bank.licks(ArousalRhythmRegion::High).iter().map(|p| p.onset_count()).min().unwrap();
        assert!(min_mod >= max_low && min_high >= max_mod);

        let dup = SHIPPED_LICKS.replace(r#"["x...x...", "x.....x."]"#, r#"["x...x...", "x...x..."]"#);
        assert!(matches!(LickBank::load(&dup), Err(FixtureError::Invalid(_))));
        let three = SHIPPED_LICKS.replace(r#"["x...x...", "x.....x."]"#, r#"["x...x...", "x.....x.", "x......."]"#);
        assert!(LickBank::load(&three).is_err());
        let short = SHIPPED_LICKS.replace("x.....x.", "x.....x");
        assert!(LickBank::load(&short).is_err());
    }

    #[test]
    fn lick_choice_is_fair() {
        let bank = LickBank::shipped();
        let mut rng = substream(11, "lick");
        let first = bank.licks(ArousalRhythmRegion::Low)[0];
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| soprano_pattern(ArousalRhythmRegion::Low, &bank, &mut rng) == first)
            .count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.5).abs() <= 0.02, "{f}");
    }

    #[test]
    fn register_table() {
        let t = RegisterTable::shipped();
        let r0 = register_bounds(ValenceRegion::new(0).unwrap(), &t);
        let r9 = register_bounds(ValenceRegion::new(9).unwrap(), &t);
        assert_eq!((r0.low.midi(), r0.high.midi()), (24, 72));
        assert_eq!((r9.low.midi(), r9.high.midi()), (55, 84));
        // rows 1-8: linear interpolation between the endpoints, rounded
        for (i, r) in t.rows().iter().enumerate() {
            let lo = (24.0 + 31.0 * i as f64 / 9.0).round() as u8;
            let hi = (72.0 + 12.0 * i as f64 / 9.0).round() as u8;
            assert_eq!((r.low.midi(), r.high.midi()), (lo, hi), "row {i}");
        }
    }

    #[test]
    fn register_table_rejects_bad_rows() {
        let dec = SHIPPED_REGISTERS.replace(r#"["F2", "G5"]"#, r#"["C2", "G5"]"#);
        assert!(RegisterTable::load(&dec).is_err());
        let end = SHIPPED_REGISTERS.replace(r#"["G3", "C6"]"#, r#"["G3", "D6"]"#);
        assert!(RegisterTable::load(&end).is_err());
        let bad = SHIPPED_REGISTERS.replace(r#"["F2", "G5"]"#, r#"["F2", "Q5"]"#);
        assert!(RegisterTable::load(&bad).is_err());
    }

    #[test]
    fn marimba_threshold_is_strict() {
        assert!(marimba_doubles(0.85));
        assert!(!marimba_doubles(0.8));
        assert!(!marimba_doubles(0.0));
    }
}
