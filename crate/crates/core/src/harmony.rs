//! The 8-bar theme and its per-valence chord progression matrix.
//!
//! Each of the ten valence regions declares a key and, for every theme bar, a
//! cell of weighted chord alternatives. The theme fixes the harmonic function
//! of every bar; regions only substitute chords within that function. Bar 7
//! must be dominant or subdominant and bar 8 the tonic, so each pass through
//! the theme closes with a cadence.
//!
//! # File format
//!
//! A UTF-8 TOML document:
//!
//! ```toml
//! format = "chord-matrix/1"
//! theme = ["T", "S", "D", "T", "S", "S", "D", "T"]
//!
//! [[region]]
//! index = 0
//! key = "C harmonic_minor"
//! bars = [
//!   ["i minor C 0.6", "i7 minor7 C 0.4"],
//!   # ... eight bars in total
//! ]
//! ```
//!
//! Every entry is `<function_label> <quality> <root> <probability>` separated
//! by ASCII whitespace. `quality` is one of `major minor diminished augmented
//! dominant7 major7 minor7 half_diminished7`; `root` is a pitch class such as
//! `Ab` or `F#`. The `theme` symbols are `T`, `S` and `D`. Exactly ten regions
//! (indices 0-9) with exactly eight bars each are required.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::affect::ValenceRegion;
use crate::theory::{harmonic_function, is_tonic_chord, Chord, HarmonicFunction, Scale, ScaleMode};

pub const THEME_BARS: usize = 8;
pub const MAX_ALTERNATIVES: usize = 5;
pub const MIN_PROBABILITY: f64 = 0.1;
pub const MAX_PROBABILITY: f64 = 0.8;
const SUM_TOLERANCE: f64 = 1e-9;

pub const SHIPPED_MATRIX: &str = include_str!("../fixtures/chord_matrix.toml");

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix document does not parse: {0}")]
    Parse(String),
    #[error("matrix structure: {0}")]
    Structure(String),
    #[error("matrix violates {n} constraint(s):\n{0}", n = .0.len())]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordCell {
    pub alternatives: Vec<(Chord, f64)>,
}

impl ChordCell {
    pub fn new(alternatives: Vec<(Chord, f64)>) -> Self {
        Self { alternatives }
    }

    pub fn single(chord: Chord) -> Self {
        Self::new(vec![(chord, 1.0)])
    }

    pub fn probability_sum(&self) -> f64 {
        self.alternatives.iter().map(|(_, p)| p).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionProgression {
    pub key: Scale,
    pub bars: Vec<ChordCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordProgressionMatrix {
    theme: [HarmonicFunction; THEME_BARS],
    regions: Vec<RegionProgression>,
}

impl ChordProgressionMatrix {
    /// Assembles a matrix without checking the musical constraints; see
    /// [`validate_matrix`].
    pub fn from_parts(
        theme: [HarmonicFunction; THEME_BARS],
        regions: Vec<RegionProgression>,
    ) -> Result<Self, MatrixError> {
        if regions.len() != ValenceRegion::COUNT {
            return Err(MatrixError::Structure(format!(
                "expected {} regions, found {}",
                ValenceRegion::COUNT,
                regions.len()
            )));
        }
        if let Some((i, r)) = regions.iter().enumerate().find(|(_, r)| r.bars.len() != THEME_BARS) {
            return Err(MatrixError::Structure(format!(
                "region {i} has {} bars, expected {THEME_BARS}",
                r.bars.len()
            )));
        }
        Ok(Self { theme, regions })
    }

    pub fn shipped() -> Self {
        load_matrix(SHIPPED_MATRIX.as_bytes()).expect("shipped chord matrix is valid")
    }

    pub fn theme(&self) -> &[HarmonicFunction; THEME_BARS] {
        &self.theme
    }

    pub fn region(&self, region: ValenceRegion) -> &RegionProgression {
        &self.regions[region.index()]
    }

    pub fn regions(&self) -> &[RegionProgression] {
        &self.regions
    }

    pub fn regions_mut(&mut self) -> &mut [RegionProgression] {
        &mut self.regions
    }

    pub fn key(&self, region: ValenceRegion) -> Scale {
        self.regions[region.index()].key
    }

    /// `bar` is 1-based.
    pub fn cell(&self, region: ValenceRegion, bar: u8) -> &ChordCell {
        &self.regions[region.index()].bars[bar as usize - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    EmptyCell,
    CellTooLarge(usize),
    ProbabilitySum(f64),
    ProbabilityRange(f64),
    SingleNotCertain(f64),
    UnknownFunction(String),
    FunctionMismatch {
        label: String,
        expected: HarmonicFunction,
        found: HarmonicFunction,
    },
    CadenceNotTonic(String),
    CadenceApproach(String),
    KeyNotMajor(Scale),
    NotDiatonic(String),
    TooFewDarkBars(usize),
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyCell => write!(f, "cell is empty"),
            Self::CellTooLarge(n) => write!(f, "cell size > {MAX_ALTERNATIVES} ({n} alternatives)"),
            Self::ProbabilitySum(s) => write!(f, "probabilities sum to {}", round6(*s)),
            Self::ProbabilityRange(p) => write!(
                f,
                "probability {} outside [{MIN_PROBABILITY}, {MAX_PROBABILITY}]",
                round6(*p)
            ),
            Self::SingleNotCertain(p) => {
                write!(f, "single alternative must have probability 1.0 (has {})", round6(*p))
            }
            Self::UnknownFunction(l) => write!(f, "label '{l}' is not a roman numeral"),
            Self::FunctionMismatch {
                label,
                expected,
                found,
            } => write!(
                f,
                "'{label}' has function {} but the theme requires {}",
                found.symbol(),
                expected.symbol()
            ),
            Self::CadenceNotTonic(l) => write!(f, "cadence: bar 8 allows only the tonic chord, found '{l}'"),
            Self::CadenceApproach(l) => write!(
                f,
                "cadence: bar 7 allows only dominant or subdominant chords, found '{l}'"
            ),
            Self::KeyNotMajor(k) => write!(f, "key {k} must be a major key in regions 7-9"),
            Self::NotDiatonic(c) => write!(f, "chord {c} is not drawn from the major mode of the key"),
            Self::TooFewDarkBars(n) => write!(
                f,
                "only {n} of 8 bars offer a minor or diminished chord (at least 4 required)"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub region: Option<usize>,
    pub bar: Option<u8>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.region, self.bar) {
            (Some(r), Some(b)) => write!(f, "region {r} bar {b}: {}", self.kind),
            (Some(r), None) => write!(f, "region {r}: {}", self.kind),
            _ => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    fn push(&mut self, region: usize, bar: Option<u8>, kind: ViolationKind) {
        self.violations.push(Violation {
            region: Some(region),
            bar,
            kind,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

fn validate_cell(report: &mut ValidationReport, region: usize, bar: u8, cell: &ChordCell) {
    let n = cell.alternatives.len();
    if n == 0 {
        report.push(region, Some(bar), ViolationKind::EmptyCell);
        return;
    }
    if n > MAX_ALTERNATIVES {
        report.push(region, Some(bar), ViolationKind::CellTooLarge(n));
    }
    let sum = cell.probability_sum();
    if !((sum - 1.0).abs() <= SUM_TOLERANCE) {
        report.push(region, Some(bar), ViolationKind::ProbabilitySum(sum));
    }
    if n == 1 {
        let p = cell.alternatives[0].1;
        if !((p - 1.0).abs() <= SUM_TOLERANCE) {
            report.push(region, Some(bar), ViolationKind::SingleNotCertain(p));
        }
    } else {
        for &(_, p) in &cell.alternatives {
            if !(MIN_PROBABILITY..=MAX_PROBABILITY).contains(&p) {
                report.push(region, Some(bar), ViolationKind::ProbabilityRange(p));
            }
        }
    }
}

pub fn validate_matrix(m: &ChordProgressionMatrix) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (r, region) in m.regions.iter().enumerate() {
        let mut dark_bars = 0;
        for (b, cell) in region.bars.iter().enumerate() {
            let bar = b as u8 + 1;
            validate_cell(&mut report, r, bar, cell);
            let expected = m.theme[b];
            for (chord, _) in &cell.alternatives {
                match harmonic_function(&chord.label) {
                    None => report.push(r, Some(bar), ViolationKind::UnknownFunction(chord.label.clone())),
                    Some(found) if found != expected => report.push(
                        r,
                        Some(bar),
                        ViolationKind::FunctionMismatch {
                            label: chord.label.clone(),
                            expected,
                            found,
                        },
                    ),
                    Some(_) => {}
                }
                if bar == 8 && !is_tonic_chord(&chord.label) {
                    report.push(r, Some(bar), ViolationKind::CadenceNotTonic(chord.label.clone()));
                }
                if bar == 7
                    && !matches!(
                        harmonic_function(&chord.label),
                        Some(HarmonicFunction::Dominant | HarmonicFunction::Subdominant)
                    )
                {
                    report.push(r, Some(bar), ViolationKind::CadenceApproach(chord.label.clone()));
                }
                if r >= 7 {
                    let major = region.key.parallel_major();
                    if !chord.tones().iter().all(|&pc| major.contains(pc)) {
                        report.push(r, Some(bar), ViolationKind::NotDiatonic(chord.to_string()));
                    }
                }
            }
            if cell.alternatives.iter().any(|(c, _)| c.quality.is_minor_family()) {
                dark_bars += 1;
            }
        }
        if r >= 7 && region.key.mode != ScaleMode::Major {
            report.push(r, None, ViolationKind::KeyNotMajor(region.key));
        }
        if r <= 2 && dark_bars < 4 {
            report.push(r, None, ViolationKind::TooFewDarkBars(dark_bars));
        }
    }
    report
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    format: String,
    theme: Vec<String>,
    region: Vec<RawRegion>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    index: usize,
    key: String,
    bars: Vec<Vec<String>>,
}

fn parse_entry(entry: &str) -> Result<(Chord, f64), String> {
    let fields: Vec<&str> = entry.split_ascii_whitespace().collect();
    let [label, quality, root, prob] = fields[..] else {
        return Err(format!(
            "entry '{entry}' must have 4 fields: function_label quality root probability"
        ));
    };
    let quality = quality.parse().map_err(|e| format!("entry '{entry}': {e}"))?;
    let root = root.parse().map_err(|e| format!("entry '{entry}': {e}"))?;
    let prob: f64 = prob
        .parse()
        .map_err(|_| format!("entry '{entry}': bad probability '{prob}'"))?;
    Ok((Chord::new(root, quality, label), prob))
}

/// Parses and validates a matrix document.
pub fn load_matrix(document: &[u8]) -> Result<ChordProgressionMatrix, MatrixError> {
    let text = std::str::from_utf8(document).map_err(|e| MatrixError::Parse(e.to_string()))?;
    let raw: RawMatrix = toml::from_str(text).map_err(|e| MatrixError::Parse(e.to_string()))?;
    if raw.format != "chord-matrix/1" {
        return Err(MatrixError::Parse(format!("unsupported format '{}'", raw.format)));
    }
    let theme: Vec<HarmonicFunction> = raw
        .theme
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .map_err(MatrixError::Parse)?;
    let theme: [HarmonicFunction; THEME_BARS] = theme
        .try_into()
        .map_err(|v: Vec<_>| MatrixError::Structure(format!("theme has {} bars, expected 8", v.len())))?;

    let mut slots: Vec<Option<RegionProgression>> = vec![None; ValenceRegion::COUNT];
    for r in raw.region {
        let slot = slots
            .get_mut(r.index)
            .ok_or_else(|| MatrixError::Structure(format!("region index {} out of range 0-9", r.index)))?;
        if slot.is_some() {
            return Err(MatrixError::Structure(format!("region {} declared twice", r.index)));
        }
        let key: Scale = r
            .key
            .parse()
            .map_err(|e| MatrixError::Parse(format!("region {} key: {e}", r.index)))?;
        let bars = r
            .bars
            .iter()
            .enumerate()
            .map(|(b, entries)| {
                entries
                    .iter()
                    .map(|e| parse_entry(e))
                    .collect::<Result<Vec<_>, _>>()
                    .map(ChordCell::new)
                    .map_err(|e| MatrixError::Parse(format!("region {} bar {}: {e}", r.index, b + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        *slot = Some(RegionProgression { key, bars });
    }
    let regions = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| MatrixError::Structure(format!("region {i} missing"))))
        .collect::<Result<Vec<_>, _>>()?;
    let matrix = ChordProgressionMatrix::from_parts(theme, regions)?;
    let report = validate_matrix(&matrix);
    if report.is_empty() {
        Ok(matrix)
    } else {
        Err(MatrixError::Invalid(report))
    }
}

/// Samples one alternative of the cell at (`region`, `bar`); `bar` is 1-based.
pub fn select_chord<'m, R: Rng + ?Sized>(
    m: &'m ChordProgressionMatrix,
    region: ValenceRegion,
    bar: u8,
    rng: &mut R,
) -> &'m Chord {
    let cell = m.cell(region, bar);
    if cell.alternatives.len() == 1 {
        return &cell.alternatives[0].0;
    }
    let dist = WeightedIndex::new(cell.alternatives.iter().map(|(_, p)| *p))
        .expect("validated cell has positive weights");
    &cell.alternatives[dist.sample(rng)].0
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicState {
    pub theme_bar: u8,
    pub iteration: u64,
    pub current_chord: Option<Chord>,
}

impl Default for HarmonicState {
    fn default() -> Self {
        Self {
            theme_bar: 1,
            iteration: 0,
            current_chord: None,
        }
    }
}

pub fn advance(state: &HarmonicState) -> HarmonicState {
    let (theme_bar, iteration) = if state.theme_bar as usize >= THEME_BARS {
        (1, state.iteration + 1)
    } else {
        (state.theme_bar + 1, state.iteration)
    };
    HarmonicState {
        theme_bar,
        iteration,
        current_chord: state.current_chord.clone(),
    }
}

/// Expected share of minor/diminished-family chords in a region, averaged
/// over the theme bars.
pub fn expected_dark_share(m: &ChordProgressionMatrix, region: ValenceRegion) -> f64 {
    let bars = &m.region(region).bars;
    bars.iter()
        .map(|cell| {
            cell.alternatives
                .iter()
                .filter(|(c, _)| c.quality.is_minor_family())
                .map(|(_, p)| p)
                .sum::<f64>()
        })
        .sum::<f64>()
        / bars.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::theory::{ChordQuality, PitchClass};

    fn region(i: u8) -> ValenceRegion {
        ValenceRegion::new(i).unwrap()
    }

    fn chord(label: &str, q: ChordQuality, root: &str) -> Chord {
        Chord::new(root.parse::<PitchClass>().unwrap(), q, label)
    }

    #[test]
    fn shipped_matrix_loads_with_80_cells() {
        let m = ChordProgressionMatrix::shipped();
        assert_eq!(m.regions().len(), 10);
        assert_eq!(m.regions().iter().map(|r| r.bars.len()).sum::<usize>(), 80);
        assert!(validate_matrix(&m).is_empty());
    }

    fn replace_cell(text: &str, region_idx: usize, bar_line: &str, replacement: &str) -> String {
        // region blocks are separated by [[region]]; swap one bar line inside one region
        let mut parts: Vec<String> = text.split("[[region]]").map(String::from).collect();
        let block = &mut parts[region_idx + 1];
        assert!(block.contains(bar_line), "fixture line not found: {bar_line}");
        *block = block.replacen(bar_line, replacement, 1);
        parts.join("[[region]]")
    }

    #[test]
    fn bad_sum_reported() {
        let doc = replace_cell(
            SHIPPED_MATRIX,
            0,
            r#"["i minor C 0.6", "i7 minor7 C 0.4"]"#,
            r#"["i minor C 0.5", "i7 minor7 C 0.4"]"#,
        );
        let Err(MatrixError::Invalid(report)) = load_matrix(doc.as_bytes()) else {
            panic!("expected validation failure");
        };
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].region, Some(0));
        assert_eq!(report.violations[0].bar, Some(1));
        assert!(report.to_string().contains("probabilities sum to 0.9"), "{report}");
    }

    #[test]
    fn oversized_cell_reported() {
        let doc = replace_cell(
            SHIPPED_MATRIX,
            0,
            r#"["i minor C 0.6", "i7 minor7 C 0.4"]"#,
            r#"["i minor C 0.2", "i7 minor7 C 0.2", "i minor C 0.2", "i minor C 0.2", "i minor C 0.1", "i minor C 0.1"]"#,
        );
        let Err(MatrixError::Invalid(report)) = load_matrix(doc.as_bytes()) else {
            panic!("expected validation failure");
        };
        assert!(report.to_string().contains("cell size > 5"), "{report}");
    }

    #[test]
    fn non_tonic_final_bar_is_cadence_violation() {
        let mut m = ChordProgressionMatrix::shipped();
        m.regions_mut()[4].bars[7] = ChordCell::single(chord("V", ChordQuality::Major, "G"));
        let report = validate_matrix(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| v.bar == Some(8) && matches!(v.kind, ViolationKind::CadenceNotTonic(_))));
    }

    #[test]
    fn low_probability_in_three_chord_cell() {
        let mut m = ChordProgressionMatrix::shipped();
        m.regions_mut()[2].bars[1] = ChordCell::new(vec![
            (chord("iv", ChordQuality::Minor, "F"), 0.55),
            (chord("IV", ChordQuality::Major, "F"), 0.4),
            (chord("ii°", ChordQuality::Diminished, "D"), 0.05),
        ]);
        let report = validate_matrix(&m);
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::ProbabilityRange(0.05));
    }

    #[test]
    fn tonic_in_approach_bar_rejected() {
        let mut m = ChordProgressionMatrix::shipped();
        m.regions_mut()[6].bars[6] = ChordCell::single(chord("I", ChordQuality::Major, "C"));
        let report = validate_matrix(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::CadenceApproach(_))));
    }

    #[test]
    fn upper_regions_must_be_diatonic_major() {
        let mut m = ChordProgressionMatrix::shipped();
        m.regions_mut()[8].bars[1] = ChordCell::single(chord("iv", ChordQuality::Minor, "F"));
        let report = validate_matrix(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::NotDiatonic(_))));
        let mut m = ChordProgressionMatrix::shipped();
        m.regions_mut()[9].key = "C harmonic_minor".parse().unwrap();
        assert!(validate_matrix(&m)
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::KeyNotMajor(_))));
    }

    #[test]
    fn low_regions_need_dark_chords() {
        let mut m = ChordProgressionMatrix::shipped();
        let bright = ChordCell::single(chord("I", ChordQuality::Major, "C"));
        for b in [0, 3] {
            m.regions_mut()[1].bars[b] = bright.clone();
        }
        for b in [1, 4, 5] {
            m.regions_mut()[1].bars[b] = ChordCell::single(chord("IV", ChordQuality::Major, "F"));
        }
        assert!(validate_matrix(&m)
            .violations
            .iter()
            .any(|v| v.region == Some(1) && matches!(v.kind, ViolationKind::TooFewDarkBars(_))));
    }

    #[test]
    fn single_alternative_needs_certainty() {
        let mut m = ChordProgressionMatrix::shipped();
        m.regions_mut()[5].bars[0] =
            ChordCell::new(vec![(chord("I", ChordQuality::Major, "C"), 0.7)]);
        let kinds: Vec<_> = validate_matrix(&m).violations.into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::SingleNotCertain(0.7)));
    }

    #[test]
    fn structural_errors() {
        let doc = SHIPPED_MATRIX.replacen("index = 3", "index = 2", 1);
        assert!(matches!(load_matrix(doc.as_bytes()), Err(MatrixError::Structure(_))));
        let doc = SHIPPED_MATRIX.replacen("chord-matrix/1", "chord-matrix/9", 1);
        assert!(matches!(load_matrix(doc.as_bytes()), Err(MatrixError::Parse(_))));
        assert!(matches!(load_matrix(b"theme = 3"), Err(MatrixError::Parse(_))));
        let doc = SHIPPED_MATRIX.replacen("i minor C 0.6", "i minor C", 1);
        assert!(matches!(load_matrix(doc.as_bytes()), Err(MatrixError::Parse(_))));
        let doc = SHIPPED_MATRIX.replacen("i minor C 0.6", "i lydian C 0.6", 1);
        assert!(matches!(load_matrix(doc.as_bytes()), Err(MatrixError::Parse(_))));
    }

    #[test]
    fn single_alternative_always_selected() {
        let m = ChordProgressionMatrix::shipped();
        let cell = m.cell(region(0), 8);
        assert_eq!(cell.alternatives.len(), 1);
        let mut rng = substream(1, "t");
        for _ in 0..50 {
            assert_eq!(select_chord(&m, region(0), 8, &mut rng), &cell.alternatives[0].0);
        }
    }

    #[test]
    fn top_region_cadence_is_tonic_major() {
        let m = ChordProgressionMatrix::shipped();
        for seed in 0..200 {
            let c = select_chord(&m, region(9), 8, &mut substream(seed, "chord"));
            assert!(is_tonic_chord(&c.label));
            assert!(matches!(c.quality, ChordQuality::Major | ChordQuality::Major7));
        }
    }

    #[test]
    fn region0_bar3_frequencies_within_three_points() {
        let m = ChordProgressionMatrix::shipped();
        let cell = m.cell(region(0), 3);
        let mut rng = substream(2024, "mc");
        let mut counts = vec![0usize; cell.alternatives.len()];
        let n = 10_000;
        for _ in 0..n {
            let c = select_chord(&m, region(0), 3, &mut rng);
            let i = cell.alternatives.iter().position(|(a, _)| a == c).unwrap();
            counts[i] += 1;
        }
        for (i, (_, p)) in cell.alternatives.iter().enumerate() {
            let freq = counts[i] as f64 / n as f64;
            assert!((freq - p).abs() <= 0.03, "alt {i}: {freq} vs {p}");
        }
    }

    #[test]
    fn advance_wraps() {
        let s = HarmonicState {
            theme_bar: 3,
            ..Default::default()
        };
        let n = advance(&s);
        assert_eq!((n.theme_bar, n.iteration), (4, 0));
        let s = HarmonicState {
            theme_bar: 8,
            ..Default::default()
        };
        let n = advance(&s);
        assert_eq!((n.theme_bar, n.iteration), (1, 1));
        let mut s = HarmonicState::default();
        for _ in 0..16 {
            s = advance(&s);
        }
        assert_eq!((s.theme_bar, s.iteration), (1, 2));
    }

    #[test]
    fn dark_share_decreases_with_valence() {
        let m = ChordProgressionMatrix::shipped();
        let shares: Vec<f64> = ValenceRegion::all().map(|r| expected_dark_share(&m, r)).collect();
        for w in shares.windows(2) {
            assert!(w[0] > w[1] + 0.04, "{shares:?}");
        }
    }
}
