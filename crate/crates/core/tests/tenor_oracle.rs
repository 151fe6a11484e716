//! Tenor voice selection against an exhaustive brute-force search.

use cadenza_core::rng::substream;
use cadenza_core::theory::{Chord, ChordQuality, Pitch, PitchClass, Register};
use cadenza_core::voice::{dissimilarity, tenor_voicing, NoteSet};
use rand::Rng;

/// Cross-sum over every pair, written out directly.
fn oracle_distance(a: &[u8], b: &[u8]) -> u32 {
    let mut total = 0;
    for &x in a {
        for &y in b {
            total += (x as i32 - y as i32).unsigned_abs();
        }
    }
    total
}

/// Every closed voicing: for each possible lowest pitch that is a chord tone,
/// the chord's classes realized inside the octave window starting there.
fn oracle_candidates(pcs: &[u8], low: u8, high: u8) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for bottom in low..=high {
        if !pcs.contains(&(bottom % 12)) {
            continue;
        }
        let window: Vec<u8> = (bottom as u16..bottom as u16 + 12)
            .filter(|&m| m <= 127 && pcs.contains(&((m % 12) as u8)))
            .map(|m| m as u8)
            .collect();
        if window.len() == pcs.len() && window.iter().all(|&m| m <= high) {
            out.push(window);
        }
    }
    out
}

fn oracle_argmin(prev: &[u8], pcs: &[u8], mut low: u8, mut high: u8) -> Vec<u8> {
    loop {
        let best = oracle_candidates(pcs, low, high)
            .into_iter()
            .min_by_key(|c| (oracle_distance(prev, c), c[0], c.clone()));
        if let Some(b) = best {
            return b;
        }
        low = low.saturating_sub(12);
        high = (high as u16 + 12).min(127) as u8;
    }
}

fn midi(v: &NoteSet) -> Vec<u8> {
    v.pitches().iter().map(|p| p.midi()).collect()
}

#[test]
fn anchor_distance() {
    let c = NoteSet::new(vec![Pitch::new(60).unwrap(), Pitch::new(64).unwrap(), Pitch::new(67).unwrap()]).unwrap();
    assert_eq!(dissimilarity(&c, &c), 28);
    assert_eq!(oracle_distance(&[60, 64, 67], &[60, 64, 67]), 28);
}

#[test]
fn matches_brute_force_on_random_instances() {
    let mut rng = substream(0x7e40, "tenor-oracle");
    let mut widened = 0;
    for case in 0..500 {
        let root = PitchClass::new(rng.random_range(0..12));
        let quality = ChordQuality::ALL[rng.random_range(0..ChordQuality::ALL.len())];
        let chord = Chord::new(root, quality, "x");
        let pcs: Vec<u8> = chord.tones().iter().map(|p| p.value()).collect();

        let low = rng.random_range(12..90u8);
        let width = rng.random_range(4..48u8);
        let high = (low as u16 + width as u16).min(127) as u8;
        let register = Register::new(Pitch::new(low as i32).unwrap(), Pitch::new(high as i32).unwrap()).unwrap();

        let n = rng.random_range(3..=4);
        let prev_pitches: Vec<Pitch> = (0..n).map(|_| Pitch::new(rng.random_range(30..100)).unwrap()).collect();
        let prev = NoteSet::new(prev_pitches).unwrap();

        let got = tenor_voicing(&chord, &prev, &register);
        let expected = oracle_argmin(&midi(&prev), &pcs, low, high);
        assert_eq!(midi(&got.notes), expected, "case {case}: {chord} in {register} after {prev}");
        if got.widened_octaves > 0 {
            widened += 1;
        }
    }
    assert!(widened > 0, "no instance exercised register widening");
}

#[test]
fn repeated_chord_keeps_its_voicing() {
    let c = Chord::new(PitchClass::new(0), ChordQuality::Major, "I");
    let prev = NoteSet::new(vec![Pitch::new(60).unwrap(), Pitch::new(64).unwrap(), Pitch::new(67).unwrap()]).unwrap();
    let reg = Register::new(Pitch::new(48).unwrap(), Pitch::new(84).unwrap()).unwrap();
    assert_eq!(midi(&tenor_voicing(&c, &prev, &reg).notes), vec![60, 64, 67]);
}
