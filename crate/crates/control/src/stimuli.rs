//! Batch generation of listening-study stimuli.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cadenza_core::affect::{AffectState, Trajectory};
use cadenza_core::render::smf::write_smf;
use cadenza_core::render::{render_offline, Fixtures, Generator};
use cadenza_core::rhythm::tempo_bpm;
use cadenza_core::rng::{derive_seed, substream, RNG_SCHEME};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FORMAT: &str = "cadenza-stimuli/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Tempo from which a stimulus gets the long progression.
pub const LONG_PROGRESSION_BPM: f64 = 130.0;
pub const SHORT_BARS: usize = 8;
pub const LONG_BARS: usize = 16;

/// The 13 (valence, arousal) points of the validation study.
pub const STUDY_POINTS: [(f64, f64); 13] = [
    (0.0, 0.0),
    (0.0, 0.5),
    (0.0, 1.0),
    (0.25, 0.25),
    (0.25, 0.75),
    (0.5, 0.0),
    (0.5, 0.5),
    (0.5, 1.0),
    (0.75, 0.25),
    (0.75, 0.75),
    (1.0, 0.0),
    (1.0, 0.5),
    (1.0, 1.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSpec {
    pub points: Vec<AffectState>,
    pub variants_per_point: usize,
    pub seed: u64,
}

impl StimulusSpec {
    /// Study points, three variants each.
    pub fn study(seed: u64) -> Self {
        Self {
            points: STUDY_POINTS
                .iter()
                .map(|&(v, a)| AffectState::clamped(v, a).expect("study points are in range"))
                .collect(),
            variants_per_point: 3,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusEntry {
    pub stimulus_id: String,
    pub file: String,
    pub point: usize,
    pub variant: usize,
    pub valence: f64,
    pub arousal: f64,
    pub seed: u64,
    pub bars: usize,
    pub tempo_bpm: f64,
    pub duration_seconds: f64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub rng_scheme: String,
    pub seed: u64,
    pub variants_per_point: usize,
    pub stimuli: Vec<StimulusEntry>,
    /// Stimulus ids in a seeded random order for presentation.
    pub presentation_order: Vec<String>,
}

impl Manifest {
    pub fn mean_duration(&self) -> f64 {
        self.stimuli.iter().map(|s| s.duration_seconds).sum::<f64>() / self.stimuli.len().max(1) as f64
    }

    pub fn read(path: &Path) -> Result<Self, StimulusError> {
        let text = fs::read_to_string(path).map_err(|source| StimulusError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| StimulusError::Manifest(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("stimulus spec needs at least one point and one variant")]
    Empty,
}

pub fn bars_for(affect: AffectState) -> usize {
    if tempo_bpm(affect.arousal()) >= LONG_PROGRESSION_BPM {
        LONG_BARS
    } else {
        SHORT_BARS
    }
}

pub fn stimulus_seed(base: u64, point: usize, variant: usize) -> u64 {
    derive_seed(base, point as u64, variant as u64)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Renders every (point, variant) stimulus into `dir` and writes the manifest.
pub fn generate_stimuli(spec: &StimulusSpec, fixtures: Arc<Fixtures>, dir: &Path) -> Result<Manifest, StimulusError> {
    if spec.points.is_empty() || spec.variants_per_point == 0 {
        return Err(StimulusError::Empty);
    }
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| StimulusError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let mut stimuli = Vec::with_capacity(spec.points.len() * spec.variants_per_point);
    for (point, &affect) in spec.points.iter().enumerate() {
        let bars = bars_for(affect);
        for variant in 0..spec.variants_per_point {
            let seed = stimulus_seed(spec.seed, point, variant);
            let mut generator = Generator::new(Arc::clone(&fixtures), seed);
            let rendering = render_offline(&mut generator, &Trajectory::constant(affect), bars);
            let bytes = write_smf(&rendering.events);
            let stimulus_id = format!("p{point:02}-v{variant}");
            let file = format!("{stimulus_id}.mid");
            let path = dir.join(&file);
            fs::write(&path, &bytes).map_err(io(&path))?;
            stimuli.push(StimulusEntry {
                stimulus_id,
                file,
                point,
                variant,
                valence: affect.valence(),
                arousal: affect.arousal(),
                seed,
                bars,
                tempo_bpm: tempo_bpm(affect.arousal()),
                duration_seconds: rendering.duration_seconds,
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
    }

    let mut presentation_order: Vec<String> = stimuli.iter().map(|s| s.stimulus_id.clone()).collect();
    presentation_order.shuffle(&mut substream(spec.seed, "presentation-order"));

    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_owned(),
        rng_scheme: RNG_SCHEME.to_owned(),
        seed: spec.seed,
        variants_per_point: spec.variants_per_point,
        stimuli,
        presentation_order,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| StimulusError::Manifest(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(io(&path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progression_length_threshold() {
        let at = |a| bars_for(AffectState::clamped(0.5, a).unwrap());
        assert_eq!(at(0.0), 8);
        assert_eq!(at(0.49), 8);
        assert_eq!(at(0.5), 16);
        assert_eq!(at(1.0), 16);
    }

    #[test]
    fn seeds_are_distinct_across_the_batch() {
        let mut seeds: Vec<u64> = (0..13).flat_map(|p| (0..3).map(move |v| stimulus_seed(9, p, v))).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 39);
    }

    #[test]
    fn empty_spec_rejected() {
        let spec = StimulusSpec {
            variants_per_point: 0,
            ..StimulusSpec::study(1)
        };
        let dir = std::env::temp_dir();
        assert!(matches!(generate_stimuli(&spec, Arc::new(Fixtures::shipped()), &dir), Err(StimulusError::Empty)));
    }
}
