//! Rule-based, seedable generator that turns a stream of valence/arousal
//! coordinates into a four-voice classical-style MIDI event stream.
//!
//! The pipeline is organised bottom-up:
//!
//! * [`affect`] quantizes the control signal into the regions every rule reads.
//! * [`theory`] provides pitches, scales, chords and diatonic motion.
//! * [`harmony`] owns the 8-bar theme and the per-valence chord matrix.
//! * [`voice`] resolves bass, tenor, alto and soprano pitches.
//! * [`rhythm`] maps arousal/valence onto tempo, rhythm, velocity and register.
//! * [`render`] assembles bars and writes them out as SMF or a live stream.

pub mod affect;
pub mod harmony;
pub mod render;
pub mod rhythm;
pub mod rng;
pub mod theory;
pub mod voice;

pub use affect::{AffectState, Trajectory};
pub use render::{BarPlan, Fixtures, Generator, TimedEvent};
