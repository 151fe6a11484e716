//! Operator surface for cadenza: live control endpoint, stimulus batches and
//! rating analysis. The `cadenza` binary wraps these behind a CLI.

pub mod analysis;
pub mod protocol;
pub mod server;
pub mod stimuli;
