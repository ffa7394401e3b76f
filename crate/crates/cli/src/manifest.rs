use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::args::Command;

/// Provenance record attached to every output.
///
/// `config` is the parsed command, so a manifest can be fed back to
/// `segreg rerun`. The thread count is deliberately absent: it does not
/// affect results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Command,
    pub seeds: Vec<u64>,
    /// SHA-256 of the input file, for commands that read one.
    pub input_sha256: Option<String>,
    pub version: String,
    pub timings: Vec<PhaseTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

impl RunManifest {
    pub fn new(config: &Command) -> Self {
        Self {
            command: config.name().to_string(),
            config: config.clone(),
            seeds: Vec::new(),
            input_sha256: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timings: Vec::new(),
        }
    }

    /// Runs `f` and records its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(PhaseTiming {
            phase: phase.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}
