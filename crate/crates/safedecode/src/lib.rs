//! Files, configuration and command-line plumbing around `safedecode-core`.
//!
//! The core crate is pure computation; this crate owns every byte that
//! touches the disk: training corpora, demonstration stores, language-model
//! snapshots, prompt sets, run configurations and reports.

pub mod cli;
pub mod config;
pub mod corpus;
mod error;
pub mod prompts;
pub mod report;
pub mod snapshot;
pub mod store_file;

pub use error::{Error, Result};
pub use safedecode_core;

/// Wall clock for opt-in timing columns; reports stay reproducible without it.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(std::time::Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(std::time::Instant::now())
    }
}

impl safedecode_core::harness::Clock for WallClock {
    fn now_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}
