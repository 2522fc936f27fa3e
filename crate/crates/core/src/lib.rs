//! Radial-velocity exoplanet detection benchmark.
//!
//! Tasks are generated deterministically from integer seeds, graded against
//! hidden ground truth with four pass/fail criteria, solved by a classical
//! periodogram + least-squares baseline, and served to agents as budgeted
//! episodes over a newline-delimited JSON protocol.

pub mod episode;
pub mod error;
pub mod evaluator;
pub mod noise;
pub mod orbit;
pub mod report;
pub mod schema;
pub mod solver;
pub mod stats;
pub mod suite;
pub mod task;

pub use error::{Error, Result};
pub use evaluator::{evaluate, CriteriaReport, MatchConfig, Submission};
pub use noise::{GpSpec, NoiseSpec};
pub use orbit::{Keplerian, PlanetElements, StarContext};
pub use task::{generate_task, RvDataset, TaskBundle, Tier};
pub use episode::{Engine, EpisodeConfig, EpisodeResult};
pub use report::{aggregate, AggregateReport};
pub use suite::{forge_suite, Suite, SuiteManifest, TierCounts};
