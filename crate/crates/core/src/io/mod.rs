//! Scenario files and on-disk artifact formats.

pub mod config;
pub mod dump;
pub mod output;

pub use config::{DumpFields, ScenarioFile};
pub use dump::{DumpArray, FieldDump};
pub use output::{grid_fingerprint, read_json, write_atomic, write_json, ReferenceSummary, RunSummary};
