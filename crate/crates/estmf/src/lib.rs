//! Empirical security games for MFKDF2 and for configurable legacy
//! constructions that each reintroduce one known weakness.

pub mod adversary;
pub mod games;
pub mod legacy;
pub mod prime;
pub mod report;
pub mod scheme;
pub mod stats;
pub mod suite;

pub use report::{GameRecord, Kind, Report, Verdict};
pub use scheme::{GameError, Scheme};
pub use suite::{run_suite, SuiteConfig, SUITES};
