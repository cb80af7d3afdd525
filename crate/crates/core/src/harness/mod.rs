//! Experiment orchestration: corpus construction, the five studies and
//! their reports.
//!
//! Seeds: folds at velocity index `v` use `derive(master, STREAM_FOLDS, v)`
//! in every study, and perturbation draws use
//! `derive(master, STREAM_PERTURB, v << 40 | n << 20 | repeat)`. The
//! synthetic corpus carries its own seed inside the corpus description.

mod config;
mod corpus;
mod experiments;
mod features;
mod report;

pub use config::*;
pub use corpus::*;
pub use experiments::*;
pub use features::*;
pub use report::*;
