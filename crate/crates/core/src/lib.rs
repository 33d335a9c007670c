//! Carbon, energy and test-quality metrics for batched code-generation
//! workloads.
//!
//! The pipeline is: [`runner`] executes a generation command in batches and
//! writes emission logs; [`ingest`] reads those logs with coverage results
//! into [`domain::Cell`]s; [`metrics`] evaluates every cell; [`report`]
//! ranks, compares and serializes the results. [`cli`] wires the stages into
//! the `carbonbench` binary.

pub mod cli;
pub mod domain;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
