//! Transductive prediction of one-shot game actions from personality
//! attributes.
//!
//! Participants are represented by attribute vectors, clustered once with
//! Ward linkage (label-blind), and each unlabeled participant is assigned
//! the majority action of the labeled members of its cluster. The
//! [`harness`] evaluates that classifier against majority-vote, K-NN and
//! random-guess baselines over repeated random train/test splits.

pub mod classifiers;
pub mod clustering;
pub mod dataset;
pub mod features;
pub mod games;
pub mod harness;
pub mod metrics;
pub mod rng;

/// Version of the on-disk CSV/JSON schemas.
pub const SCHEMA_VERSION: u32 = 1;
