//! Budget-constrained subset selection for embedded text corpora.
//!
//! Selection is posed as learning per-sample sampling logits: masks of `S`
//! samples are drawn without replacement from the softmax of the logits,
//! scored with a quality/diversity objective, and the logits are moved along
//! a group-standardized score-function gradient. After training, the `S`
//! samples with the largest logits form the selection.
//!
//! Modules:
//! - [`corpus`]: embeddings, quality scores, shards, file formats
//! - [`metrics`]: quality and diversity set functions, the mixed objective
//! - [`masklearn`]: the mask-learning optimizer
//! - [`baselines`]: exhaustive, greedy, top-k and semantic-dedup selectors
//! - [`analysis`]: k-means, per-cluster heatmaps, length statistics, variance probes
//! - [`bench`]: greedy vs. mask learning at matched objective values

pub mod analysis;
pub mod baselines;
pub mod bench;
pub mod corpus;
pub mod error;
pub mod fmt;
pub mod masklearn;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use error::{Category, Error, Result};
