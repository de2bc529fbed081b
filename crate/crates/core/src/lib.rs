//! Finding near-optimal configurations of configurable software from few
//! measurements.
//!
//! Three iterative sampling strategies train a CART regression tree on
//! incrementally measured configurations and differ only in how they decide
//! to stop: progressive and projective sampling watch the model's relative
//! error, while rank-based sampling watches how well the model orders
//! configurations. The [`harness`] module runs the strategies side by side
//! on configuration tables and reports how close each one gets to the true
//! optimum and how many measurements it spends.

pub mod cart;
pub mod curvefit;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod samplers;
pub mod stats;
pub mod synthgen;

pub use cart::{RegressionTree, TreeNode, TreeParams};
pub use dataset::{ConfigurationTable, FeatureVector, PoolSplit, Schema, SplitFractions};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentReport};
pub use samplers::{Approach, SamplerOutcome, SamplerParams, Termination};
