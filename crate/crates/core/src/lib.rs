//! Trace reconstruction for labeled trees.
//!
//! A complete k-ary tree or a spider with hidden binary labels is passed
//! repeatedly through a deletion channel (TED or Left-Propagation). The
//! modules here sample such traces, extract their canonical structure and
//! recover the labels, with a Monte Carlo harness for measuring success rates
//! and checking the analytic bounds behind the spider distinguisher.

pub mod channel;
pub mod error;
pub mod harness;
pub mod lp_recon;
pub mod par;
pub mod rng;
pub mod spider_recon;
pub mod string_recon;
pub mod ted_recon;
pub mod trace_analysis;
pub mod trees;

pub use error::{Error, Result};
pub use par::Execution;
pub use trees::{LabeledOrderedTree, NodeIndex, TreeShape};
