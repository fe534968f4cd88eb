//! Diversity-aware uplink scheduling for roadside units.
//!
//! RSUs hold labeled samples and share `M` uplink channels to a server.
//! Each interval a policy picks the active RSUs and their attempt
//! probabilities, a slot matrix realizes them, and the server accumulates
//! what gets through. The optimizing policies score candidate coalitions by
//! inverse delay, throughput and Jain's index over received class counts.

pub mod channel;
pub mod coalition;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod schedule;
pub mod seed;
pub mod select;
pub mod sim;

pub use error::{Error, Result};
