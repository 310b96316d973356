//! Entity extraction, embedding clustering, cluster labeling and
//! entity-count histograms for exploring text datasets.

pub mod clustering;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod extraction;
pub mod fixtures;
pub mod histogram;
pub mod labeling;
pub mod pipeline;
pub mod provider;
pub mod query;
#[cfg(feature = "remote")]
pub mod remote;
pub mod store;
