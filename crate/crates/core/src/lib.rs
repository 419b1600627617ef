//! Audience demographic prediction from browsing histories.
//!
//! Sites are represented by the tf-idf weighted sum of their words'
//! embeddings, users by an aggregate of the sites they visit, and
//! attributes are predicted with linear max-margin models.

pub mod aggregation;
pub mod embedding;
pub mod html_extract;
pub mod learn;
pub mod pipeline;
pub mod representation;
pub mod synthetic;
pub mod weighting;
