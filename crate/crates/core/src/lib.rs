//! Anchor-similarity time series for chronologically ordered post
//! embeddings, and the small classifiers trained on them.
//!
//! The pipeline: average condition-class post embeddings into an anchor
//! ([`anchor::compute_anchor`]), turn each user's posts into a series of
//! cosine similarities to it ([`anchor::build_series`]), then classify the
//! series either from extracted features ([`features`]) or directly with a
//! sequence model ([`nn`], [`classify`]).

pub mod anchor;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod features;
pub mod nn;
pub mod rng;

pub use anchor::{AnchorEmbedding, SeriesSet, SimilaritySeries};
pub use classify::{EvaluationReport, TrainConfig};
pub use corpus::{Corpus, Label, PostEmbedding, UserTimeline};
pub use error::{Error, Result};
pub use features::{FeatureVector, SelectionReport};
pub use nn::{FlopsEstimate, ModelSpec, TrainedModel};
