//! Deterministic, reversible encoding of tabular network-flow records into
//! fixed-size RGB images.
//!
//! The pipeline: a [`schema::FeatureSchema`] fixes feature order and kinds,
//! [`ingest`] parses CSV splits into [`ingest::FlowRecord`]s, [`stats::fit`]
//! learns z-score parameters and vocabularies on the training split only,
//! and a [`codec::Codec`] writes each standardized record into an `S×S`
//! image (and back). A [`manifest::Manifest`] persists everything a decoder
//! needs.
//!
//! Batch entry points take an [`exec::Parallelism`]; with the default
//! `parallel` feature they can run on rayon, and results never depend on
//! the strategy chosen.

pub mod codec;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod manifest;
pub mod reference;
pub mod replica;
pub mod schema;
pub mod stats;
pub mod verify;

pub use codec::{Codec, EncodedImage, LayoutSpec, StrayBytes};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use ingest::{Dataset, FlowRecord, RawValue, Split};
pub use manifest::Manifest;
pub use schema::{FeatureKind, FeatureSchema, LabelMode, LabelScheme};
pub use stats::FittedStats;
