//! Attribute vocabulary discovery from category descriptions, class–attribute
//! association learning with a linguistic prior, and attribute-based
//! zero-shot classification.
//!
//! The pipeline runs, in order: [`corpus`] (tf·idf class embedding),
//! [`topics`] (LDA and topic significance), [`selection`] (submodular
//! vocabulary selection under a saliency budget), [`assoc`] (signed or
//! continuous class–attribute associations), [`neural`] (joint and attribute
//! networks), [`zeroshot`] (summation DAP scoring) and [`eval`].

// `!(x >= 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assoc;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fmt;
pub mod synth;
mod table;
pub mod neural;
pub mod selection;
pub mod topics;
pub mod zeroshot;

pub use assoc::{AssociationMatrix, AssociationMode};
pub use corpus::{ClassEmbedding, Dictionary, Document, StopWords};
pub use error::{Category, Error, Result};
pub use neural::{Activation, DenseNetwork, JointModel, TrainConfig};
pub use selection::{DiscriminationGraph, SelectionState};
pub use topics::{TopicModel, TopicRanking};
pub use zeroshot::{NormalizerSource, ScoreNormalizer};
