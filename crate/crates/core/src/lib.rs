//! Transition-based dependency parsing with beam search, confidence-based
//! self-training, co-/tri-training and dependency language models.

pub mod cli;
pub mod confidence;
pub mod corpus;
pub mod decoder;
pub mod dlm;
pub mod error;
pub mod eval;
pub mod features;
pub mod learn;
pub mod model;
pub mod semisup;
pub mod synth;
pub mod transition;

pub use corpus::{Format, Sentence, Token};
pub use decoder::{decode, search, DecodeConstraint, Hypothesis};
pub use error::{Error, Result};
pub use model::WeightModel;
pub use transition::{Configuration, Labels, System, Transition};
