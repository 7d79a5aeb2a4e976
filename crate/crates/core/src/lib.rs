//! Lexical simplification driven by a masked language model.
//!
//! A complex word is masked in a `[CLS] S [SEP] S' [SEP]` sentence pair, the
//! MLM's distribution at the mask yields the candidate substitutions, and the
//! candidates are ordered by averaging their ranks under four features: MLM
//! probability, windowed MLM cross-entropy, embedding similarity and corpus
//! frequency.
//!
//! ```no_run
//! use std::sync::Arc;
//! use lexsimp::mlm::MockBackend;
//! use lexsimp::ranking::{simplify, Resources, SimplifyConfig};
//!
//! let backend = Arc::new(MockBackend::builtin(7));
//! let resources = Resources::new(backend);
//! let replacement = simplify("John composed these verses.", 1, &SimplifyConfig::default(), &resources).unwrap();
//! println!("{} -> {}", replacement.original, replacement.chosen);
//! ```

pub mod candidates;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod mlm;
pub mod ranking;
pub mod resources;

pub use error::{Error, Result};
