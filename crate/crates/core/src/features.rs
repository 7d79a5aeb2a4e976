//! The four per-candidate ranking features.
//!
//! | feature          | better |
//! |------------------|--------|
//! | MLM probability  | higher |
//! | windowed MLM loss| lower  |
//! | cosine similarity| higher |
//! | corpus frequency | higher |

use serde::Serialize;

use crate::candidates::{Candidate, CandidateSet};
use crate::error::{Error, Result};
use crate::mlm::MaskedLanguageModel;
use crate::resources::{EmbeddingTable, FrequencyTable};

/// Words `w_-m .. w_m` around the target, truncated at sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub words: Vec<String>,
    pub target_offset: usize,
    pub half_width: usize,
}

impl ContextWindow {
    pub fn around(words: &[String], target_index: usize, half_width: usize) -> Result<Self> {
        if target_index >= words.len() {
            return Err(Error::WordIndexOutOfRange {
                index: target_index,
                len: words.len(),
            });
        }
        let lo = target_index.saturating_sub(half_width);
        let hi = (target_index + half_width + 1).min(words.len());
        Ok(Self {
            words: words[lo..hi].to_vec(),
            target_offset: target_index - lo,
            half_width,
        })
    }

    /// The window with the target replaced by `candidate`.
    pub fn substituted(&self, candidate: &str) -> Vec<String> {
        let mut words = self.words.clone();
        words[self.target_offset] = candidate.to_string();
        words
    }
}

/// Raw feature values for one candidate. A missing similarity means at least
/// one of the two words has no embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScores {
    pub mlm_probability: f64,
    pub lm_loss: f64,
    pub similarity: Option<f64>,
    pub frequency: u64,
}

/// The generation-time probability of `candidate`.
pub fn bert_prediction_feature(set: &CandidateSet, candidate: &Candidate) -> Result<f64> {
    set.candidates
        .iter()
        .find(|c| c.id == candidate.id && c.token == candidate.token)
        .map(|c| c.mlm_probability)
        .ok_or_else(|| Error::CandidateNotInSet(candidate.token.clone()))
}

/// Mean cross-entropy of the context window with `candidate` substituted for
/// the target, masking each subword position of the window in turn.
pub fn lm_loss_feature(
    words: &[String],
    target_index: usize,
    candidate: &str,
    half_width: usize,
    backend: &dyn MaskedLanguageModel,
) -> Result<f64> {
    let window = ContextWindow::around(words, target_index, half_width)?;
    let tokenizer = backend.tokenizer();
    let tokens: Vec<String> = window
        .substituted(candidate)
        .iter()
        .flat_map(|w| tokenizer.tokenize_word(w))
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    let vocab = backend.vocab();
    let positions: Vec<usize> = (0..tokens.len()).collect();
    let distributions = backend.predict_at_many(&tokens, &positions)?;
    let total: f64 = tokens
        .iter()
        .zip(&distributions)
        .map(|(token, dist)| {
            let p = dist.probability(vocab.id_or_unk(token));
            -p.max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    Ok(total / tokens.len() as f64)
}

/// Cosine of the two words' vectors, `None` when either is absent.
pub fn similarity_feature(target: &str, candidate: &str, table: &EmbeddingTable) -> Option<f64> {
    table.similarity(target, candidate)
}

/// Sum of the word's counts over all tables.
pub fn frequency_feature(candidate: &str, tables: &[FrequencyTable]) -> u64 {
    tables.iter().map(|t| t.count(candidate)).sum()
}

/// All four features for every candidate of `set`, in candidate order.
pub fn score_candidates(
    words: &[String],
    target_index: usize,
    set: &CandidateSet,
    half_width: usize,
    backend: &dyn MaskedLanguageModel,
    embeddings: &EmbeddingTable,
    frequencies: &[FrequencyTable],
) -> Result<Vec<FeatureScores>> {
    set.candidates
        .iter()
        .map(|c| {
            Ok(FeatureScores {
                mlm_probability: bert_prediction_feature(set, c)?,
                lm_loss: lm_loss_feature(words, target_index, &c.token, half_width, backend)?,
                similarity: similarity_feature(&set.target, &c.token, embeddings),
                frequency: frequency_feature(&c.token, frequencies),
            })
        })
        .collect()
}
