//! Candidate generation from the sentence-pair MLM distribution.

use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlm::{MaskedLanguageModel, VocabDistribution, CONTINUATION_PREFIX};

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub token: String,
    /// Vocabulary id, used for deterministic tie-breaking.
    pub id: u32,
    pub mlm_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub target: String,
    /// By descending probability, ties by ascending vocabulary id.
    pub candidates: Vec<Candidate>,
    pub k: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn words(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.token.clone()).collect()
    }

    /// The first `k` candidates, as if generated with that `k`.
    pub fn truncated(&self, k: usize) -> CandidateSet {
        CandidateSet {
            target: self.target.clone(),
            candidates: self.candidates.iter().take(k).cloned().collect(),
            k,
        }
    }
}

/// Masks word `target_word_index` of `sentence` in a sentence pair and keeps
/// the `k` most probable whole-word tokens that are not variants of the target.
pub fn generate_candidates(
    sentence: &str,
    target_word_index: usize,
    k: usize,
    backend: &dyn MaskedLanguageModel,
) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    let seq = backend.tokenize(sentence)?;
    let target = seq
        .words
        .get(target_word_index)
        .ok_or(Error::WordIndexOutOfRange {
            index: target_word_index,
            len: seq.word_count(),
        })?
        .normalized
        .clone();
    let pair = backend.pair_input(&seq, target_word_index)?;
    let distribution = backend.predict_masked(&pair)?;
    Ok(select_candidates(&distribution, &target, k))
}

/// Walks `distribution` from most to least probable and collects up to `k`
/// admissible candidates for `target`.
pub fn select_candidates(distribution: &VocabDistribution, target: &str, k: usize) -> CandidateSet {
    let target = target.to_lowercase();
    let vocab = &distribution.vocab;
    let mut candidates = Vec::with_capacity(k);
    for id in distribution.ranked_ids() {
        if candidates.len() == k {
            break;
        }
        if vocab.is_special_id(id) {
            continue;
        }
        let token = vocab.token(id);
        if is_valid_candidate(token) && filter_morphological_variants(&target, token) {
            candidates.push(Candidate {
                token: token.to_string(),
                id,
                mlm_probability: distribution.probability(id),
            });
        }
    }
    CandidateSet { target, candidates, k }
}

/// Whole-word, non-special vocabulary entries with at least one letter.
pub fn is_valid_candidate(token: &str) -> bool {
    if token.starts_with(CONTINUATION_PREFIX) {
        return false;
    }
    if token.len() > 2 && token.starts_with('[') && token.ends_with(']') {
        return false;
    }
    token.chars().any(char::is_alphabetic)
}

/// `false` when `token` is the target itself or shares its stem.
pub fn filter_morphological_variants(target: &str, token: &str) -> bool {
    let target = target.to_lowercase();
    let token = token.to_lowercase();
    if target == token {
        return false;
    }
    STEMMER.stem(&target) != STEMMER.stem(&token)
}
