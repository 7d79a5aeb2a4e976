//! Masked-language-model access: tokenization, sentence-pair inputs and the
//! vocabulary distribution at a masked position.
//!
//! Backends implement [`MaskedLanguageModel::mask_logits`]; everything else
//! (input construction, validation, softmax) is shared, so the real and mock
//! backends see exactly the same inputs.

mod bert;
mod mock;
mod tokenizer;
mod vocab;

use std::sync::Arc;

pub use bert::{BertBackend, BertConfig};
pub use mock::{builtin_vocab, MockBackend, MockMode};
pub use tokenizer::{TokenSequence, Word, WordPieceTokenizer, CONTINUATION_PREFIX};
pub use vocab::{ModelDescriptor, SpecialIds, Vocab};

use crate::error::{Error, Result};

/// `[CLS] S [SEP] S' [SEP]`, where `S'` is `S` with the target word replaced
/// by a single mask token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInput {
    pub tokens: Vec<String>,
    /// Segment id per token: 0 for `[CLS] S [SEP]`, 1 for `S' [SEP]`.
    pub type_ids: Vec<u32>,
    pub mask_index: usize,
}

impl PairInput {
    /// The `S` segment.
    pub fn original_segment(&self) -> &[String] {
        let sep = self.first_sep();
        &self.tokens[1..sep]
    }

    /// The `S'` segment, without the closing separator.
    pub fn masked_segment(&self) -> &[String] {
        let sep = self.first_sep();
        &self.tokens[sep + 1..self.tokens.len() - 1]
    }

    fn first_sep(&self) -> usize {
        self.type_ids.iter().position(|&t| t == 1).unwrap_or(self.tokens.len()) - 1
    }
}

/// Softmax-normalized distribution over the model vocabulary.
#[derive(Debug, Clone)]
pub struct VocabDistribution {
    pub probabilities: Vec<f64>,
    pub vocab: Arc<Vocab>,
}

impl VocabDistribution {
    pub fn from_logits(logits: &[f64], vocab: Arc<Vocab>) -> Result<Self> {
        if logits.len() != vocab.len() {
            return Err(Error::CountMismatch {
                what: "logits",
                expected: vocab.len(),
                got: logits.len(),
            });
        }
        Ok(Self {
            probabilities: softmax(logits),
            vocab,
        })
    }

    pub fn probability(&self, id: u32) -> f64 {
        self.probabilities[id as usize]
    }

    pub fn probability_of(&self, token: &str) -> Option<f64> {
        self.vocab.id(token).map(|id| self.probability(id))
    }

    /// All token ids by descending probability, ties by ascending id.
    pub fn ranked_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.probabilities.len() as u32).collect();
        ids.sort_by(|&a, &b| {
            self.probabilities[b as usize]
                .total_cmp(&self.probabilities[a as usize])
                .then(a.cmp(&b))
        });
        ids
    }

    pub fn top(&self, n: usize) -> Vec<(&str, f64)> {
        self.ranked_ids()
            .into_iter()
            .take(n)
            .map(|id| (self.vocab.token(id), self.probability(id)))
            .collect()
    }
}

/// Numerically stable softmax. Uses `libm` so results do not depend on the
/// platform's math library.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Token ids and segment ids for one forward pass, plus the position whose
/// logits are wanted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    pub position: usize,
}

/// A masked language model.
///
/// Implementations are immutable once loaded and shared across threads.
/// Batching in `mask_logits` must give the same values as one call per input.
pub trait MaskedLanguageModel: Send + Sync {
    fn tokenizer(&self) -> &WordPieceTokenizer;

    /// Maximum number of positions in one input, special tokens included.
    fn max_length(&self) -> usize;

    /// Logits over the vocabulary at `input.position`, one vector per input.
    fn mask_logits(&self, batch: &[EncodedInput]) -> Result<Vec<Vec<f64>>>;

    fn vocab(&self) -> &Arc<Vocab> {
        self.tokenizer().vocab()
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        self.tokenizer().tokenize(text)
    }

    /// Sentence-pair input for `word_index`, trimming distant words when the
    /// pair would exceed [`max_length`](Self::max_length).
    fn pair_input(&self, seq: &TokenSequence, word_index: usize) -> Result<PairInput> {
        fit_pair_input(seq, word_index, self.vocab(), self.max_length())
    }

    fn predict_masked(&self, input: &PairInput) -> Result<VocabDistribution> {
        validate_pair(input, self.vocab())?;
        if input.tokens.len() > self.max_length() {
            return Err(Error::SequenceTooLong {
                required: input.tokens.len(),
                allowed: self.max_length(),
            });
        }
        let vocab = self.vocab();
        let encoded = EncodedInput {
            ids: input.tokens.iter().map(|t| vocab.id_or_unk(t)).collect(),
            type_ids: input.type_ids.clone(),
            position: input.mask_index,
        };
        let logits = self.mask_logits(std::slice::from_ref(&encoded))?;
        let logits = logits
            .into_iter()
            .next()
            .ok_or_else(|| Error::Model("backend returned no logits".into()))?;
        VocabDistribution::from_logits(&logits, vocab.clone())
    }

    /// Distribution at `position` of a single sequence with that token masked.
    fn predict_at(&self, tokens: &[String], position: usize) -> Result<VocabDistribution> {
        let mut out = self.predict_at_many(tokens, &[position])?;
        Ok(out.remove(0))
    }

    /// [`predict_at`](Self::predict_at) for several positions of one sequence,
    /// evaluated as a single batch.
    fn predict_at_many(&self, tokens: &[String], positions: &[usize]) -> Result<Vec<VocabDistribution>> {
        let vocab = self.vocab();
        let required = tokens.len() + 2;
        if required > self.max_length() {
            return Err(Error::SequenceTooLong {
                required,
                allowed: self.max_length(),
            });
        }
        let special = vocab.special();
        let mut ids = Vec::with_capacity(required);
        ids.push(special.cls);
        ids.extend(tokens.iter().map(|t| vocab.id_or_unk(t)));
        ids.push(special.sep);
        let mut batch = Vec::with_capacity(positions.len());
        for &position in positions {
            if position >= tokens.len() {
                return Err(Error::PositionOutOfRange {
                    position,
                    len: tokens.len(),
                });
            }
            let mut masked = ids.clone();
            masked[position + 1] = special.mask;
            batch.push(EncodedInput {
                ids: masked,
                type_ids: vec![0; required],
                position: position + 1,
            });
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.mask_logits(&batch)?;
        if logits.len() != batch.len() {
            return Err(Error::CountMismatch {
                what: "batched logits",
                expected: batch.len(),
                got: logits.len(),
            });
        }
        logits
            .iter()
            .map(|l| VocabDistribution::from_logits(l, vocab.clone()))
            .collect()
    }
}

/// Builds `[CLS] S [SEP] S' [SEP]` with the span of `word_index` collapsed to
/// one mask token in `S'`. No length limit is applied.
pub fn build_pair_input(seq: &TokenSequence, word_index: usize, vocab: &Vocab) -> Result<PairInput> {
    let (start, end) = seq.span(word_index)?;
    let n = seq.tokens.len();
    let masked_len = n - (end - start) + 1;
    let mut tokens = Vec::with_capacity(n + masked_len + 3);
    tokens.push(vocab.cls_token().to_string());
    tokens.extend(seq.tokens.iter().cloned());
    tokens.push(vocab.sep_token().to_string());
    tokens.extend(seq.tokens[..start].iter().cloned());
    tokens.push(vocab.mask_token().to_string());
    tokens.extend(seq.tokens[end..].iter().cloned());
    tokens.push(vocab.sep_token().to_string());
    let mut type_ids = vec![0; n + 2];
    type_ids.resize(tokens.len(), 1);
    Ok(PairInput {
        tokens,
        type_ids,
        mask_index: n + 2 + start,
    })
}

/// Like [`build_pair_input`], but if the pair exceeds `max_length`, whole
/// words are dropped from whichever end lies farther from the target until it
/// fits.
pub fn fit_pair_input(seq: &TokenSequence, word_index: usize, vocab: &Vocab, max_length: usize) -> Result<PairInput> {
    let pair_len = |lo: usize, hi: usize| {
        let tokens = seq.word_boundaries[hi - 1].1 - seq.word_boundaries[lo].0;
        let (s, e) = seq.word_boundaries[word_index];
        3 + tokens + (tokens - (e - s) + 1)
    };
    seq.span(word_index)?;
    let (mut lo, mut hi) = (0, seq.word_count());
    while pair_len(lo, hi) > max_length {
        let left = word_index - lo;
        let right = hi - 1 - word_index;
        if left == 0 && right == 0 {
            return Err(Error::SequenceTooLong {
                required: pair_len(lo, hi),
                allowed: max_length,
            });
        }
        if right >= left {
            hi -= 1;
        } else {
            lo += 1;
        }
    }
    if lo == 0 && hi == seq.word_count() {
        build_pair_input(seq, word_index, vocab)
    } else {
        log::debug!("trimmed pair input to words {lo}..{hi} of {}", seq.word_count());
        build_pair_input(&seq.slice_words(lo, hi), word_index - lo, vocab)
    }
}

fn validate_pair(input: &PairInput, vocab: &Vocab) -> Result<()> {
    let bad = |m: &str| Err(Error::MalformedInput(m.to_string()));
    if input.tokens.len() != input.type_ids.len() {
        return bad("token and segment lengths differ");
    }
    let masks: Vec<usize> = positions_of(&input.tokens, vocab.mask_token());
    let seps: Vec<usize> = positions_of(&input.tokens, vocab.sep_token());
    if masks.len() != 1 {
        return bad("pair input must contain exactly one mask token");
    }
    if seps.len() != 2 || seps[1] != input.tokens.len() - 1 {
        return bad("pair input must contain two separators, the last at the end");
    }
    if input.tokens.first().map(String::as_str) != Some(vocab.cls_token()) {
        return bad("pair input must start with the classification token");
    }
    if masks[0] != input.mask_index || input.mask_index <= seps[0] {
        return bad("mask index must point at the mask token after the first separator");
    }
    Ok(())
}

fn positions_of(tokens: &[String], needle: &str) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.as_str() == needle)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (WordPieceTokenizer, Arc<Vocab>) {
        let tokens: Vec<String> = [
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "the", "cat", "perch", "##ed", "##ing", "on", "mat", "a",
            "##b", "##c",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let vocab = Arc::new(Vocab::from_tokens(tokens, &ModelDescriptor::default()).unwrap());
        (WordPieceTokenizer::new(vocab.clone(), true), vocab)
    }

    #[test]
    fn pair_for_cat_sentence() {
        let (tok, vocab) = setup();
        let seq = tok.tokenize("the cat perched on the mat").unwrap();
        // "perched" -> perch ##ed; use the single-token word "on" for the index check
        let pair = build_pair_input(&seq, 3, &vocab).unwrap();
        assert_eq!(pair.original_segment(), &seq.tokens[..]);
        assert_eq!(pair.tokens[pair.mask_index], "[MASK]");
        assert_eq!(pair.mask_index, seq.tokens.len() + 2 + seq.span(3).unwrap().0);
        assert_eq!(pair.masked_segment().len(), seq.tokens.len());
    }

    #[test]
    fn multi_piece_target_collapses_to_one_mask() {
        let (tok, vocab) = setup();
        let seq = tok.tokenize("the abc on").unwrap();
        assert_eq!(seq.span(1).unwrap(), (1, 4));
        let pair = build_pair_input(&seq, 1, &vocab).unwrap();
        assert_eq!(pair.masked_segment().len(), seq.tokens.len() - 2);
        assert_eq!(pair.tokens.iter().filter(|t| *t == "[MASK]").count(), 1);
        assert_eq!(pair.tokens.iter().filter(|t| *t == "[SEP]").count(), 2);
    }

    #[test]
    fn first_word_mask_follows_first_separator() {
        let (tok, vocab) = setup();
        let seq = tok.tokenize("the cat").unwrap();
        let pair = build_pair_input(&seq, 0, &vocab).unwrap();
        assert_eq!(pair.tokens[pair.mask_index - 1], "[SEP]");
        assert_eq!(pair.type_ids[pair.mask_index], 1);
    }

    #[test]
    fn word_index_out_of_range() {
        let (tok, vocab) = setup();
        let seq = tok.tokenize("the cat").unwrap();
        assert!(matches!(
            build_pair_input(&seq, 2, &vocab),
            Err(Error::WordIndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn truncation_drops_farthest_words_first() {
        let (tok, vocab) = setup();
        let seq = tok.tokenize("the cat on the mat the cat on the mat").unwrap();
        // target word 2; full pair needs 3 + 10 + 10 = 23 positions
        let pair = fit_pair_input(&seq, 2, &vocab, 13).unwrap();
        assert!(pair.tokens.len() <= 13);
        // five words survive: two either side of the target
        assert_eq!(pair.original_segment(), ["the", "cat", "on", "the", "mat"]);
        assert_eq!(pair.tokens[pair.mask_index], "[MASK]");
        assert_eq!(pair.masked_segment()[2], "[MASK]");
    }

    #[test]
    fn truncation_fails_when_target_alone_is_too_long() {
        let (tok, vocab) = setup();
        let seq = tok.tokenize("the abc on").unwrap();
        assert!(matches!(
            fit_pair_input(&seq, 1, &vocab, 6),
            Err(Error::SequenceTooLong {
                required: 7,
                allowed: 6
            })
        ));
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 0.0, -1000.0, 3.5]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
}
