use std::sync::Arc;

use super::tokenizer::WordPieceTokenizer;
use super::vocab::{ModelDescriptor, Vocab};
use super::{EncodedInput, MaskedLanguageModel};
use crate::error::Result;

const BUILTIN_VOCAB: &str = include_str!("mock_vocab.txt");

/// How the mock turns an input into logits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockMode {
    /// Logits are a seeded hash of the whole input, the position and the
    /// token id, scaled to `[-scale, scale]`.
    Hashed { scale: f64 },
    /// Every logit is zero, so every token has probability `1/|V|`.
    Uniform,
}

/// Deterministic stand-in for a transformer.
///
/// Output depends only on the seed, the encoded input and the vocabulary, and
/// is computed with integer hashing plus `libm`, so it is identical across
/// runs and platforms.
#[derive(Debug, Clone)]
pub struct MockBackend {
    tokenizer: WordPieceTokenizer,
    seed: u64,
    mode: MockMode,
    max_length: usize,
}

impl MockBackend {
    pub const DEFAULT_SCALE: f64 = 6.0;

    pub fn new(vocab: Arc<Vocab>, seed: u64) -> Self {
        Self {
            tokenizer: WordPieceTokenizer::new(vocab, true),
            seed,
            mode: MockMode::Hashed {
                scale: Self::DEFAULT_SCALE,
            },
            max_length: ModelDescriptor::default().max_length,
        }
    }

    /// Mock over a small built-in English vocabulary.
    pub fn builtin(seed: u64) -> Self {
        Self::new(Arc::new(builtin_vocab()), seed)
    }

    pub fn uniform(vocab: Arc<Vocab>) -> Self {
        Self::new(vocab, 0).with_mode(MockMode::Uniform)
    }

    pub fn with_mode(mut self, mode: MockMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_max_length(mut self, max_length: usize) -> Self {
        self.max_length = max_length;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn logits_for(&self, input: &EncodedInput) -> Vec<f64> {
        let n = self.tokenizer.vocab().len();
        match self.mode {
            MockMode::Uniform => vec![0.0; n],
            MockMode::Hashed { scale } => {
                let mut h = splitmix64(self.seed ^ 0x6a09_e667_f3bc_c908);
                for (&id, &ty) in input.ids.iter().zip(&input.type_ids) {
                    h = splitmix64(h ^ (u64::from(id) << 1 | u64::from(ty)));
                }
                h = splitmix64(h ^ input.position as u64);
                (0..n as u64)
                    .map(|t| {
                        let bits = splitmix64(h ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15)) >> 11;
                        let unit = bits as f64 / (1u64 << 53) as f64;
                        scale * (2.0 * unit - 1.0)
                    })
                    .collect()
            }
        }
    }
}

/// The vocabulary used by [`MockBackend::builtin`].
pub fn builtin_vocab() -> Vocab {
    Vocab::from_text(BUILTIN_VOCAB, &ModelDescriptor::default()).expect("built-in vocabulary is well formed")
}

impl MaskedLanguageModel for MockBackend {
    fn tokenizer(&self) -> &WordPieceTokenizer {
        &self.tokenizer
    }

    fn max_length(&self) -> usize {
        self.max_length
    }

    fn mask_logits(&self, batch: &[EncodedInput]) -> Result<Vec<Vec<f64>>> {
        Ok(batch.iter().map(|input| self.logits_for(input)).collect())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
