//! WordPiece tokenization for BERT-style vocabularies.
//!
//! Text is split on whitespace, then punctuation and CJK ideographs become
//! words of their own. Each word is lowercased with accents stripped and
//! broken into the longest vocabulary prefixes, continuation pieces carrying
//! the `##` marker. A word with no complete segmentation becomes the unknown
//! token.

use std::sync::Arc;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::vocab::Vocab;
use crate::error::{Error, Result};

pub const CONTINUATION_PREFIX: &str = "##";

const MAX_CHARS_PER_WORD: usize = 100;

/// One pre-tokenized word of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    /// The word as it appeared in the input text.
    pub surface: String,
    /// Lowercased, accent-stripped form used for lookup.
    pub normalized: String,
    /// Index of the whitespace-separated field the word came from.
    pub whitespace_index: usize,
}

/// Subword tokens of a sentence together with the span of each word.
///
/// `word_boundaries[i]` is the half-open token range of `words[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub word_boundaries: Vec<(usize, usize)>,
    pub words: Vec<Word>,
}

impl TokenSequence {
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn span(&self, word_index: usize) -> Result<(usize, usize)> {
        self.word_boundaries
            .get(word_index)
            .copied()
            .ok_or(Error::WordIndexOutOfRange {
                index: word_index,
                len: self.words.len(),
            })
    }

    pub fn normalized_words(&self) -> Vec<String> {
        self.words.iter().map(|w| w.normalized.clone()).collect()
    }

    /// Keeps only words `lo..hi`, re-basing the spans.
    pub(crate) fn slice_words(&self, lo: usize, hi: usize) -> TokenSequence {
        let start = self.word_boundaries[lo].0;
        let end = self.word_boundaries[hi - 1].1;
        TokenSequence {
            tokens: self.tokens[start..end].to_vec(),
            word_boundaries: self.word_boundaries[lo..hi]
                .iter()
                .map(|&(s, e)| (s - start, e - start))
                .collect(),
            words: self.words[lo..hi].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WordPieceTokenizer {
    vocab: Arc<Vocab>,
    lowercase: bool,
}

impl WordPieceTokenizer {
    pub fn new(vocab: Arc<Vocab>, lowercase: bool) -> Self {
        Self { vocab, lowercase }
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        let words = self.pre_tokenize(text);
        if words.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut tokens = Vec::new();
        let mut word_boundaries = Vec::with_capacity(words.len());
        for word in &words {
            let start = tokens.len();
            tokens.extend(self.word_pieces(&word.normalized));
            word_boundaries.push((start, tokens.len()));
        }
        Ok(TokenSequence {
            tokens,
            word_boundaries,
            words,
        })
    }

    /// Splits `text` into words without applying WordPiece.
    pub fn pre_tokenize(&self, text: &str) -> Vec<Word> {
        let mut words = Vec::new();
        for (whitespace_index, field) in text.split_whitespace().enumerate() {
            if self.is_special_token(field) {
                words.push(Word {
                    surface: field.to_string(),
                    normalized: field.to_string(),
                    whitespace_index,
                });
                continue;
            }
            let mut current = String::new();
            let flush = |current: &mut String, words: &mut Vec<Word>| {
                if current.is_empty() {
                    return;
                }
                let surface = std::mem::take(current);
                let normalized = self.normalize(&surface);
                if !normalized.is_empty() {
                    words.push(Word {
                        surface,
                        normalized,
                        whitespace_index,
                    });
                }
            };
            for ch in field.chars() {
                if ch == '\u{0}' || ch == '\u{fffd}' || is_format_or_control(ch) {
                    continue;
                }
                if is_punctuation(ch) || is_cjk(ch) {
                    flush(&mut current, &mut words);
                    current.push(ch);
                    flush(&mut current, &mut words);
                } else {
                    current.push(ch);
                }
            }
            flush(&mut current, &mut words);
        }
        words
    }

    /// Index of the first word of `text` that normalizes like `word`.
    pub fn find_word(&self, text: &str, word: &str) -> Option<usize> {
        let wanted = self.normalize(word.trim());
        if wanted.is_empty() {
            return None;
        }
        self.pre_tokenize(text).iter().position(|w| w.normalized == wanted)
    }

    /// Index of the word for whitespace token `whitespace_index`, skipping
    /// punctuation split off that token.
    pub fn word_for_whitespace_index(&self, text: &str, whitespace_index: usize) -> Option<usize> {
        let words = self.pre_tokenize(text);
        let mut in_field = words
            .iter()
            .enumerate()
            .filter(|(_, w)| w.whitespace_index == whitespace_index);
        let first = in_field.clone().next()?.0;
        Some(
            in_field
                .find(|(_, w)| w.normalized.chars().any(char::is_alphanumeric))
                .map_or(first, |(i, _)| i),
        )
    }

    /// WordPiece segmentation of one already-normalized word.
    pub fn word_pieces(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_CHARS_PER_WORD {
            return vec![self.vocab.unk_token().to_string()];
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut piece: String = chars[start..end].iter().collect();
                if start > 0 {
                    piece.insert_str(0, CONTINUATION_PREFIX);
                }
                if self.vocab.id(&piece).is_some() {
                    found = Some(piece);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(piece) => {
                    pieces.push(piece);
                    start = end;
                }
                None => return vec![self.vocab.unk_token().to_string()],
            }
        }
        pieces
    }

    /// Tokens of a single word, normalizing it first.
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        if self.is_special_token(word) {
            return vec![word.to_string()];
        }
        self.word_pieces(&self.normalize(word))
    }

    /// Joins tokens back into text, merging continuation pieces.
    pub fn detokenize(&self, tokens: &[String]) -> String {
        let mut out = String::new();
        for token in tokens {
            match token.strip_prefix(CONTINUATION_PREFIX) {
                Some(rest) if !out.is_empty() => out.push_str(rest),
                _ => {
                    if !out.is_empty() {
                        out.push(' ');
                    }
                    out.push_str(token);
                }
            }
        }
        out
    }

    fn normalize(&self, word: &str) -> String {
        if !self.lowercase {
            return word.to_string();
        }
        word.to_lowercase().nfd().filter(|c| !is_combining_mark(*c)).collect()
    }

    fn is_special_token(&self, s: &str) -> bool {
        self.vocab.id(s).is_some_and(|id| self.vocab.is_special_id(id))
    }
}

fn is_format_or_control(ch: char) -> bool {
    if ch == '\t' || ch == '\n' || ch == '\r' {
        return false;
    }
    ch.is_control()
        || matches!(ch, '\u{ad}' | '\u{200b}'..='\u{200f}' | '\u{202a}'..='\u{202e}' | '\u{2060}'..='\u{2064}' | '\u{feff}')
}

// ASCII symbols count as punctuation, as in the reference BERT tokenizer.
// Non-ASCII coverage is the common Unicode punctuation blocks.
fn is_punctuation(ch: char) -> bool {
    if ch.is_ascii() {
        return ch.is_ascii_punctuation();
    }
    matches!(ch,
        '\u{a1}' | '\u{a7}' | '\u{ab}' | '\u{b6}' | '\u{b7}' | '\u{bb}' | '\u{bf}'
        | '\u{37e}' | '\u{387}'
        | '\u{55a}'..='\u{55f}' | '\u{589}' | '\u{58a}'
        | '\u{5be}' | '\u{5c0}' | '\u{5c3}' | '\u{5c6}' | '\u{5f3}' | '\u{5f4}'
        | '\u{60c}' | '\u{60d}' | '\u{61b}' | '\u{61f}' | '\u{66a}'..='\u{66d}' | '\u{6d4}'
        | '\u{964}' | '\u{965}' | '\u{970}'
        | '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{2043}' | '\u{2045}'..='\u{2051}' | '\u{2053}'..='\u{205e}'
        | '\u{207d}' | '\u{207e}' | '\u{208d}' | '\u{208e}'
        | '\u{2308}'..='\u{230b}' | '\u{2329}' | '\u{232a}'
        | '\u{2768}'..='\u{2775}' | '\u{27c5}' | '\u{27c6}' | '\u{27e6}'..='\u{27ef}'
        | '\u{2983}'..='\u{2998}' | '\u{29d8}'..='\u{29db}' | '\u{29fc}' | '\u{29fd}'
        | '\u{2e00}'..='\u{2e4f}'
        | '\u{3001}'..='\u{3003}' | '\u{3008}'..='\u{3011}' | '\u{3014}'..='\u{301f}' | '\u{3030}' | '\u{303d}'
        | '\u{30a0}' | '\u{30fb}'
        | '\u{fe10}'..='\u{fe19}' | '\u{fe30}'..='\u{fe52}' | '\u{fe54}'..='\u{fe61}' | '\u{fe63}' | '\u{fe68}' | '\u{fe6a}' | '\u{fe6b}'
        | '\u{ff01}'..='\u{ff03}' | '\u{ff05}'..='\u{ff0a}' | '\u{ff0c}'..='\u{ff0f}' | '\u{ff1a}' | '\u{ff1b}' | '\u{ff1f}' | '\u{ff20}'
        | '\u{ff3b}'..='\u{ff3d}' | '\u{ff3f}' | '\u{ff5b}' | '\u{ff5d}' | '\u{ff5f}'..='\u{ff65}'
    )
}

fn is_cjk(ch: char) -> bool {
    matches!(ch,
        '\u{4e00}'..='\u{9fff}'
        | '\u{3400}'..='\u{4dbf}'
        | '\u{20000}'..='\u{2a6df}'
        | '\u{2a700}'..='\u{2b73f}'
        | '\u{2b740}'..='\u{2b81f}'
        | '\u{2b820}'..='\u{2ceaf}'
        | '\u{f900}'..='\u{faff}'
        | '\u{2f800}'..='\u{2fa1f}'
    )
}
