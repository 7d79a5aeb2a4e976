//! Substitution ranking: per-feature fractional ranks, averaged, and the best
//! average rank wins.

use std::sync::Arc;

use serde::Serialize;

use crate::candidates::{generate_candidates, Candidate, CandidateSet};
use crate::error::{Error, Result};
use crate::features::{score_candidates, FeatureScores};
use crate::mlm::MaskedLanguageModel;
use crate::resources::{EmbeddingTable, FrequencyTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    BertPrediction,
    LanguageModel,
    Similarity,
    Frequency,
}

impl Feature {
    pub const ALL: [Feature; 4] = [
        Feature::BertPrediction,
        Feature::LanguageModel,
        Feature::Similarity,
        Feature::Frequency,
    ];

    pub fn direction(self) -> Direction {
        match self {
            Feature::LanguageModel => Direction::LowerIsBetter,
            _ => Direction::HigherIsBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::BertPrediction => "bert",
            Feature::LanguageModel => "lm",
            Feature::Similarity => "similarity",
            Feature::Frequency => "frequency",
        }
    }

    /// The raw value of this feature, with a missing similarity mapped to the
    /// worst possible value.
    pub fn value(self, scores: &FeatureScores) -> f64 {
        match self {
            Feature::BertPrediction => scores.mlm_probability,
            Feature::LanguageModel => scores.lm_loss,
            Feature::Similarity => scores.similarity.unwrap_or(f64::NEG_INFINITY),
            Feature::Frequency => scores.frequency as f64,
        }
    }
}

/// Fractional ranks: 1 is best, tied scores share the mean of the positions
/// they cover.
pub fn rank_numbers(scores: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NanScore);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match direction {
        Direction::HigherIsBetter => scores[b].total_cmp(&scores[a]),
        Direction::LowerIsBetter => scores[a].total_cmp(&scores[b]),
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share their mean
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    Ok(ranks)
}

/// Per-feature ranks over one candidate list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankMatrix {
    pub features: Vec<Feature>,
    /// `ranks[f][c]`: rank of candidate `c` under `features[f]`.
    pub ranks: Vec<Vec<f64>>,
}

impl RankMatrix {
    pub fn from_scores(scores: &[FeatureScores], features: &[Feature]) -> Result<Self> {
        let ranks = features
            .iter()
            .map(|f| {
                let values: Vec<f64> = scores.iter().map(|s| f.value(s)).collect();
                rank_numbers(&values, f.direction())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            features: features.to_vec(),
            ranks,
        })
    }

    pub fn candidate_count(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }

    pub fn rank_of(&self, feature: Feature, candidate: usize) -> Option<f64> {
        let f = self.features.iter().position(|&g| g == feature)?;
        self.ranks[f].get(candidate).copied()
    }
}

/// Arithmetic mean of each candidate's ranks across features.
pub fn average_rank(matrix: &RankMatrix) -> Result<Vec<f64>> {
    if matrix.ranks.is_empty() || matrix.features.len() != matrix.ranks.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} features but {} rank rows",
            matrix.features.len(),
            matrix.ranks.len()
        )));
    }
    let n = matrix.candidate_count();
    if let Some(row) = matrix.ranks.iter().find(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!(
            "rank rows of length {n} and {}",
            row.len()
        )));
    }
    let features = matrix.ranks.len() as f64;
    Ok((0..n)
        .map(|c| matrix.ranks.iter().map(|row| row[c]).sum::<f64>() / features)
        .collect())
}

/// Index of the best candidate: lowest mean rank, then lowest rank under the
/// MLM-probability feature, then lowest vocabulary id.
pub fn select_best(candidates: &[Candidate], matrix: &RankMatrix, average: &[f64]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if average.len() != candidates.len() || matrix.candidate_count() != candidates.len() {
        return Err(Error::ShapeMismatch(
            "candidates, ranks and averages differ in length".into(),
        ));
    }
    let bert = |i: usize| matrix.rank_of(Feature::BertPrediction, i).unwrap_or(0.0);
    Ok((0..candidates.len())
        .min_by(|&a, &b| {
            average[a]
                .total_cmp(&average[b])
                .then(bert(a).total_cmp(&bert(b)))
                .then(candidates[a].id.cmp(&candidates[b].id))
        })
        .expect("non-empty"))
}

/// Recases `chosen` to follow `original`: all caps, title case, or lowercase.
pub fn restore_surface_form(chosen: &str, original: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    let all_caps = letters.len() > 1 && letters.iter().all(|c| c.is_uppercase());
    if all_caps {
        return chosen.to_uppercase();
    }
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = chosen.chars();
        return match chars.next() {
            Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
            None => String::new(),
        };
    }
    chosen.to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimplifyConfig {
    pub k: usize,
    pub window_half_width: usize,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        Self {
            k: 10,
            window_half_width: 5,
        }
    }
}

/// Everything `simplify` reads. Tables may be empty, in which case the
/// corresponding feature ties for every candidate.
#[derive(Clone)]
pub struct Resources {
    pub backend: Arc<dyn MaskedLanguageModel>,
    pub embeddings: EmbeddingTable,
    pub frequencies: Vec<FrequencyTable>,
}

impl Resources {
    pub fn new(backend: Arc<dyn MaskedLanguageModel>) -> Self {
        Self {
            backend,
            embeddings: EmbeddingTable::new(1),
            frequencies: Vec::new(),
        }
    }

    pub fn with_embeddings(mut self, embeddings: EmbeddingTable) -> Self {
        self.embeddings = embeddings;
        self
    }

    pub fn with_frequencies(mut self, frequencies: Vec<FrequencyTable>) -> Self {
        self.frequencies = frequencies;
        self
    }
}

/// The outcome of ranking one candidate set, with the full rank report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replacement {
    /// The target as written in the sentence.
    pub original: String,
    /// The winning candidate, recased like `original`.
    pub chosen: String,
    pub candidates: Vec<Candidate>,
    pub scores: Vec<FeatureScores>,
    pub ranks: RankMatrix,
    pub average_ranks: Vec<f64>,
    pub best: usize,
}

/// Ranks already-scored candidates and picks the best one.
pub fn rank_candidates(original: &str, set: &CandidateSet, scores: Vec<FeatureScores>) -> Result<Replacement> {
    if set.is_empty() {
        return Err(Error::NoCandidates);
    }
    if scores.len() != set.len() {
        return Err(Error::CountMismatch {
            what: "feature scores",
            expected: set.len(),
            got: scores.len(),
        });
    }
    let ranks = RankMatrix::from_scores(&scores, &Feature::ALL)?;
    let average_ranks = average_rank(&ranks)?;
    let best = select_best(&set.candidates, &ranks, &average_ranks)?;
    Ok(Replacement {
        original: original.to_string(),
        chosen: restore_surface_form(&set.candidates[best].token, original),
        candidates: set.candidates.clone(),
        scores,
        ranks,
        average_ranks,
        best,
    })
}

/// Candidate set and feature scores for one target, before ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub original: String,
    pub set: CandidateSet,
    pub scores: Vec<FeatureScores>,
}

impl ScoredCandidates {
    /// Ranking restricted to the first `k` candidates. Features are
    /// per-candidate, so this equals a fresh run with that `k`.
    pub fn rank_top(&self, k: usize) -> Result<Replacement> {
        let set = self.set.truncated(k);
        let scores = self.scores.iter().take(set.len()).cloned().collect();
        rank_candidates(&self.original, &set, scores)
    }
}

/// Generates and scores candidates for word `target_word_index` of `sentence`.
pub fn score_target(
    sentence: &str,
    target_word_index: usize,
    config: &SimplifyConfig,
    resources: &Resources,
) -> Result<ScoredCandidates> {
    if config.window_half_width == 0 {
        return Err(Error::MalformedInput("window half-width must be at least 1".into()));
    }
    let backend = resources.backend.as_ref();
    let seq = backend.tokenize(sentence)?;
    let original = seq
        .words
        .get(target_word_index)
        .ok_or(Error::WordIndexOutOfRange {
            index: target_word_index,
            len: seq.word_count(),
        })?
        .surface
        .clone();
    let set = generate_candidates(sentence, target_word_index, config.k, backend)?;
    let words = seq.normalized_words();
    let scores = score_candidates(
        &words,
        target_word_index,
        &set,
        config.window_half_width,
        backend,
        &resources.embeddings,
        &resources.frequencies,
    )?;
    Ok(ScoredCandidates { original, set, scores })
}

/// Replaces word `target_word_index` of `sentence` with its best-ranked
/// candidate.
pub fn simplify(
    sentence: &str,
    target_word_index: usize,
    config: &SimplifyConfig,
    resources: &Resources,
) -> Result<Replacement> {
    let scored = score_target(sentence, target_word_index, config, resources)?;
    rank_candidates(&scored.original, &scored.set, scored.scores)
}
