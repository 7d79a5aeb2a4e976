//! Benchmark loading and scoring.
//!
//! Dataset files are tab separated: sentence, target word, 0-based
//! whitespace-token index of the target, then one field per gold
//! substitution, optionally prefixed with a rank as in `2:feline`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlm::WordPieceTokenizer;
use crate::ranking::{score_target, Replacement, Resources, ScoredCandidates, SimplifyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// Also accepts a leading `Sentence<TAB>Word...` header line.
    LexMTurk,
    /// BenchLS and its filtered subset NNSeval.
    BenchLs,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lexmturk" => Ok(DatasetFormat::LexMTurk),
            "benchls" | "nnseval" => Ok(DatasetFormat::BenchLs),
            other => Err(format!(
                "unknown dataset format '{other}' (expected lexmturk or benchls)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimplificationInstance {
    pub sentence: String,
    pub target: String,
    /// 0-based index into the whitespace-separated tokens of `sentence`.
    pub target_index: usize,
    /// Lowercased, deduplicated, in file order.
    pub gold: Vec<String>,
}

impl SimplificationInstance {
    pub fn is_gold(&self, word: &str) -> bool {
        let word = word.to_lowercase();
        self.gold.contains(&word)
    }

    /// Index of the target among the tokenizer's words (which split off
    /// punctuation), for use with the pipeline.
    pub fn word_index(&self, tokenizer: &WordPieceTokenizer) -> Result<usize> {
        let words = tokenizer.pre_tokenize(&self.sentence);
        let target = tokenizer.pre_tokenize(&self.target);
        let matched = words.iter().position(|w| {
            w.whitespace_index == self.target_index && target.first().is_some_and(|t| t.normalized == w.normalized)
        });
        matched
            .or_else(|| tokenizer.word_for_whitespace_index(&self.sentence, self.target_index))
            .ok_or_else(|| Error::TargetNotFound(self.target.clone()))
    }
}

fn strip_rank(field: &str) -> &str {
    match field.split_once(':') {
        Some((rank, word)) if !rank.is_empty() && rank.chars().all(|c| c.is_ascii_digit()) => word,
        _ => field,
    }
}

fn trim_punct(s: &str) -> &str {
    s.trim_matches(|c: char| !c.is_alphanumeric())
}

fn resolve_index(sentence: &str, target: &str, index: usize) -> Option<usize> {
    let tokens: Vec<&str> = sentence.split_whitespace().collect();
    if tokens
        .get(index)
        .is_some_and(|t| t.eq_ignore_ascii_case(target) || t.to_lowercase() == target.to_lowercase())
    {
        return Some(index);
    }
    let lower = target.to_lowercase();
    tokens.iter().position(|t| t.to_lowercase() == lower).or_else(|| {
        tokens
            .iter()
            .position(|t| trim_punct(&t.to_lowercase()) == trim_punct(&lower))
    })
}

pub fn parse_dataset<R: BufRead>(
    reader: R,
    format: DatasetFormat,
    source_name: &str,
) -> Result<Vec<SimplificationInstance>> {
    let mut instances = Vec::new();
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if first && format == DatasetFormat::LexMTurk && fields[0].trim().eq_ignore_ascii_case("sentence") {
            first = false;
            continue;
        }
        first = false;
        if fields.len() < 4 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!(
                    "expected sentence, target, index and at least one substitution; found {} fields",
                    fields.len()
                ),
            ));
        }
        let sentence = fields[0].trim().to_string();
        let target = fields[1].trim().to_string();
        if sentence.is_empty() || target.is_empty() {
            return Err(Error::parse(source_name, line_no, "empty sentence or target"));
        }
        let index: usize = fields[2].trim().parse().map_err(|_| {
            Error::parse(
                source_name,
                line_no,
                format!("target index '{}' is not a non-negative integer", fields[2]),
            )
        })?;
        let mut gold: Vec<String> = Vec::new();
        for field in &fields[3..] {
            let word = strip_rank(field.trim()).trim().to_lowercase();
            if !word.is_empty() && !gold.contains(&word) {
                gold.push(word);
            }
        }
        if gold.is_empty() {
            return Err(Error::parse(source_name, line_no, "no gold substitutions"));
        }
        let target_index = match resolve_index(&sentence, &target, index) {
            Some(found) if found == index => index,
            Some(found) => {
                log::warn!(
                    "{source_name}:{line_no}: token {index} is not '{target}', using its first occurrence at {found}"
                );
                found
            }
            None => {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("target '{target}' does not occur in the sentence"),
                ));
            }
        };
        instances.push(SimplificationInstance {
            sentence,
            target,
            target_index,
            gold,
        });
    }
    Ok(instances)
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<SimplificationInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let instances = parse_dataset(BufReader::new(file), format, &path.display().to_string())?;
    if instances.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Ok(instances)
}

/// Writes instances in the ranked-substitution layout read by
/// [`parse_dataset`].
pub fn write_dataset<W: Write>(instances: &[SimplificationInstance], mut out: W) -> io::Result<()> {
    for inst in instances {
        write!(out, "{}\t{}\t{}", inst.sentence, inst.target, inst.target_index)?;
        for (rank, g) in inst.gold.iter().enumerate() {
            write!(out, "\t{}:{}", rank + 1, g)?;
        }
        writeln!(out)?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDetail {
    pub generated: usize,
    pub matched: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateEvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub instances: Vec<CandidateDetail>,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro-averaged candidate precision, recall and F1.
pub fn eval_candidates(instances: &[SimplificationInstance], generated: &[Vec<String>]) -> Result<CandidateEvalReport> {
    if instances.len() != generated.len() {
        return Err(Error::CountMismatch {
            what: "candidate sets",
            expected: instances.len(),
            got: generated.len(),
        });
    }
    let mut details = Vec::with_capacity(instances.len());
    let (mut matched, mut total_generated, mut total_gold) = (0, 0, 0);
    for (inst, words) in instances.iter().zip(generated) {
        let unique: HashSet<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let hits = unique.iter().filter(|w| inst.is_gold(w)).count();
        matched += hits;
        total_generated += unique.len();
        total_gold += inst.gold.len();
        details.push(CandidateDetail {
            generated: unique.len(),
            matched: hits,
            gold: inst.gold.len(),
        });
    }
    let precision = ratio(matched, total_generated);
    let recall = ratio(matched, total_gold);
    Ok(CandidateEvalReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        instances: details,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineEvalReport {
    /// Share of instances whose replacement is the original word or gold.
    pub precision: f64,
    /// Share of instances whose replacement differs from the original and is gold.
    pub accuracy: f64,
    pub chosen: Vec<String>,
}

pub fn eval_pipeline(instances: &[SimplificationInstance], chosen: &[String]) -> Result<PipelineEvalReport> {
    if instances.len() != chosen.len() {
        return Err(Error::CountMismatch {
            what: "replacements",
            expected: instances.len(),
            got: chosen.len(),
        });
    }
    let (mut precise, mut accurate) = (0, 0);
    for (inst, word) in instances.iter().zip(chosen) {
        let same = word.to_lowercase() == inst.target.to_lowercase();
        let gold = inst.is_gold(word);
        if same || gold {
            precise += 1;
        }
        if !same && gold {
            accurate += 1;
        }
    }
    Ok(PipelineEvalReport {
        precision: ratio(precise, instances.len()),
        accuracy: ratio(accurate, instances.len()),
        chosen: chosen.to_vec(),
    })
}

/// Candidates and scores for every instance, in instance order. Instances are
/// processed in parallel on the current rayon pool.
pub fn score_instances(
    instances: &[SimplificationInstance],
    config: &SimplifyConfig,
    resources: &Resources,
) -> Result<Vec<ScoredCandidates>> {
    let tokenizer = resources.backend.tokenizer();
    instances
        .par_iter()
        .map(|inst| {
            let index = inst.word_index(tokenizer)?;
            score_target(&inst.sentence, index, config, resources)
        })
        .collect()
}

/// Per-instance output of a full evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub sentence: String,
    pub target: String,
    pub candidates: Vec<String>,
    pub matched: usize,
    pub chosen: String,
    pub chosen_in_gold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub instances: usize,
    pub k: usize,
    pub candidate_precision: f64,
    pub candidate_recall: f64,
    pub candidate_f1: f64,
    pub pipeline_precision: f64,
    pub pipeline_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub candidates: CandidateEvalReport,
    pub pipeline: PipelineEvalReport,
    pub records: Vec<InstanceRecord>,
    pub summary: EvaluationSummary,
}

/// Metrics and records for candidates already scored at `k` or more.
pub fn evaluate_scored(
    instances: &[SimplificationInstance],
    scored: &[ScoredCandidates],
    k: usize,
) -> Result<Evaluation> {
    let replacements: Vec<Replacement> = scored.iter().map(|s| s.rank_top(k)).collect::<Result<_>>()?;
    let generated: Vec<Vec<String>> = scored.iter().map(|s| s.set.truncated(k).words()).collect();
    let chosen: Vec<String> = replacements.iter().map(|r| r.chosen.clone()).collect();
    let candidates = eval_candidates(instances, &generated)?;
    let pipeline = eval_pipeline(instances, &chosen)?;
    let records = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| InstanceRecord {
            index: i,
            sentence: inst.sentence.clone(),
            target: inst.target.clone(),
            candidates: generated[i].clone(),
            matched: candidates.instances[i].matched,
            chosen: chosen[i].clone(),
            chosen_in_gold: inst.is_gold(&chosen[i]),
        })
        .collect();
    let summary = EvaluationSummary {
        instances: instances.len(),
        k,
        candidate_precision: candidates.precision,
        candidate_recall: candidates.recall,
        candidate_f1: candidates.f1,
        pipeline_precision: pipeline.precision,
        pipeline_accuracy: pipeline.accuracy,
    };
    Ok(Evaluation {
        candidates,
        pipeline,
        records,
        summary,
    })
}

/// Runs generation and the full pipeline over a dataset.
pub fn evaluate(
    instances: &[SimplificationInstance],
    config: &SimplifyConfig,
    resources: &Resources,
) -> Result<Evaluation> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset("no instances".into()));
    }
    let scored = score_instances(instances, config, resources)?;
    evaluate_scored(instances, &scored, config.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Candidate metrics and pipeline accuracy for each `k` in `ks`.
///
/// Candidates are scored once at the largest `k`; each row ranks the first
/// `k` of them, which is what a separate run with that `k` produces.
pub fn sweep_k(
    instances: &[SimplificationInstance],
    ks: RangeInclusive<usize>,
    config: &SimplifyConfig,
    resources: &Resources,
) -> Result<Vec<SweepRow>> {
    if *ks.start() == 0 || ks.is_empty() {
        return Err(Error::ZeroK);
    }
    if instances.is_empty() {
        return Err(Error::EmptyDataset("no instances".into()));
    }
    let widest = SimplifyConfig {
        k: *ks.end(),
        ..*config
    };
    let scored = score_instances(instances, &widest, resources)?;
    sweep_scored(instances, &scored, ks)
}

/// [`sweep_k`] over candidates already scored at the largest `k`.
pub fn sweep_scored(
    instances: &[SimplificationInstance],
    scored: &[ScoredCandidates],
    ks: RangeInclusive<usize>,
) -> Result<Vec<SweepRow>> {
    if *ks.start() == 0 || ks.is_empty() {
        return Err(Error::ZeroK);
    }
    ks.map(|k| {
        let e = evaluate_scored(instances, scored, k)?;
        Ok(SweepRow {
            k,
            precision: e.summary.candidate_precision,
            recall: e.summary.candidate_recall,
            f1: e.summary.candidate_f1,
            accuracy: e.summary.pipeline_accuracy,
        })
    })
    .collect()
}

/// Tab-separated sweep table with a header row.
pub fn render_sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("k\tprecision\trecall\tf1\taccuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.k, r.precision, r.recall, r.f1, r.accuracy
        );
    }
    out
}
