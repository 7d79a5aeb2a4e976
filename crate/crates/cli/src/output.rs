//! Output records. With `--json` every line of standard output is one JSON
//! object whose `record` field names its kind.

use std::fmt::Write as _;

use lexsimp::candidates::CandidateSet;
use lexsimp::evaluation::{Evaluation, InstanceRecord, SweepRow};
use lexsimp::ranking::{Feature, Replacement};
use serde::Serialize;

#[derive(Serialize)]
pub struct RankRow {
    pub bert: f64,
    pub language_model: f64,
    pub similarity: f64,
    pub frequency: f64,
}

#[derive(Serialize)]
pub struct ScoredCandidateRecord {
    pub token: String,
    pub id: u32,
    pub mlm_probability: f64,
    pub lm_loss: f64,
    pub similarity: Option<f64>,
    pub frequency: u64,
    pub ranks: RankRow,
    pub average_rank: f64,
}

#[derive(Serialize)]
pub struct ReplacementRecord {
    pub sentence: String,
    pub target: String,
    pub word_index: usize,
    pub chosen: String,
    pub candidates: Vec<ScoredCandidateRecord>,
}

#[derive(Serialize)]
pub struct CandidateRecord<'a> {
    pub rank: usize,
    pub token: &'a str,
    pub id: u32,
    pub probability: f64,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum Record<'a> {
    Replacement(ReplacementRecord),
    Candidate(CandidateRecord<'a>),
    Instance(&'a InstanceRecord),
    Summary(&'a lexsimp::evaluation::EvaluationSummary),
    Sweep(&'a SweepRow),
}

impl Record<'_> {
    pub fn line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

pub fn replacement_record(sentence: &str, word_index: usize, r: &Replacement) -> ReplacementRecord {
    let rank = |f: Feature, i: usize| r.ranks.rank_of(f, i).unwrap_or(f64::NAN);
    ReplacementRecord {
        sentence: sentence.to_string(),
        target: r.original.clone(),
        word_index,
        chosen: r.chosen.clone(),
        candidates: r
            .candidates
            .iter()
            .zip(&r.scores)
            .enumerate()
            .map(|(i, (c, s))| ScoredCandidateRecord {
                token: c.token.clone(),
                id: c.id,
                mlm_probability: s.mlm_probability,
                lm_loss: s.lm_loss,
                similarity: s.similarity,
                frequency: s.frequency,
                ranks: RankRow {
                    bert: rank(Feature::BertPrediction, i),
                    language_model: rank(Feature::LanguageModel, i),
                    similarity: rank(Feature::Similarity, i),
                    frequency: rank(Feature::Frequency, i),
                },
                average_rank: r.average_ranks[i],
            })
            .collect(),
    }
}

pub fn replacement_table(record: &ReplacementRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sentence: {}", record.sentence);
    let _ = writeln!(out, "target:   {} (word {})", record.target, record.word_index);
    let _ = writeln!(out, "chosen:   {}", record.chosen);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<16} {:>10} {:>9} {:>8} {:>9}   {:>5} {:>5} {:>5} {:>5} {:>6}",
        "candidate", "mlm_prob", "lm_loss", "cosine", "freq", "r_mlm", "r_lm", "r_cos", "r_frq", "mean"
    );
    for c in &record.candidates {
        let sim = c.similarity.map_or_else(|| "-".to_string(), |s| format!("{s:.4}"));
        let _ = writeln!(
            out,
            "{:<16} {:>10.6} {:>9.4} {:>8} {:>9}   {:>5} {:>5} {:>5} {:>5} {:>6.3}",
            c.token,
            c.mlm_probability,
            c.lm_loss,
            sim,
            c.frequency,
            c.ranks.bert,
            c.ranks.language_model,
            c.ranks.similarity,
            c.ranks.frequency,
            c.average_rank
        );
    }
    out
}

pub fn candidate_lines(set: &CandidateSet, json: bool) -> String {
    let mut out = String::new();
    for (i, c) in set.candidates.iter().enumerate() {
        if json {
            let record = Record::Candidate(CandidateRecord {
                rank: i + 1,
                token: &c.token,
                id: c.id,
                probability: c.mlm_probability,
            });
            out.push_str(&record.line());
        } else {
            let _ = write!(out, "{}\t{:.6}", c.token, c.mlm_probability);
        }
        out.push('\n');
    }
    out
}

pub fn evaluation_text(eval: &Evaluation, json: bool) -> String {
    let mut out = String::new();
    if json {
        for r in &eval.records {
            out.push_str(&Record::Instance(r).line());
            out.push('\n');
        }
        out.push_str(&Record::Summary(&eval.summary).line());
        out.push('\n');
        return out;
    }
    let s = &eval.summary;
    let _ = writeln!(out, "instances            {}", s.instances);
    let _ = writeln!(out, "k                    {}", s.k);
    let _ = writeln!(out, "candidate precision  {:.4}", s.candidate_precision);
    let _ = writeln!(out, "candidate recall     {:.4}", s.candidate_recall);
    let _ = writeln!(out, "candidate F1         {:.4}", s.candidate_f1);
    let _ = writeln!(out, "pipeline precision   {:.4}", s.pipeline_precision);
    let _ = writeln!(out, "pipeline accuracy    {:.4}", s.pipeline_accuracy);
    out
}

pub fn sweep_text(rows: &[SweepRow], json: bool) -> String {
    if !json {
        return lexsimp::evaluation::render_sweep_table(rows);
    }
    let mut out = String::new();
    for row in rows {
        out.push_str(&Record::Sweep(row).line());
        out.push('\n');
    }
    out
}
