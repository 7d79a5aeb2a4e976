//! Library results against independent brute-force recomputations.

mod common;

use std::collections::HashMap;

use common::{candidate_oracle, crafted_instances, pipeline_oracle};

use lexsimp::evaluation::{eval_candidates, eval_pipeline};
use lexsimp::ranking::{average_rank, rank_numbers, Direction, Feature, RankMatrix};
use lexsimp::resources::{build_frequency_table, cosine, EmbeddingTable};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ranks by sorting (value, index) pairs and averaging over runs of equal values.
fn sort_oracle(scores: &[f64], higher_better: bool) -> Vec<f64> {
    let mut pairs: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if higher_better {
        pairs.reverse();
    }
    let mut out = vec![0.0; scores.len()];
    let mut start = 0;
    while start < pairs.len() {
        let end = (start..pairs.len())
            .find(|&e| pairs[e].0 != pairs[start].0)
            .unwrap_or(pairs.len());
        let positions: Vec<f64> = (start + 1..=end).map(|p| p as f64).collect();
        let mean = positions.iter().sum::<f64>() / positions.len() as f64;
        for p in &pairs[start..end] {
            out[p.1] = mean;
        }
        start = end;
    }
    out
}

#[test]
fn rank_numbers_equals_sort_oracle_on_random_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..20 {
        // coarse values in some rounds so ties occur
        let scores: Vec<f64> = (0..100)
            .map(|_| {
                if round % 2 == 0 {
                    rng.random_range(0..20) as f64
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        assert_eq!(
            rank_numbers(&scores, Direction::HigherIsBetter).unwrap(),
            sort_oracle(&scores, true)
        );
        assert_eq!(
            rank_numbers(&scores, Direction::LowerIsBetter).unwrap(),
            sort_oracle(&scores, false)
        );
    }
}

#[test]
fn average_rank_equals_direct_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ranks: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let scores: Vec<f64> = (0..10).map(|_| rng.random_range(0..6) as f64).collect();
            sort_oracle(&scores, true)
        })
        .collect();
    let matrix = RankMatrix {
        features: Feature::ALL.to_vec(),
        ranks: ranks.clone(),
    };
    let got = average_rank(&matrix).unwrap();
    for c in 0..10 {
        let expected = (ranks[0][c] + ranks[1][c] + ranks[2][c] + ranks[3][c]) / 4.0;
        assert!((got[c] - expected).abs() < 1e-12);
    }
}

#[test]
fn candidate_metrics_equal_set_intersection_oracle() {
    let (instances, generated, _) = crafted_instances();
    let (p, r, f) = candidate_oracle(&instances, &generated);
    let report = eval_candidates(&instances, &generated).unwrap();
    assert_eq!(report.precision, p);
    assert_eq!(report.recall, r);
    assert_eq!(report.f1, f);
}

#[test]
fn pipeline_metrics_equal_oracle() {
    let (instances, _, chosen) = crafted_instances();
    let (precision, accuracy) = pipeline_oracle(&instances, &chosen);
    let report = eval_pipeline(&instances, &chosen).unwrap();
    assert_eq!(report.precision, precision);
    assert_eq!(report.accuracy, accuracy);
    assert!(report.accuracy <= report.precision);
}

/// Character-by-character recount with its own tokenization.
fn naive_counts(text: &str) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    let mut current = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            *counts.entry(std::mem::take(&mut current)).or_insert(0) += 1;
        }
    }
    counts
}

#[test]
fn frequency_table_equals_naive_recount_on_1mb_corpus() {
    let words = [
        "the", "Cat", "SAT", "on", "mat", "naïve", "Straße", "x1", "42", "über", "déjà",
    ];
    let seps = [" ", ", ", ". ", " -- ", "'", "\t", "!  "];
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut text = String::new();
    while text.len() < 1 << 20 {
        let n = rng.random_range(1..20);
        for _ in 0..n {
            text.push_str(words.choose(&mut rng).unwrap());
            text.push_str(seps.choose(&mut rng).unwrap());
        }
        text.push('\n');
    }
    let table = build_frequency_table(text.as_bytes(), None, "sample").unwrap();
    let oracle = naive_counts(&text);
    assert_eq!(table.len(), oracle.len());
    for (w, n) in &oracle {
        assert_eq!(table.count(w), *n, "{w}");
    }
    assert_eq!(table.total(), oracle.values().sum::<u64>());
}

#[test]
fn cosine_equals_direct_formula_on_toy_table() {
    let vectors = [
        ("sun", [0.5f32, 1.25, -2.0]),
        ("moon", [1.0, 0.0, 3.5]),
        ("star", [-0.75, 2.0, 0.25]),
    ];
    let mut table = EmbeddingTable::new(3);
    for (w, v) in &vectors {
        table.insert(*w, v.to_vec()).unwrap();
    }
    for (a, va) in &vectors {
        for (b, vb) in &vectors {
            let dot: f64 = va.iter().zip(vb).map(|(x, y)| *x as f64 * *y as f64).sum();
            let na: f64 = va.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            let nb: f64 = vb.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            let got = table.similarity(a, b).unwrap();
            assert!((got - dot / (na * nb)).abs() < 1e-12, "{a} {b}");
            assert_eq!(Some(got), cosine(va, vb));
        }
    }
}
