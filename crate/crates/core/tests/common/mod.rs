#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lexsimp::evaluation::{load_dataset, DatasetFormat, SimplificationInstance};
use lexsimp::mlm::MockBackend;
use lexsimp::ranking::Resources;
use lexsimp::resources::{load_embeddings, load_frequency_table};

pub const MOCK_SEED: u64 = 7;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn mock_dir() -> PathBuf {
    fixtures().join("mock")
}

pub fn mock_dataset() -> Vec<SimplificationInstance> {
    load_dataset(&mock_dir().join("dataset.tsv"), DatasetFormat::LexMTurk).unwrap()
}

pub fn mock_resources() -> Resources {
    let dir = mock_dir();
    Resources::new(Arc::new(MockBackend::builtin(MOCK_SEED)))
        .with_embeddings(load_embeddings(&dir.join("embeddings.vec"), None).unwrap())
        .with_frequencies(vec![load_frequency_table(&dir.join("freq.tsv")).unwrap()])
}

/// Compares `actual` with a golden file, rewriting it instead when
/// `LEXSIMP_BLESS` is set.
pub fn check_golden(path: &Path, actual: &str) {
    if std::env::var_os("LEXSIMP_BLESS").is_some() {
        std::fs::write(path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {}", path.display());
}

use lexsimp::candidates::{Candidate, CandidateSet};
use lexsimp::features::FeatureScores;
use lexsimp::ranking::{average_rank, rank_candidates, select_best, Feature, RankMatrix};
use rand::Rng;

/// Random feature scores on a coarse grid, so ties are common and monotone
/// transforms stay exact.
pub fn random_scores<R: Rng>(rng: &mut R, n: usize) -> (CandidateSet, Vec<FeatureScores>) {
    let candidates = (0..n)
        .map(|i| Candidate {
            token: format!("w{i}"),
            id: 10 + rng.random_range(0..1000) * 16 + i as u32,
            mlm_probability: rng.random_range(1..=16) as f64 / 64.0,
        })
        .collect::<Vec<_>>();
    let scores = candidates
        .iter()
        .map(|c| FeatureScores {
            mlm_probability: c.mlm_probability,
            lm_loss: rng.random_range(0..64) as f64 / 8.0,
            similarity: (rng.random_range(0..5) > 0).then(|| rng.random_range(-8..=8) as f64 / 8.0),
            frequency: rng.random_range(0..40),
        })
        .collect();
    let set = CandidateSet {
        target: "target".into(),
        candidates,
        k: n,
    };
    (set, scores)
}

/// Applies a strictly increasing map (chosen by `which`) to one feature.
pub fn transform(scores: &[FeatureScores], feature: Feature, which: usize) -> Vec<FeatureScores> {
    let f = |x: f64| match which % 4 {
        0 => 4.0 * x + 8.0,
        1 => x * x * x,
        2 => x.exp(),
        _ => x - 1000.0,
    };
    scores
        .iter()
        .map(|s| {
            let mut s = s.clone();
            match feature {
                // the feature keeps its meaning only where it is defined
                Feature::BertPrediction => s.mlm_probability = f(s.mlm_probability),
                Feature::LanguageModel => s.lm_loss = f(s.lm_loss),
                Feature::Similarity => s.similarity = s.similarity.map(f),
                Feature::Frequency => s.frequency = s.frequency * s.frequency * 3 + 7 * s.frequency + 1,
            }
            s
        })
        .collect()
}

/// Chosen candidate with the features ranked in the given order.
pub fn chosen_with_order(set: &CandidateSet, scores: &[FeatureScores], order: &[Feature]) -> (usize, Vec<f64>) {
    let matrix = RankMatrix::from_scores(scores, order).unwrap();
    let avg = average_rank(&matrix).unwrap();
    (select_best(&set.candidates, &matrix, &avg).unwrap(), avg)
}

/// One randomized invariance trial; returns a description of any violation.
pub fn invariance_trial<R: Rng>(rng: &mut R) -> Result<(), String> {
    let n = rng.random_range(1..=15);
    let (set, scores) = random_scores(rng, n);
    let base = rank_candidates("target", &set, scores.clone()).unwrap();
    let feature = Feature::ALL[rng.random_range(0..4)];
    let which = rng.random_range(0..4);
    let moved = rank_candidates("target", &set, transform(&scores, feature, which)).unwrap();
    if moved.ranks != base.ranks || moved.average_ranks != base.average_ranks || moved.best != base.best {
        return Err(format!("transform {which} of {feature:?} changed the ranking"));
    }
    let mut order = Feature::ALL.to_vec();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let (best, avg) = chosen_with_order(&set, &scores, &order);
    if best != base.best || avg != base.average_ranks {
        return Err(format!("feature order {order:?} changed the choice"));
    }
    Ok(())
}

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Twenty instances with generated sets and chosen words, covering empty
/// generation, full agreement, case differences and kept originals.
pub fn crafted_instances() -> (Vec<SimplificationInstance>, Vec<Vec<String>>, Vec<String>) {
    let pool = ["a", "b", "c", "d", "e", "f", "g", "h", "Big", "big", "small"];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut instances = Vec::new();
    let mut generated = Vec::new();
    let mut chosen = Vec::new();
    for i in 0..20 {
        let target = format!("t{i}");
        let n_gold = rng.random_range(1..5);
        let n_gen = rng.random_range(1..7);
        let mut gold: Vec<String> = pool
            .choose_multiple(&mut rng, n_gold)
            .map(|s| s.to_lowercase())
            .collect();
        gold.dedup();
        let gen: Vec<String> = match i {
            // empty generation and full agreement are both represented
            0 => vec![],
            1 => gold.clone(),
            _ => pool.choose_multiple(&mut rng, n_gen).map(|s| s.to_string()).collect(),
        };
        let pick = match i % 4 {
            0 => target.to_uppercase(),
            1 => gold[0].to_uppercase(),
            _ => pool.choose(&mut rng).unwrap().to_string(),
        };
        let mut seen = HashSet::new();
        gold.retain(|g| seen.insert(g.clone()));
        instances.push(SimplificationInstance {
            sentence: format!("w {target} w"),
            target,
            target_index: 1,
            gold,
        });
        generated.push(gen);
        chosen.push(pick);
    }
    (instances, generated, chosen)
}

/// Micro P/R/F1 by set intersection.
pub fn candidate_oracle(instances: &[SimplificationInstance], generated: &[Vec<String>]) -> (f64, f64, f64) {
    let (mut inter, mut gen_total, mut gold_total) = (0usize, 0usize, 0usize);
    for (inst, gen) in instances.iter().zip(generated) {
        let g: HashSet<String> = gen.iter().map(|s| s.to_lowercase()).collect();
        let gold: HashSet<String> = inst.gold.iter().cloned().collect();
        inter += g.intersection(&gold).count();
        gen_total += g.len();
        gold_total += gold.len();
    }
    let p = inter as f64 / gen_total as f64;
    let r = inter as f64 / gold_total as f64;
    (p, r, 2.0 * p * r / (p + r))
}

/// (precision, accuracy) counted instance by instance.
pub fn pipeline_oracle(instances: &[SimplificationInstance], chosen: &[String]) -> (f64, f64) {
    let mut precise = 0;
    let mut accurate = 0;
    for (inst, c) in instances.iter().zip(chosen) {
        let c = c.to_lowercase();
        let kept = c == inst.target.to_lowercase();
        let in_gold = inst.gold.contains(&c);
        precise += usize::from(kept || in_gold);
        accurate += usize::from(!kept && in_gold);
    }
    let n = instances.len() as f64;
    (precise as f64 / n, accurate as f64 / n)
}
