//! End-to-end runs on the 10-instance mock fixture.

mod common;

use std::collections::HashSet;
use std::io::BufReader;

use common::*;
use lexsimp::candidates::{filter_morphological_variants, generate_candidates, is_valid_candidate};
use lexsimp::evaluation::{
    evaluate, parse_dataset, render_sweep_table, score_instances, sweep_k, write_dataset, DatasetFormat,
};
use lexsimp::ranking::{score_target, simplify, SimplifyConfig};
use lexsimp::resources::{build_frequency_table, write_frequency_table};

#[test]
fn frequency_fixture_matches_corpus() {
    let file = std::fs::File::open(mock_dir().join("corpus.txt")).unwrap();
    let table = build_frequency_table(BufReader::new(file), None, "corpus.txt").unwrap();
    let mut out = Vec::new();
    write_frequency_table(&table, &mut out).unwrap();
    check_golden(&mock_dir().join("freq.tsv"), &String::from_utf8(out).unwrap());
}

#[test]
fn dataset_loads_and_round_trips() {
    let instances = mock_dataset();
    assert_eq!(instances.len(), 10);
    assert_eq!(instances[0].gold, vec!["wrote", "written", "made", "created", "paint"]);
    let mut buf = Vec::new();
    write_dataset(&instances, &mut buf).unwrap();
    let back = parse_dataset(&buf[..], DatasetFormat::BenchLs, "mem").unwrap();
    assert_eq!(back, instances);
}

#[test]
fn sweep_matches_golden() {
    let rows = sweep_k(&mock_dataset(), 1..=15, &SimplifyConfig::default(), &mock_resources()).unwrap();
    assert_eq!(rows.len(), 15);
    for pair in rows.windows(2) {
        assert!(pair[1].recall >= pair[0].recall);
    }
    check_golden(&mock_dir().join("sweep_golden.tsv"), &render_sweep_table(&rows));
}

#[test]
fn k1_precision_is_share_of_gold_first_candidates() {
    let instances = mock_dataset();
    let resources = mock_resources();
    let rows = sweep_k(&instances, 1..=1, &SimplifyConfig::default(), &resources).unwrap();
    let config = SimplifyConfig {
        k: 1,
        ..Default::default()
    };
    let mut hits = 0;
    let mut generated = 0;
    for inst in &instances {
        let idx = inst.word_index(resources.backend.tokenizer()).unwrap();
        let set = generate_candidates(&inst.sentence, idx, config.k, resources.backend.as_ref()).unwrap();
        generated += set.len();
        if set.candidates.first().is_some_and(|c| inst.gold.contains(&c.token)) {
            hits += 1;
        }
    }
    assert_eq!(generated, instances.len());
    assert_eq!(rows[0].precision, hits as f64 / instances.len() as f64);
}

#[test]
fn evaluation_report_matches_golden() {
    let eval = evaluate(&mock_dataset(), &SimplifyConfig::default(), &mock_resources()).unwrap();
    assert!(eval.pipeline.accuracy <= eval.pipeline.precision);
    let mut out = String::new();
    for r in &eval.records {
        out.push_str(&serde_json::to_string(r).unwrap());
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&eval.summary).unwrap());
    out.push('\n');
    check_golden(&mock_dir().join("eval_golden.jsonl"), &out);
}

#[test]
fn candidates_respect_exclusions_and_nest() {
    let resources = mock_resources();
    let backend = resources.backend.as_ref();
    for inst in mock_dataset() {
        let idx = inst.word_index(backend.tokenizer()).unwrap();
        let wide = generate_candidates(&inst.sentence, idx, 15, backend).unwrap();
        for c in &wide.candidates {
            assert!(is_valid_candidate(&c.token), "{}", c.token);
            assert!(
                filter_morphological_variants(&inst.target.to_lowercase(), &c.token),
                "{} / {}",
                inst.target,
                c.token
            );
        }
        for k in 1..15 {
            let narrow = generate_candidates(&inst.sentence, idx, k, backend).unwrap();
            assert_eq!(narrow.candidates[..], wide.candidates[..k]);
        }
    }
}

#[test]
fn runs_are_deterministic_and_ordered() {
    let instances = mock_dataset();
    let resources = mock_resources();
    let config = SimplifyConfig::default();
    let parallel = score_instances(&instances, &config, &resources).unwrap();
    for (inst, scored) in instances.iter().zip(&parallel) {
        let idx = inst.word_index(resources.backend.tokenizer()).unwrap();
        assert_eq!(&score_target(&inst.sentence, idx, &config, &resources).unwrap(), scored);
        let a = simplify(&inst.sentence, idx, &config, &resources).unwrap();
        let b = simplify(&inst.sentence, idx, &config, &resources).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chosen.to_lowercase(), inst.target.to_lowercase());
    }
}

#[test]
fn window_zero_and_missing_resources_still_rank() {
    let instances = mock_dataset();
    let backend = mock_resources().backend;
    let bare = lexsimp::ranking::Resources::new(backend);
    let zero = SimplifyConfig {
        k: 5,
        window_half_width: 0,
    };
    assert!(matches!(
        evaluate(&instances, &zero, &bare),
        Err(lexsimp::Error::MalformedInput(_))
    ));
    let config = SimplifyConfig {
        k: 5,
        window_half_width: 1,
    };
    let eval = evaluate(&instances, &config, &bare).unwrap();
    let chosen: HashSet<_> = eval.pipeline.chosen.iter().collect();
    assert!(!chosen.is_empty());
    assert_eq!(eval.records.len(), instances.len());
}
