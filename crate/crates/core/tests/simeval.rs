mod common;

use std::collections::HashMap;

use common::oracles;
use infdecomp_core::embedder::{EmbeddingCache, HashingProvider, Pooling};
use infdecomp_core::simeval::*;
use infdecomp_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn spearman_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(2..=8);
        let pred = oracles::random_scores(&mut rng, n);
        let gold = oracles::random_scores(&mut rng, n);
        match spearman_rho(&pred, &gold) {
            Ok(r) => {
                let o = oracles::spearman(&pred, &gold);
                assert!(oracles::close(r, o, 1e-12), "{pred:?} {gold:?}: {r} vs {o}");
                checked += 1;
            }
            Err(Error::UndefinedCorrelation(_)) => {
                let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
                assert!(constant(&pred) || constant(&gold));
            }
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn spearman_tie_example() {
    let pred = [1.0, 2.0, 2.0, 4.0];
    let gold = [1.0, 3.0, 2.0, 4.0];
    let r = spearman_rho(&pred, &gold).unwrap();
    assert!((r - oracles::spearman(&pred, &gold)).abs() < 1e-12);
}

#[test]
fn average_precision_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(1..=8);
        let scores = oracles::random_scores(&mut rng, n);
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        if !labels.contains(&true) {
            assert!(matches!(average_precision(&scores, &labels), Err(Error::NoPositives)));
            continue;
        }
        let ap = average_precision(&scores, &labels).unwrap();
        assert!((ap - oracles::average_precision(&scores, &labels)).abs() < 1e-12);
        checked += 1;
    }
}

#[test]
fn metrics_invariant_to_monotone_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.gen_range(3..=12);
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gold: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let f = |v: &[f64]| v.iter().map(|x| x.exp() * 3.0 + 1.0).collect::<Vec<_>>();
        let r = spearman_rho(&pred, &gold).unwrap();
        assert!((r - spearman_rho(&f(&pred), &gold).unwrap()).abs() < 1e-12);
        assert!((r - spearman_rho(&pred, &f(&gold)).unwrap()).abs() < 1e-12);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        let ap = average_precision(&pred, &labels).unwrap();
        assert!((ap - average_precision(&f(&pred), &labels).unwrap()).abs() < 1e-12);
    }
}

fn fixture_pairs() -> StsDataset {
    let texts = [
        ("The cat sat on the mat.", "A cat was sitting on the mat.", 4.8),
        ("The vaccine is untested and unsafe.", "The vaccine has not been tested.", 3.9),
        ("Stocks fell sharply today.", "The market dropped today.", 3.5),
        ("He plays guitar in a band.", "She likes cooking pasta.", 0.2),
        ("Rain is expected tomorrow.", "Tomorrow it will probably rain.", 4.5),
        ("The senator opposed the bill because it raised taxes.", "Taxes would rise under the bill.", 2.8),
        ("Dogs bark at night.", "The moon is bright.", 0.4),
        ("I bought a new phone and it broke.", "My new phone broke.", 3.7),
        ("Kids recover quickly from colds.", "Children get over colds fast.", 4.1),
        ("The train was late but we made it.", "We arrived despite the delay.", 3.0),
    ];
    StsDataset {
        name: "fixture".into(),
        task: Task::Sts,
        pairs: texts
            .iter()
            .map(|(a, b, g)| GoldPair {
                text_a: a.to_string(),
                text_b: b.to_string(),
                gold: *g,
            })
            .collect(),
    }
}

#[test]
fn empty_decompositions_reproduce_baseline() {
    let ds = fixture_pairs();
    let provider = HashingProvider::new(256);
    let cache = EmbeddingCache::in_memory();
    let base = run_sts_benchmark(std::slice::from_ref(&ds), Mode::Baseline, &provider, &cache, None, Pooling::Mean).unwrap();
    let empty: HashMap<String, Vec<String>> = (0..ds.pairs.len())
        .flat_map(|p| ['a', 'b'].map(|s| (item_id(&ds.name, p, s), Vec::new())))
        .collect();
    let aug = run_sts_benchmark(
        std::slice::from_ref(&ds),
        Mode::Augmented,
        &provider,
        &cache,
        Some(GenerationSource::Precomputed(&empty)),
        Pooling::Mean,
    )
    .unwrap();
    for (a, b) in base.predictions[0].iter().zip(&aug.predictions[0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((base.rows[0].value - aug.rows[0].value).abs() < 1e-12);
}

#[test]
fn augmented_differs_only_with_real_decompositions() {
    use infdecomp_core::decomposer::*;
    let ds = fixture_pairs();
    let provider = HashingProvider::new(256);
    let cache = EmbeddingCache::in_memory();
    let base = run_sts_benchmark(std::slice::from_ref(&ds), Mode::Baseline, &provider, &cache, None, Pooling::Mean).unwrap();
    let backend = MockBackend::new();
    let dcache = DecompositionCache::in_memory();
    let configs = [PromptConfig {
        template: PromptTemplate {
            template_id: "sts".into(),
            instruction: "Paraphrase the following text.".into(),
            exemplar_format: "Text: <input>\nParaphrase: <output>".into(),
            separator: "###".into(),
        },
        exemplars: Vec::new(),
        k: 0,
        seed: 0,
    }];
    let opts = DecomposeOptions::default();
    let aug = run_sts_benchmark(
        std::slice::from_ref(&ds),
        Mode::Augmented,
        &provider,
        &cache,
        Some(GenerationSource::Decompose {
            configs: &configs,
            backend: Some(&backend),
            cache: &dcache,
            options: &opts,
        }),
        Pooling::Mean,
    )
    .unwrap();
    assert_eq!(backend.calls(), 20);
    // A pair is scored differently only if one side decomposes into more
    // than a restatement of itself.
    let gens = |t: &str| mock_decompose(t);
    let mut differed = 0;
    for (p, pair) in ds.pairs.iter().enumerate() {
        let multi = gens(&pair.text_a).lines().count() > 1 || gens(&pair.text_b).lines().count() > 1;
        let diff = (base.predictions[0][p] - aug.predictions[0][p]).abs();
        if multi {
            differed += (diff > 1e-9) as usize;
        }
    }
    assert!(differed >= 3, "{differed}");
    assert_ne!(base.rows[0].value, aug.rows[0].value);

    let mut csv = Vec::new();
    write_report_csv(&[base.rows[0].clone(), aug.rows[0].clone()], &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("dataset,mode,metric,value,n_pairs\nfixture,baseline,spearman,"));
    assert!(text.contains("\nfixture,augmented,spearman,"));
}

#[test]
fn constant_gold_is_undefined() {
    let ds = StsDataset {
        name: "const".into(),
        task: Task::Sts,
        pairs: (0..4)
            .map(|i| GoldPair {
                text_a: format!("same text {i}"),
                text_b: format!("same text {i}"),
                gold: 5.0,
            })
            .collect(),
    };
    let provider = HashingProvider::new(256);
    let r = run_sts_benchmark(&[ds], Mode::Baseline, &provider, &EmbeddingCache::in_memory(), None, Pooling::Mean);
    assert!(matches!(r, Err(Error::UndefinedCorrelation(_))));
}

#[test]
fn missing_generations_are_reported() {
    let ds = fixture_pairs();
    let provider = HashingProvider::new(256);
    let partial: HashMap<String, Vec<String>> = HashMap::from([(item_id("fixture", 0, 'a'), vec![])]);
    let r = run_sts_benchmark(
        &[ds],
        Mode::Augmented,
        &provider,
        &EmbeddingCache::in_memory(),
        Some(GenerationSource::Precomputed(&partial)),
        Pooling::Mean,
    );
    match r {
        Err(Error::MissingDecompositions(ids)) => assert_eq!(ids.len(), 19),
        other => panic!("{other:?}"),
    }
}

#[test]
fn loads_tsv_and_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("pc.tsv");
    std::fs::write(&tsv, "text_a\ttext_b\tlabel\nA b.\tA  b.\t1\nC.\tD.\t0\n").unwrap();
    let ds = StsDataset::load(&tsv, "pc").unwrap();
    assert_eq!(ds.task, Task::Paraphrase);
    assert_eq!(ds.pairs.len(), 2);
    let jl = dir.path().join("sts.jsonl");
    std::fs::write(&jl, "{\"text_a\":\"x\",\"text_b\":\"y\",\"score\":3.5}\n").unwrap();
    let ds = StsDataset::load(&jl, "sts").unwrap();
    assert_eq!(ds.task, Task::Sts);
    assert_eq!(ds.pairs[0].gold, 3.5);
}

#[test]
fn table_row_format() {
    assert_eq!(format_comparison("Twitter-PC", 0.8640, 0.8817), "Twitter-PC 86.40 → 88.17");
}
