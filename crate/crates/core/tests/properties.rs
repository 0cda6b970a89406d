mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tacbench::classifiers::Split;
use tacbench::clustering;
use tacbench::features::{self, FeatureMatrix, Provenance};
use tacbench::harness::{self, ClassifierKind, ExperimentConfig, IntRange, OURS};

fn small_config(seed: u64, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        repetitions: reps,
        k_range: IntRange::new(2, 6),
        knn_range: IntRange::new(1, 3),
        master_seed: seed,
        ..Default::default()
    }
}

fn features_of(ds: &tacbench::dataset::Dataset) -> BTreeMap<String, FeatureMatrix> {
    BTreeMap::from([(OURS.to_string(), ds.attributes.clone().unwrap())])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_partitions(n in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let test_size = ((frac * n as f64) as usize).clamp(1, n - 1);
        let s = Split::sample(n, test_size, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(s.test().len(), test_size);
        let all: BTreeSet<usize> = s.train().iter().chain(s.test()).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert!(s.test().iter().all(|&i| !s.is_train(i)));
    }

    #[test]
    fn experiment_deterministic_and_thread_invariant(seed in any::<u64>(), data_seed in 0u64..1000) {
        let ds = common::structured(40, 4, 3, 0.6, data_seed);
        let cfg = small_config(seed, 120);
        let f = features_of(&ds);
        let (a, _) = harness::run_experiment_with(&cfg, &ds, &f, Some(1)).unwrap();
        let (b, _) = harness::run_experiment_with(&cfg, &ds, &f, Some(4)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.cells.values().all(|c| (0.0..=100.0).contains(&c.mean)));
        // TAC and K-NN sweeps, MVC, ERG and EWG for every game and metric
        let per_game = |actions: usize| (5 + 3 + 1 + 2) * (3 + actions);
        prop_assert_eq!(a.cells.len(), per_game(2) + per_game(2) + per_game(3));
    }

    #[test]
    fn ward_permutation_covariant(seed in any::<u64>(), n in 2usize..30) {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let values: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let names = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        let x = FeatureMatrix::new(names(n), names(d), values.clone(), Provenance::External).unwrap();
        let permuted: Vec<f64> = perm.iter().flat_map(|&i| values[i * d..(i + 1) * d].to_vec()).collect();
        let y = FeatureMatrix::new(names(n), names(d), permuted, Provenance::External).unwrap();
        let dx = clustering::ward_linkage(&x).unwrap();
        let dy = clustering::ward_linkage(&y).unwrap();
        for k in 1..=n {
            let px: BTreeSet<BTreeSet<usize>> =
                dx.cut(k).unwrap().clusters().into_iter().map(|c| c.into_iter().collect()).collect();
            let py: BTreeSet<BTreeSet<usize>> = dy
                .cut(k)
                .unwrap()
                .clusters()
                .into_iter()
                .map(|c| c.into_iter().map(|j| perm[j]).collect())
                .collect();
            prop_assert_eq!(px, py);
        }
    }
}

#[test]
fn same_seed_same_table_other_seed_differs() {
    let ds = common::structured(50, 4, 3, 0.6, 8);
    let f = features_of(&ds);
    let long = harness::run_experiment(&small_config(1, 100), &ds, &f).unwrap();
    let long2 = harness::run_experiment(&small_config(1, 100), &ds, &f).unwrap();
    assert_eq!(long, long2);
    let short = harness::run_experiment(&small_config(1, 1), &ds, &f).unwrap();
    let other = harness::run_experiment(&small_config(2, 1), &ds, &f).unwrap();
    assert_ne!(short, other);
}

#[test]
fn mvc_accuracy_converges_to_majority_share() {
    let ds = common::label_faithful(&common::PUBLISHED_COUNTS, 2, 4);
    let cfg = ExperimentConfig {
        repetitions: 4000,
        classifiers: vec![ClassifierKind::Mvc],
        master_seed: 12,
        ..Default::default()
    };
    let t = harness::run_experiment(&cfg, &ds, &BTreeMap::new()).unwrap();
    for (game, share) in [("chicken", 156.0 / 271.0), ("box", 187.0 / 271.0), ("door", 117.0 / 271.0)] {
        let c = t.get("MVC", "-", game, None, "accuracy").unwrap();
        assert_eq!(c.count, 4000);
        assert!((c.mean - 100.0 * share).abs() < 3.0 * c.std_err, "{game}: {c:?}");
    }
}

#[test]
fn single_repetition_mvc_accuracy_is_test_majority_share() {
    let ds = common::label_faithful(&common::PUBLISHED_COUNTS, 2, 4);
    let cfg = ExperimentConfig {
        repetitions: 1,
        classifiers: vec![ClassifierKind::Mvc],
        games: vec!["chicken".into()],
        master_seed: 99,
        ..Default::default()
    };
    let t = harness::run_experiment(&cfg, &ds, &BTreeMap::new()).unwrap();
    let split = Split::sample(
        271,
        27,
        &mut tacbench::rng::stream(99, &[0, tacbench::rng::tag("split")]),
    )
    .unwrap();
    let labels = ds.labels(0);
    let speed = split.test().iter().filter(|&&i| labels[i] == 0).count();
    let acc = t.mean("MVC", "-", "chicken", None, "accuracy").unwrap();
    assert!((acc - 100.0 * speed as f64 / 27.0).abs() < 1e-9);
}

#[test]
fn empty_intersection_writes_headers_only() {
    let ds = common::structured(20, 3, 2, 0.6, 1);
    let cfg = ExperimentConfig {
        repetitions: 3,
        classifiers: vec![],
        ..Default::default()
    };
    let t = harness::run_experiment(&cfg, &ds, &BTreeMap::new()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let files = harness::emit_reports(&t, tmp.path(), cfg.selection_metric).unwrap();
    assert_eq!(files.len(), 4 + 3);
    for f in files {
        assert_eq!(std::fs::read_to_string(&f).unwrap().lines().count(), 1, "{f:?}");
    }
}

#[test]
fn oversized_k_and_missing_features_rejected() {
    let ds = common::structured(20, 3, 2, 0.6, 1);
    let mut cfg = small_config(0, 2);
    assert!(harness::run_experiment(&cfg, &ds, &BTreeMap::new()).is_err());
    cfg.k_range = IntRange::new(2, 21);
    assert!(harness::run_experiment(&cfg, &ds, &features_of(&ds)).is_err());
}

// opening of a sample participant text
const SAMPLE: &str = "Hello. My name is Annon. I would like to tell you about a trip I've made to Japan. \
As most of my good friends, I traveled for a long time abroad - but to a quiet unique destination, Japan. \
I have always loved Japan - the language, the culture, the history - so I decided to go there.";

/// Word-at-a-time tokenizer written against the stop-word file directly.
fn oracle_tokens(text: &str) -> Vec<String> {
    let stop: HashSet<&str> = include_str!("../data/stopwords.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    text.split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase())
        .filter(|w| !w.is_empty() && !stop.contains(w.as_str()))
        .collect()
}

#[test]
fn tokenizer_matches_oracle_on_sample_text() {
    let tokens = features::tokenize(SAMPLE);
    assert_eq!(tokens, oracle_tokens(SAMPLE));
    assert_eq!(
        &tokens[..10],
        ["hello", "name", "annon", "would", "like", "tell", "trip", "ive", "made", "japan"]
    );
    assert!(!tokens.iter().any(|t| t == "the" || t == "-"));
}

#[test]
fn tfidf_vocabulary_on_sample_sentences() {
    let texts: Vec<String> = SAMPLE.split(". ").map(str::to_string).collect();
    let ids: Vec<String> = (0..texts.len()).map(|i| i.to_string()).collect();
    let (m, vocab) = features::tfidf(&ids, &texts).unwrap();
    let mut sorted = vocab.terms.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, vocab.terms);
    assert!(vocab.document_frequency.iter().all(|&df| (1..=texts.len()).contains(&df)));
    // "japan" appears in three of the five sentences
    let j = vocab.terms.iter().position(|t| t == "japan").unwrap();
    assert_eq!(vocab.document_frequency[j], 3);
    for i in 0..m.n() {
        let norm: f64 = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
    }
}
