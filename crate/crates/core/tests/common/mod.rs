#![allow(dead_code)]

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tacbench::dataset::{Dataset, Gender, Participant};
use tacbench::features::{FeatureMatrix, Provenance};
use tacbench::games::default_games;

/// Published action counts per game (Speed/Stop, Left/Right, A/B/C).
pub const PUBLISHED_COUNTS: [&[usize]; 3] = [&[156, 115], &[187, 84], &[88, 117, 66]];

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:03}")).collect()
}

fn participant(i: usize, choices: Vec<usize>) -> Participant {
    Participant {
        id: format!("p{i:03}"),
        gender: if i.is_multiple_of(2) { Gender::Male } else { Gender::Female },
        age: 20 + (i % 10) as u32,
        text_ref: format!("texts/p{i:03}.txt"),
        choices,
    }
}

pub fn attribute_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("attr{j:02}")).collect()
}

/// Participants whose per-game action counts equal `counts`, with actions
/// shuffled independently per game and uniform random attributes.
pub fn label_faithful(counts: &[&[usize]], d: usize, seed: u64) -> Dataset {
    let n: usize = counts[0].iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::new();
    for game in counts {
        assert_eq!(game.iter().sum::<usize>(), n);
        let mut col: Vec<usize> = game.iter().enumerate().flat_map(|(a, &c)| vec![a; c]).collect();
        col.shuffle(&mut rng);
        columns.push(col);
    }
    let participants = (0..n)
        .map(|i| participant(i, columns.iter().map(|c| c[i]).collect()))
        .collect();
    let values = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    let attrs = FeatureMatrix::new(ids(n), attribute_names(d), values, Provenance::Attributes24).unwrap();
    Dataset::new(participants, default_games(), Some(attrs)).unwrap()
}

/// `groups` latent personality types with noisy attribute vectors; each type
/// has a preferred action per game, chosen with probability `loyalty`.
pub fn structured(n: usize, d: usize, groups: usize, loyalty: f64, seed: u64) -> Dataset {
    let games = default_games();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..groups)
        .map(|_| (0..d).map(|_| rng.gen_range(0.2..0.8)).collect())
        .collect();
    let preferred: Vec<Vec<usize>> = (0..groups)
        .map(|_| games.iter().map(|g| rng.gen_range(0..g.num_actions())).collect())
        .collect();
    let mut values = Vec::with_capacity(n * d);
    let mut participants = Vec::with_capacity(n);
    for i in 0..n {
        let g = rng.gen_range(0..groups);
        values.extend(centers[g].iter().map(|&c| (c + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0)));
        let choices = games
            .iter()
            .zip(&preferred[g])
            .map(|(game, &p)| {
                if rng.gen_bool(loyalty) {
                    p
                } else {
                    rng.gen_range(0..game.num_actions())
                }
            })
            .collect();
        participants.push(participant(i, choices));
    }
    let attrs = FeatureMatrix::new(ids(n), attribute_names(d), values, Provenance::Attributes24).unwrap();
    Dataset::new(participants, games, Some(attrs)).unwrap()
}

/// Twelve participants in three tight, far-apart groups of four; every
/// member of a group makes the same choices.
pub fn separable_twelve() -> Dataset {
    let centers = [[0.05, 0.05], [0.95, 0.05], [0.5, 0.95]];
    let choices = [vec![0, 0, 0], vec![1, 1, 1], vec![0, 1, 2]];
    let mut values = Vec::new();
    let mut participants = Vec::new();
    for i in 0..12 {
        let g = i % 3;
        let jitter = (i / 3) as f64 * 0.01;
        values.extend([centers[g][0] + jitter, centers[g][1]]);
        participants.push(participant(i, choices[g].clone()));
    }
    let attrs = FeatureMatrix::new(ids(12), attribute_names(2), values, Provenance::Attributes24).unwrap();
    Dataset::new(participants, default_games(), Some(attrs)).unwrap()
}

/// Writes `participants.csv` and `attributes.csv` into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) {
    ds.write_participants_csv(std::fs::File::create(dir.join("participants.csv")).unwrap())
        .unwrap();
    if let Some(a) = &ds.attributes {
        a.write_csv(std::fs::File::create(dir.join("attributes.csv")).unwrap()).unwrap();
    }
}

/// Dataset pointed to by `TB_PUBLIC_DATA` (a directory with
/// `participants.csv` and `attributes.csv`), if set.
pub fn public_data() -> Option<Dataset> {
    let dir = std::env::var_os("TB_PUBLIC_DATA")?;
    let dir = Path::new(&dir);
    let ds = tacbench::dataset::load_dataset(
        &dir.join("participants.csv"),
        Some(&dir.join("attributes.csv")),
        &default_games(),
        &Default::default(),
    )
    .expect("TB_PUBLIC_DATA does not hold a loadable dataset");
    Some(ds)
}

static LINES: std::sync::Mutex<Vec<String>> = std::sync::Mutex::new(Vec::new());

pub fn report(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    LINES.lock().unwrap().push(format!("[{status}] {criterion}: {detail}"));
}

pub fn blocked(criterion: &str, detail: &str) {
    LINES.lock().unwrap().push(format!("[BLOCKED] {criterion}: {detail}"));
}

/// Recorded lines, ordered by criterion.
pub fn take_lines() -> Vec<String> {
    let mut lines = std::mem::take(&mut *LINES.lock().unwrap());
    lines.sort_by_key(|l| l.split_once("] ").map(|(_, rest)| rest.to_string()));
    lines
}
