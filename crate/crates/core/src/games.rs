//! Normal-form game definitions, random matching of participants and the
//! points-to-currency compensation rule.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("game `{game}` has no action `{action}`")]
    IllegalAction { game: String, action: String },
    #[error("game `{0}` is malformed: {1}")]
    Malformed(String, String),
    #[error("failed to read game definitions: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse game definitions: {0}")]
    Json(#[from] serde_json::Error),
}

/// A two-player game in normal form.
///
/// `payoff[row][col]` holds `(row_points, col_points)` for the row player
/// choosing `actions[row]` and the column player choosing `actions[col]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub name: String,
    pub actions: Vec<String>,
    pub payoff: Vec<Vec<(i64, i64)>>,
}

impl GameSpec {
    pub fn new(
        name: impl Into<String>,
        actions: &[&str],
        payoff: Vec<Vec<(i64, i64)>>,
    ) -> Result<Self, GameError> {
        let game = GameSpec {
            name: name.into(),
            actions: actions.iter().map(|a| a.to_string()).collect(),
            payoff,
        };
        game.validate()?;
        Ok(game)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let m = self.actions.len();
        if m == 0 {
            return Err(GameError::Malformed(self.name.clone(), "no actions".into()));
        }
        for (i, a) in self.actions.iter().enumerate() {
            if self.actions[..i].contains(a) {
                return Err(GameError::Malformed(
                    self.name.clone(),
                    format!("duplicate action `{a}`"),
                ));
            }
        }
        if self.payoff.len() != m || self.payoff.iter().any(|row| row.len() != m) {
            return Err(GameError::Malformed(
                self.name.clone(),
                format!("payoff matrix must be {m}x{m}"),
            ));
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == label)
    }

    pub fn action_index_or_err(&self, label: &str) -> Result<usize, GameError> {
        self.action_index(label).ok_or_else(|| GameError::IllegalAction {
            game: self.name.clone(),
            action: label.to_string(),
        })
    }

    pub fn payoff_idx(&self, row: usize, col: usize) -> (i64, i64) {
        self.payoff[row][col]
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.num_actions();
        (0..m).all(|i| (0..m).all(|j| self.payoff[i][j].0 == self.payoff[j][i].1))
    }

    /// True when some action weakly dominates every other action for the row
    /// player, strictly against at least one column.
    pub fn has_dominant_strategy(&self) -> bool {
        let m = self.num_actions();
        (0..m).any(|a| {
            (0..m).filter(|&b| b != a).all(|b| {
                let weak = (0..m).all(|c| self.payoff[a][c].0 >= self.payoff[b][c].0);
                let strict = (0..m).any(|c| self.payoff[a][c].0 > self.payoff[b][c].0);
                weak && strict
            })
        })
    }
}

pub fn chicken() -> GameSpec {
    GameSpec::new(
        "chicken",
        &["Speed", "Stop"],
        vec![vec![(0, 0), (14, 2)], vec![(2, 14), (6, 6)]],
    )
    .expect("chicken payoff is well formed")
}

pub fn box_game() -> GameSpec {
    GameSpec::new(
        "box",
        &["Left", "Right"],
        vec![vec![(8, 8), (16, 12)], vec![(12, 16), (6, 6)]],
    )
    .expect("box payoff is well formed")
}

pub fn door() -> GameSpec {
    GameSpec::new(
        "door",
        &["A", "B", "C"],
        vec![
            vec![(10, 10), (0, 0), (0, 0)],
            vec![(0, 0), (10, 10), (0, 0)],
            vec![(0, 0), (0, 0), (8, 8)],
        ],
    )
    .expect("door payoff is well formed")
}

/// Chicken, Box and Door in that order.
pub fn default_games() -> Vec<GameSpec> {
    vec![chicken(), box_game(), door()]
}

#[derive(Serialize, Deserialize)]
struct GamesFile {
    games: Vec<GameSpec>,
}

/// Reads a `games.json` file: `{"games": [{"name", "actions", "payoff"}, ...]}`.
pub fn load_games(path: &Path) -> Result<Vec<GameSpec>, GameError> {
    let text = std::fs::read_to_string(path)?;
    let file: GamesFile = serde_json::from_str(&text)?;
    for g in &file.games {
        g.validate()?;
    }
    Ok(file.games)
}

pub fn games_to_json(games: &[GameSpec]) -> String {
    serde_json::to_string_pretty(&GamesFile { games: games.to_vec() })
        .expect("game specs serialize")
}

/// Looks up the payoff pair for the given action labels.
pub fn payoff(game: &GameSpec, row_action: &str, col_action: &str) -> Result<(i64, i64), GameError> {
    let r = game.action_index_or_err(row_action)?;
    let c = game.action_index_or_err(col_action)?;
    Ok(game.payoff_idx(r, c))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    /// Participant index pairs; a self-pair `(i, i)` appears iff n is odd.
    pub pairs: Vec<(usize, usize)>,
    /// Total points per participant, summed over all games.
    pub totals: Vec<i64>,
}

/// Randomly matches participants into pairs and scores each pair.
///
/// `choices[g][i]` is the action index chosen by participant `i` in game `g`.
pub fn random_match<R: Rng + ?Sized>(
    games: &[GameSpec],
    choices: &[Vec<usize>],
    n: usize,
    rng: &mut R,
) -> MatchResult {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = order
        .chunks(2)
        .map(|c| {
            let (a, b) = (c[0], *c.last().unwrap());
            (a.min(b), a.max(b))
        })
        .collect();
    // the odd one out (if any) is the last chunk, already a self-pair
    pairs.sort_unstable();

    let mut totals = vec![0i64; n];
    for &(a, b) in &pairs {
        for (game, picks) in games.iter().zip(choices) {
            let (pa, pb) = game.payoff_idx(picks[a], picks[b]);
            totals[a] += pa;
            if a != b {
                totals[b] += pb;
            }
        }
    }
    MatchResult { pairs, totals }
}

/// An amount of money in whole cents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cents(pub i64);

impl Cents {
    pub fn from_dollars(d: f64) -> Self {
        Cents((d * 100.0).round() as i64)
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.abs();
        write!(f, "{sign}{}.{:02}", a / 100, a % 100)
    }
}

/// Maps point totals linearly onto `[base, cap]`, rounded to cents half up.
pub fn compensation(totals: &[i64], base: Cents, cap: Cents) -> Vec<Cents> {
    let (Some(&min), Some(&max)) = (totals.iter().min(), totals.iter().max()) else {
        return Vec::new();
    };
    if max == min {
        return vec![base; totals.len()];
    }
    let span = (cap.0 - base.0) as i128;
    let den = (max - min) as i128;
    totals
        .iter()
        .map(|&t| {
            let num = span * (t - min) as i128;
            // floor((2*num + den) / (2*den)) rounds half up for num >= 0
            let extra = (2 * num + den).div_euclid(2 * den);
            Cents(base.0 + extra as i64)
        })
        .collect()
}
