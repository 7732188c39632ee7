//! Round-robin play between lens stages and the results CSV.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lens::stage_label;
use crate::model::{legal_indices, PolicyDistribution};

use super::game::{apply_move, outcome, GameState, Outcome};
use super::player::PolicySource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameResult {
    WhiteWin,
    BlackWin,
    Draw,
}

impl GameResult {
    /// Points for white.
    pub fn white_score(self) -> f64 {
        match self {
            GameResult::WhiteWin => 1.0,
            GameResult::BlackWin => 0.0,
            GameResult::Draw => 0.5,
        }
    }
}

impl fmt::Display for GameResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameResult::WhiteWin => "1-0",
            GameResult::BlackWin => "0-1",
            GameResult::Draw => "1/2",
        })
    }
}

impl FromStr for GameResult {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1-0" => Ok(GameResult::WhiteWin),
            "0-1" => Ok(GameResult::BlackWin),
            "1/2" => Ok(GameResult::Draw),
            _ => Err(Error::format(format!("unknown outcome {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameRecord {
    pub white: String,
    pub black: String,
    pub result: GameResult,
    /// Empty when the record came from a results file.
    pub moves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GameResultSet {
    pub participants: Vec<String>,
    pub games: Vec<GameRecord>,
}

impl GameResultSet {
    pub fn new(participants: Vec<String>, games: Vec<GameRecord>) -> Result<Self> {
        for g in &games {
            for id in [&g.white, &g.black] {
                if !participants.contains(id) {
                    return Err(Error::Input(format!("unregistered participant {id:?}")));
                }
            }
        }
        Ok(Self { participants, games })
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["white_id", "black_id", "outcome"]).expect("in-memory write");
        for g in &self.games {
            wtr.write_record([g.white.as_str(), g.black.as_str(), &g.result.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
    }

    /// Participants are registered in order of first appearance.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::format(format!("results header: {e}")))?;
        if headers.iter().collect::<Vec<_>>() != ["white_id", "black_id", "outcome"] {
            return Err(Error::format("results header must be white_id,black_id,outcome"));
        }
        let mut set = GameResultSet::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(format!("results row {}: {e}", i + 1)))?;
            let (white, black) = (rec[0].to_string(), rec[1].to_string());
            if white.is_empty() || black.is_empty() {
                return Err(Error::format(format!("results row {}: empty participant id", i + 1)));
            }
            let result: GameResult = rec[2]
                .parse()
                .map_err(|e: Error| Error::format(format!("results row {}: {e}", i + 1)))?;
            for id in [&white, &black] {
                if !set.participants.contains(id) {
                    set.participants.push(id.clone());
                }
            }
            set.games.push(GameRecord { white, black, result, moves: Vec::new() });
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TournamentConfig {
    pub games_per_pair: usize,
    /// Plies played by sampling before switching to argmax.
    pub opening_plies: u32,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        Self {
            games_per_pair: 10,
            opening_plies: 10,
            temperature: 1.0,
            seed: 0,
        }
    }
}

/// Stage labels, with `#2`, `#3`, … appended to repeated stages.
pub fn participant_ids(stages: &[i32], layers: usize) -> Vec<String> {
    let mut ids: Vec<String> = Vec::with_capacity(stages.len());
    for (i, &s) in stages.iter().enumerate() {
        let base = stage_label(s, layers);
        let n = stages[..i].iter().filter(|&&t| t == s).count();
        ids.push(if n == 0 { base } else { format!("{base}#{}", n + 1) });
    }
    ids
}

/// SplitMix64 finaliser over the seed and job coordinates.
fn game_seed(seed: u64, pair: usize, game: usize) -> u64 {
    let mut z = seed
        ^ (pair as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (game as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw a move from `p^(1/T)` over the legal moves.
fn sample_move(p: &PolicyDistribution, temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    let legal = legal_indices(&p.legal);
    let top = p.probs[p.argmax()];
    let weights: Vec<f64> = legal
        .iter()
        .map(|&m| if p.probs[m] > 0.0 { ((p.probs[m] / top).ln() / temperature).exp() } else { 0.0 })
        .collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => legal[dist.sample(rng)],
        Err(_) => p.argmax(),
    }
}

pub fn play_game<P: PolicySource + ?Sized>(
    src: &P,
    white_stage: i32,
    black_stage: i32,
    cfg: &TournamentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(GameResult, Vec<usize>)> {
    let mut s = GameState::initial();
    let mut moves = Vec::new();
    loop {
        match outcome(&s) {
            Outcome::Ongoing => {}
            Outcome::WhiteWin => return Ok((GameResult::WhiteWin, moves)),
            Outcome::BlackWin => return Ok((GameResult::BlackWin, moves)),
            Outcome::Draw => return Ok((GameResult::Draw, moves)),
        }
        let stage = if s.ply % 2 == 0 { white_stage } else { black_stage };
        let p = src.policy(&s, stage)?;
        let m = if s.ply < cfg.opening_plies && cfg.temperature > 0.0 {
            sample_move(&p, cfg.temperature, rng)
        } else {
            p.argmax()
        };
        s = apply_move(&s, m)?;
        moves.push(m);
    }
}

/// Every unordered pair of `stages` plays `games_per_pair` games, the lower
/// listed participant taking white in even-numbered games.
pub fn round_robin<P: PolicySource + ?Sized>(
    src: &P,
    stages: &[i32],
    layers: usize,
    cfg: &TournamentConfig,
) -> Result<GameResultSet> {
    if stages.len() < 2 {
        return Err(Error::Argument("a tournament needs at least two stages".into()));
    }
    if !(cfg.temperature >= 0.0) || !cfg.temperature.is_finite() {
        return Err(Error::Argument(format!("bad temperature {}", cfg.temperature)));
    }
    let ids = participant_ids(stages, layers);
    let mut jobs = Vec::new();
    let mut pair = 0;
    for a in 0..stages.len() {
        for b in a + 1..stages.len() {
            for g in 0..cfg.games_per_pair {
                let (w, bl) = if g % 2 == 0 { (a, b) } else { (b, a) };
                jobs.push((pair, g, w, bl));
            }
            pair += 1;
        }
    }
    let games = jobs
        .par_iter()
        .map(|&(pair, g, w, b)| {
            let mut rng = ChaCha8Rng::seed_from_u64(game_seed(cfg.seed, pair, g));
            let (result, moves) = play_game(src, stages[w], stages[b], cfg, &mut rng)?;
            Ok(GameRecord { white: ids[w].clone(), black: ids[b].clone(), result, moves })
        })
        .collect::<Result<Vec<_>>>()?;
    GameResultSet::new(ids, games)
}
