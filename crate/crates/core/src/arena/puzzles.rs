//! Forced-win puzzles: generation by random playouts, JSON-lines I/O, and
//! per-stage evaluation.
//!
//! Depth counts the solver's own moves, so a depth-`d` puzzle is a win in
//! `2d - 1` plies.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SolveMatrix;
use crate::notation::{move_name, parse_move};

use super::game::{apply_move, move_list, outcome, Cell, Color, GameState, Outcome};
use super::player::PolicySource;
use super::solver::{best_defence, minimax_solve, move_wins_within, pv_wins, MAX_SOLVE_PLIES};

pub const MAX_PUZZLE_DEPTH: u32 = MAX_SOLVE_PLIES.div_ceil(2);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Puzzle {
    pub state: GameState,
    pub pv: Vec<usize>,
    pub depth: u32,
}

impl Puzzle {
    pub fn new(state: GameState, pv: Vec<usize>) -> Result<Puzzle> {
        let depth = (pv.len() as u32).div_ceil(2);
        if pv.len() % 2 == 0 || depth > MAX_PUZZLE_DEPTH {
            return Err(Error::Input(format!(
                "a line of {} plies is not a puzzle of depth 1..={MAX_PUZZLE_DEPTH}",
                pv.len()
            )));
        }
        if !pv_wins(&state, &pv) {
            return Err(Error::Input("line does not end in a win for the side to move".into()));
        }
        Ok(Puzzle { state, pv, depth })
    }

    pub fn plies(&self) -> u32 {
        2 * self.depth - 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateRecord {
    pub board: String,
    pub stm: String,
    #[serde(default)]
    pub ply: u32,
    #[serde(default)]
    pub halfmove: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PuzzleRecord {
    board: String,
    stm: String,
    pv: Vec<String>,
    depth: u32,
    #[serde(default)]
    ply: u32,
    #[serde(default)]
    halfmove: u32,
}

fn parse_stm(s: &str) -> Result<Color> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Color::from_char(c),
        _ => Err(Error::format(format!("side to move must be 'w' or 'b', got {s:?}"))),
    }
}

impl StateRecord {
    pub fn from_state(s: &GameState) -> Self {
        Self {
            board: s.board_string(),
            stm: s.side_to_move.as_char().to_string(),
            ply: s.ply,
            halfmove: s.halfmove,
        }
    }

    pub fn to_state(&self) -> Result<GameState> {
        let mut s = GameState::from_board_str(&self.board, parse_stm(&self.stm)?)?;
        s.ply = self.ply;
        s.halfmove = self.halfmove;
        Ok(s)
    }
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> impl Iterator<Item = (usize, Result<T>)> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec = serde_json::from_str::<T>(l)
                .map_err(|e| Error::format(format!("line {}: {e}", i + 1)));
            (i + 1, rec)
        })
}

fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format(m) if m.starts_with("line ") => Error::Format(m),
        Error::Format(m) | Error::Rule(m) | Error::Input(m) => Error::format(format!("line {line}: {m}")),
        other => other,
    })
}

pub fn positions_to_jsonl(states: &[GameState]) -> String {
    states
        .iter()
        .map(|s| serde_json::to_string(&StateRecord::from_state(s)).expect("serializable") + "\n")
        .collect()
}

pub fn positions_from_jsonl(text: &str) -> Result<Vec<GameState>> {
    parse_lines::<StateRecord>(text)
        .map(|(line, rec)| at_line(line, rec.and_then(|r| r.to_state())))
        .collect()
}

pub fn puzzles_to_jsonl(puzzles: &[Puzzle]) -> String {
    puzzles
        .iter()
        .map(|p| {
            let rec = PuzzleRecord {
                board: p.state.board_string(),
                stm: p.state.side_to_move.as_char().to_string(),
                pv: p.pv.iter().map(|&m| move_name(m)).collect(),
                depth: p.depth,
                ply: p.state.ply,
                halfmove: p.state.halfmove,
            };
            serde_json::to_string(&rec).expect("serializable") + "\n"
        })
        .collect()
}

pub fn puzzles_from_jsonl(text: &str) -> Result<Vec<Puzzle>> {
    parse_lines::<PuzzleRecord>(text)
        .map(|(line, rec)| {
            at_line(
                line,
                rec.and_then(|r| {
                    let mut state = GameState::from_board_str(&r.board, parse_stm(&r.stm)?)?;
                    state.ply = r.ply;
                    state.halfmove = r.halfmove;
                    let pv = r.pv.iter().map(|m| parse_move(m)).collect::<Result<Vec<_>>>()?;
                    let p = Puzzle::new(state, pv)?;
                    if p.depth != r.depth {
                        return Err(Error::format(format!(
                            "depth {} does not match a {}-ply line",
                            r.depth,
                            p.pv.len()
                        )));
                    }
                    Ok(p)
                }),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PuzzleGenConfig {
    pub count: usize,
    pub seed: u64,
    pub min_depth: u32,
    pub max_depth: u32,
    pub max_playouts: usize,
}

impl Default for PuzzleGenConfig {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            min_depth: 2,
            max_depth: 2,
            max_playouts: 100_000,
        }
    }
}

/// Cheap necessary condition for a win within `moves` of the mover's own
/// moves: a runner close enough to the goal, or few enough enemies left.
fn could_win_within(s: &GameState, moves: u32) -> bool {
    let me = s.side_to_move;
    let goal = me.goal_rank() as i32;
    let near = s.board.iter().enumerate().any(|(sq, &c)| {
        c == Cell::Runner(me) && (goal - (sq / 8) as i32).unsigned_abs() <= moves
    });
    near || s.count(me.opposite()) as u32 <= moves
}

/// Harvest forced-win positions from seeded random playouts, at most one per
/// playout and never the same board twice.
pub fn generate_puzzles(cfg: &PuzzleGenConfig) -> Result<Vec<Puzzle>> {
    if cfg.min_depth == 0 || cfg.min_depth > cfg.max_depth || cfg.max_depth > MAX_PUZZLE_DEPTH {
        return Err(Error::Argument(format!(
            "puzzle depth range {}..={} outside 1..={MAX_PUZZLE_DEPTH}",
            cfg.min_depth, cfg.max_depth
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.max_playouts {
        if out.len() >= cfg.count {
            break;
        }
        let mut s = GameState::initial();
        loop {
            if could_win_within(&s, cfg.max_depth) && seen.insert(s.key()) {
                if let Some(w) = minimax_solve(&s, 2 * cfg.max_depth - 1) {
                    if w.depth() >= cfg.min_depth {
                        out.push(Puzzle::new(s.clone(), w.pv)?);
                    }
                    // Either harvested or too easy; later states of this game are alike.
                    break;
                }
            }
            match move_list(&s).choose(&mut rng) {
                Some(&m) => s = apply_move(&s, m)?,
                None => break,
            }
        }
    }
    if out.len() < cfg.count {
        return Err(Error::Input(format!(
            "only {} puzzles found in {} playouts",
            out.len(),
            cfg.max_playouts
        )));
    }
    Ok(out)
}

/// Distinct ongoing positions reached by seeded random play, stopping each
/// playout at a ply drawn from `min_ply..=max_ply`.
pub fn random_positions(count: usize, seed: u64, min_ply: u32, max_ply: u32) -> Result<Vec<GameState>> {
    if min_ply > max_ply {
        return Err(Error::Argument(format!("ply range {min_ply}..={max_ply} is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count.max(1) + 1000 {
            return Err(Error::Input(format!("only {} distinct positions found", out.len())));
        }
        let stop = rng.random_range(min_ply..=max_ply);
        let mut s = GameState::initial();
        while s.ply < stop {
            match move_list(&s).choose(&mut rng) {
                Some(&m) => s = apply_move(&s, m)?,
                None => break,
            }
        }
        if !outcome(&s).is_terminal() && seen.insert(s.key()) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Play the puzzle with the stage's argmax moves. Replies follow the line;
/// once the player leaves it with another forced win, the defence switches
/// to the longest-resisting reply.
pub fn solve_with<P: PolicySource + ?Sized>(src: &P, puzzle: &Puzzle, stage: i32) -> Result<bool> {
    let me = puzzle.state.side_to_move;
    let mut cur = puzzle.state.clone();
    let mut on_line = Some(0usize);
    for remaining in (1..=puzzle.depth).rev() {
        let m = src.best_move(&cur, stage)?;
        let follows = on_line.is_some_and(|i| puzzle.pv.get(i) == Some(&m));
        if !follows {
            if !move_wins_within(&cur, m, 2 * remaining - 1) {
                return Ok(false);
            }
            on_line = None;
        }
        cur = apply_move(&cur, m)?;
        match outcome(&cur) {
            Outcome::Ongoing => {}
            o => return Ok(o == Outcome::win_for(me)),
        }
        if remaining == 1 {
            return Ok(false);
        }
        let reply = match on_line {
            Some(i) => *puzzle
                .pv
                .get(i + 1)
                .ok_or_else(|| Error::Input("line ends before the win".into()))?,
            None => best_defence(&cur, 2 * remaining - 3).expect("ongoing position has moves"),
        };
        on_line = on_line.map(|i| i + 2);
        cur = apply_move(&cur, reply)?;
        if outcome(&cur).is_terminal() {
            return Ok(false);
        }
    }
    Ok(false)
}

pub fn eval_puzzles<P: PolicySource + ?Sized>(src: &P, puzzles: &[Puzzle], stages: &[i32]) -> Result<SolveMatrix> {
    let solved = puzzles
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            stages
                .iter()
                .map(|&k| solve_with(src, p, k))
                .collect::<Result<Vec<bool>>>()
                .map_err(|e| Error::Position { index, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    SolveMatrix::new(stages.to_vec(), solved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PolicyDistribution, MOVES};
    use crate::arena::game::legal_moves;
    use crate::notation::parse_square;

    /// Uniform over legal moves, so argmax is the lowest legal index.
    struct Uniform;
    impl PolicySource for Uniform {
        fn policy(&self, s: &GameState, stage: i32) -> Result<PolicyDistribution> {
            PolicyDistribution::from_logits(&vec![0.0; MOVES], &legal_moves(s), stage)
        }
    }

    /// Puts all mass on the next line move whenever the state is on the line.
    struct Oracle(Vec<Puzzle>);
    impl PolicySource for Oracle {
        fn policy(&self, s: &GameState, stage: i32) -> Result<PolicyDistribution> {
            let mut logits = vec![0.0; MOVES];
            for p in &self.0 {
                let mut cur = p.state.clone();
                for &m in &p.pv {
                    if cur == *s {
                        logits[m] = 50.0;
                    }
                    cur = apply_move(&cur, m)?;
                }
            }
            PolicyDistribution::from_logits(&logits, &legal_moves(s), stage)
        }
    }

    fn put(s: &mut GameState, sq: &str, c: Color) {
        s.board[parse_square(sq).unwrap()] = Cell::Runner(c);
    }

    fn small_set() -> Vec<Puzzle> {
        generate_puzzles(&PuzzleGenConfig { count: 8, seed: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn generated_puzzles_are_sound() {
        let ps = small_set();
        assert_eq!(ps.len(), 8);
        let keys: HashSet<_> = ps.iter().map(|p| p.state.key()).collect();
        assert_eq!(keys.len(), 8);
        for p in &ps {
            assert_eq!(p.depth, 2);
            let again = minimax_solve(&p.state, MAX_SOLVE_PLIES).unwrap();
            assert_eq!(again.plies, 3);
            assert_eq!(again.pv, p.pv);
        }
        let again = generate_puzzles(&PuzzleGenConfig { count: 8, seed: 5, ..Default::default() }).unwrap();
        assert_eq!(again, ps);
    }

    #[test]
    fn jsonl_round_trip() {
        let ps = small_set();
        let text = puzzles_to_jsonl(&ps);
        assert_eq!(puzzles_from_jsonl(&text).unwrap(), ps);
        let bad = text.replacen("\"depth\":2", "\"depth\":3", 1);
        assert!(matches!(puzzles_from_jsonl(&bad), Err(Error::Format(_))));
        assert!(puzzles_from_jsonl("{\"board\":\"w\"}").is_err());

        let states = random_positions(5, 3, 4, 30).unwrap();
        assert_eq!(positions_from_jsonl(&positions_to_jsonl(&states)).unwrap(), states);
    }

    #[test]
    fn oracle_policy_solves_everything() {
        let ps = small_set();
        let m = eval_puzzles(&Oracle(ps.clone()), &ps, &[-1, 0, 1]).unwrap();
        assert!(m.solved.iter().flatten().all(|&b| b));
    }

    #[test]
    fn uniform_policy_depends_on_tie_break() {
        // White e6 steps to d7/e7/f7 then reaches rank 8; black h4 cannot interfere.
        let mut s = GameState::empty(Color::White);
        put(&mut s, "e6", Color::White);
        put(&mut s, "h4", Color::Black);
        let w = minimax_solve(&s, 6).unwrap();
        let p = Puzzle::new(s.clone(), w.pv.clone()).unwrap();
        // Lowest legal move e6d5 does not win in two moves.
        assert!(!solve_with(&Uniform, &p, 0).unwrap());

        // For black the lowest move index points towards its goal: b3a2,
        // then a2a1, which is exactly the line.
        let mut t = GameState::empty(Color::Black);
        put(&mut t, "b3", Color::Black);
        put(&mut t, "g5", Color::White);
        let w = minimax_solve(&t, 6).unwrap();
        assert_eq!(w.plies, 3);
        assert_eq!(move_name(move_list(&t)[0]), "b3a2");
        assert_eq!(w.pv[0], move_list(&t)[0]);
        let p = Puzzle::new(t, w.pv).unwrap();
        assert!(solve_with(&Uniform, &p, 0).unwrap());
    }

    #[test]
    fn off_line_forced_wins_are_accepted() {
        let mut s = GameState::empty(Color::White);
        put(&mut s, "e6", Color::White);
        put(&mut s, "h4", Color::Black);
        let w = minimax_solve(&s, 6).unwrap();
        // e6d7 is the line; e6f7 wins just as fast.
        assert_eq!(move_name(w.pv[0]), "e6d7");
        struct Prefers(usize);
        impl PolicySource for Prefers {
            fn policy(&self, s: &GameState, stage: i32) -> Result<PolicyDistribution> {
                let mut logits = vec![0.0; MOVES];
                let legal = legal_moves(s);
                if legal[self.0] {
                    logits[self.0] = 10.0;
                } else {
                    // Otherwise step straight towards the goal.
                    for m in move_list(s) {
                        if m % 64 >= 56 {
                            logits[m] = 10.0;
                        }
                    }
                }
                PolicyDistribution::from_logits(&logits, &legal, stage)
            }
        }
        let p = Puzzle::new(s, w.pv).unwrap();
        assert!(solve_with(&Prefers(parse_move("e6f7").unwrap()), &p, 0).unwrap());
        assert!(!solve_with(&Prefers(parse_move("e6e5").unwrap()), &p, 0).unwrap());
    }
}
