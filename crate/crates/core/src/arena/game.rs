//! Crossing: eight runners a side, one king-step per move, first to the far
//! rank (or to capture every enemy runner) wins.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MOVES;
use crate::notation::move_name;

pub const NO_CAPTURE_LIMIT: u32 = 100;
pub const PLY_LIMIT: u32 = 400;
pub const MAX_RUNNERS: usize = 8;

const STEPS: [(i32, i32); 8] = [
    (-1, -1), (0, -1), (1, -1),
    (-1, 0),           (1, 0),
    (-1, 1),  (0, 1),  (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    /// The rank this side must reach.
    pub fn goal_rank(self) -> usize {
        match self {
            Color::White => 7,
            Color::Black => 0,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Color::White => 'w',
            Color::Black => 'b',
        }
    }

    pub fn from_char(c: char) -> Result<Color> {
        match c {
            'w' => Ok(Color::White),
            'b' => Ok(Color::Black),
            _ => Err(Error::format(format!("side to move must be 'w' or 'b', got {c:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    Runner(Color),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Ongoing,
    WhiteWin,
    BlackWin,
    Draw,
}

impl Outcome {
    pub fn win_for(c: Color) -> Outcome {
        match c {
            Color::White => Outcome::WhiteWin,
            Color::Black => Outcome::BlackWin,
        }
    }

    pub fn is_terminal(self) -> bool {
        self != Outcome::Ongoing
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    pub board: [Cell; 64],
    pub side_to_move: Color,
    pub ply: u32,
    /// Plies since the last capture.
    pub halfmove: u32,
}

impl GameState {
    pub fn initial() -> GameState {
        let mut board = [Cell::Empty; 64];
        for f in 0..8 {
            board[f] = Cell::Runner(Color::White);
            board[56 + f] = Cell::Runner(Color::Black);
        }
        GameState {
            board,
            side_to_move: Color::White,
            ply: 0,
            halfmove: 0,
        }
    }

    pub fn empty(side_to_move: Color) -> GameState {
        GameState {
            board: [Cell::Empty; 64],
            side_to_move,
            ply: 0,
            halfmove: 0,
        }
    }

    /// Parse a 64-character board over `.wb`, `a1` first.
    pub fn from_board_str(board: &str, side_to_move: Color) -> Result<GameState> {
        let chars: Vec<char> = board.chars().collect();
        if chars.len() != 64 {
            return Err(Error::format(format!("board has {} cells, expected 64", chars.len())));
        }
        let mut s = GameState::empty(side_to_move);
        for (i, c) in chars.into_iter().enumerate() {
            s.board[i] = match c {
                '.' => Cell::Empty,
                'w' => Cell::Runner(Color::White),
                'b' => Cell::Runner(Color::Black),
                _ => return Err(Error::format(format!("bad board cell {c:?} at {i}"))),
            };
        }
        s.validate()?;
        Ok(s)
    }

    pub fn board_string(&self) -> String {
        self.board
            .iter()
            .map(|c| match c {
                Cell::Empty => '.',
                Cell::Runner(col) => col.as_char(),
            })
            .collect()
    }

    pub fn count(&self, c: Color) -> usize {
        self.board.iter().filter(|&&x| x == Cell::Runner(c)).count()
    }

    pub fn validate(&self) -> Result<()> {
        for c in [Color::White, Color::Black] {
            if self.count(c) > MAX_RUNNERS {
                return Err(Error::Rule(format!("more than {MAX_RUNNERS} {c:?} runners")));
            }
        }
        Ok(())
    }

    /// Board and side to move; the counters do not take part.
    pub fn key(&self) -> ([Cell; 64], Color) {
        (self.board, self.side_to_move)
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rank in (0..8).rev() {
            for file in 0..8 {
                let c = match self.board[rank * 8 + file] {
                    Cell::Empty => '.',
                    Cell::Runner(Color::White) => 'W',
                    Cell::Runner(Color::Black) => 'B',
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{} to move", self.side_to_move.as_char())
    }
}

/// Squares a runner on `sq` could step to on an empty board, ascending.
pub fn neighbours(sq: usize) -> impl Iterator<Item = usize> {
    let (file, rank) = ((sq % 8) as i32, (sq / 8) as i32);
    STEPS.iter().filter_map(move |&(df, dr)| {
        let (f, r) = (file + df, rank + dr);
        ((0..8).contains(&f) && (0..8).contains(&r)).then_some((r * 8 + f) as usize)
    })
}

/// Moves of the side to move as `source·64 + target`, ascending, ignoring
/// whether the game is already over.
fn pseudo_moves(s: &GameState) -> Vec<usize> {
    let me = Cell::Runner(s.side_to_move);
    let mut out = Vec::new();
    for src in 0..64 {
        if s.board[src] != me {
            continue;
        }
        for tgt in neighbours(src) {
            if s.board[tgt] != me {
                out.push(src * 64 + tgt);
            }
        }
    }
    out
}

fn has_move(s: &GameState) -> bool {
    let me = Cell::Runner(s.side_to_move);
    (0..64).any(|src| s.board[src] == me && neighbours(src).any(|t| s.board[t] != me))
}

pub fn outcome(s: &GameState) -> Outcome {
    // The side that just moved is checked first; both goals reached at once
    // cannot arise in play.
    let last = s.side_to_move.opposite();
    for c in [last, last.opposite()] {
        let goal = c.goal_rank() * 8;
        if s.board[goal..goal + 8].contains(&Cell::Runner(c)) || s.count(c.opposite()) == 0 {
            return Outcome::win_for(c);
        }
    }
    if s.halfmove >= NO_CAPTURE_LIMIT || s.ply >= PLY_LIMIT || !has_move(s) {
        return Outcome::Draw;
    }
    Outcome::Ongoing
}

pub fn is_terminal(s: &GameState) -> Outcome {
    outcome(s)
}

/// Legal moves, ascending; empty once the game is over.
pub fn move_list(s: &GameState) -> Vec<usize> {
    if outcome(s).is_terminal() {
        Vec::new()
    } else {
        pseudo_moves(s)
    }
}

/// 4096-entry legality mask indexed `source·64 + target`.
pub fn legal_moves(s: &GameState) -> Vec<bool> {
    let mut mask = vec![false; MOVES];
    for m in move_list(s) {
        mask[m] = true;
    }
    mask
}

pub fn apply_move(s: &GameState, mv: usize) -> Result<GameState> {
    if mv >= MOVES {
        return Err(Error::Rule(format!("move index {mv} out of range")));
    }
    let (src, tgt) = (mv / 64, mv % 64);
    let me = Cell::Runner(s.side_to_move);
    let reason = if outcome(s).is_terminal() {
        Some("the game is over")
    } else if s.board[src] != me {
        Some("no runner of the side to move on the source square")
    } else if !neighbours(src).any(|t| t == tgt) {
        Some("target is not one step away")
    } else if s.board[tgt] == me {
        Some("target holds an own runner")
    } else {
        None
    };
    if let Some(r) = reason {
        return Err(Error::Rule(format!("illegal move {}: {r}", move_name(mv))));
    }
    let mut next = s.clone();
    let capture = s.board[tgt] != Cell::Empty;
    next.board[tgt] = me;
    next.board[src] = Cell::Empty;
    next.side_to_move = s.side_to_move.opposite();
    next.ply += 1;
    next.halfmove = if capture { 0 } else { s.halfmove + 1 };
    Ok(next)
}
