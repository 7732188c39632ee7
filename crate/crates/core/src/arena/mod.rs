//! Crossing, a 64-square race game whose moves live in the same 64×64
//! source/target space as the policy head, plus puzzles, tournaments and
//! Elo fitting on top of it.

mod elo;
mod encode;
mod game;
mod player;
mod puzzles;
mod solver;
mod tournament;

pub use elo::{fit_elo, Anchor, EloEstimate, EloParams, GRADIENT_TOL, MAX_SWEEPS};
pub use encode::{planes, posenc, prepare_state, PLANES};
pub use game::{
    apply_move, is_terminal, legal_moves, move_list, neighbours, outcome, Cell, Color, GameState,
    Outcome, MAX_RUNNERS, NO_CAPTURE_LIMIT, PLY_LIMIT,
};
pub use player::{LensPlayer, PolicySource};
pub use puzzles::{
    eval_puzzles, generate_puzzles, positions_from_jsonl, positions_to_jsonl, puzzles_from_jsonl,
    puzzles_to_jsonl, random_positions, solve_with, Puzzle, PuzzleGenConfig, StateRecord,
    MAX_PUZZLE_DEPTH,
};
pub use solver::{best_defence, minimax_solve, move_wins_within, pv_wins, ForcedWin, MAX_SOLVE_PLIES};
pub use tournament::{
    participant_ids, play_game, round_robin, GameRecord, GameResult, GameResultSet,
    TournamentConfig,
};
