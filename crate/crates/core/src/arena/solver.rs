//! Exhaustive forced-win search for the side to move.
//!
//! A win always lands on one of the winner's own plies, so win distances
//! are odd. Defence prefers the longest resistance; every tie goes to the
//! lowest move index.

use super::game::{apply_move, move_list, outcome, GameState, Outcome};

pub const MAX_SOLVE_PLIES: u32 = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForcedWin {
    pub plies: u32,
    pub pv: Vec<usize>,
}

impl ForcedWin {
    /// Moves the winner makes along the line.
    pub fn depth(&self) -> u32 {
        self.plies.div_ceil(2)
    }
}

fn after(s: &GameState, m: usize) -> GameState {
    apply_move(s, m).expect("generated moves are legal")
}

/// Can the side to move force a win within `budget` plies?
fn wins_within(s: &GameState, budget: u32) -> bool {
    budget >= 1 && move_list(s).into_iter().any(|m| move_wins_within(s, m, budget))
}

/// Does playing `m` force a win within `budget` plies, counting `m`?
pub fn move_wins_within(s: &GameState, m: usize, budget: u32) -> bool {
    if budget == 0 {
        return false;
    }
    let me = s.side_to_move;
    let t = after(s, m);
    match outcome(&t) {
        o if o == Outcome::win_for(me) => true,
        Outcome::Ongoing if budget >= 3 => move_list(&t)
            .into_iter()
            .all(|r| wins_within(&after(&t, r), budget - 2)),
        _ => false,
    }
}

/// Shortest forced win distance for the side to move, if ≤ `budget`.
fn distance(s: &GameState, budget: u32) -> Option<u32> {
    (1..=budget).step_by(2).find(|&d| wins_within(s, d))
}

/// The defender's reply that holds out longest against a win that is
/// forced within `budget` plies of `t` (where the defender is to move).
pub fn best_defence(t: &GameState, budget: u32) -> Option<usize> {
    let mut best: Option<(u32, usize)> = None;
    for r in move_list(t) {
        let d = distance(&after(t, r), budget).unwrap_or(u32::MAX);
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, r));
        }
    }
    best.map(|(_, r)| r)
}

/// Shortest forced win for the side to move within `max_plies`, with one
/// principal variation. `max_plies` is clamped to [`MAX_SOLVE_PLIES`].
pub fn minimax_solve(s: &GameState, max_plies: u32) -> Option<ForcedWin> {
    let plies = distance(s, max_plies.min(MAX_SOLVE_PLIES))?;
    let mut pv = Vec::with_capacity(plies as usize);
    let mut cur = s.clone();
    let mut left = plies;
    loop {
        let m = move_list(&cur)
            .into_iter()
            .find(|&m| move_wins_within(&cur, m, left))
            .expect("distance guarantees a winning move");
        pv.push(m);
        cur = after(&cur, m);
        if outcome(&cur).is_terminal() {
            break;
        }
        left -= 2;
        let r = best_defence(&cur, left).expect("an ongoing position has moves");
        pv.push(r);
        cur = after(&cur, r);
    }
    debug_assert_eq!(pv.len() as u32, plies);
    Some(ForcedWin { plies, pv })
}

/// Replays `pv` from `s` and checks that it ends in a win for the side to
/// move exactly on its last move.
pub fn pv_wins(s: &GameState, pv: &[usize]) -> bool {
    let me = s.side_to_move;
    let mut cur = s.clone();
    for (i, &m) in pv.iter().enumerate() {
        match apply_move(&cur, m) {
            Ok(t) => cur = t,
            Err(_) => return false,
        }
        let o = outcome(&cur);
        if o.is_terminal() {
            return i + 1 == pv.len() && o == Outcome::win_for(me);
        }
    }
    false
}
