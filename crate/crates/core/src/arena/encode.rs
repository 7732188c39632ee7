//! Board → model input. Planes per square: own runner, enemy runner,
//! white-to-move (all ones or all zeros), constant one. The board is not
//! flipped for black; the side-to-move plane tells the colours apart.

use crate::error::{Error, Result};
use crate::la::Matrix;
use crate::lens::PreparedPosition;
use crate::model::{prepare_input, WeightSet};

use super::game::{legal_moves, neighbours, Cell, Color, GameState};

pub const PLANES: usize = 4;

/// Token-major `64 × PLANES` booleans.
pub fn planes(s: &GameState) -> Vec<bool> {
    let me = s.side_to_move;
    let white_to_move = me == Color::White;
    let mut out = Vec::with_capacity(64 * PLANES);
    for cell in &s.board {
        out.push(*cell == Cell::Runner(me));
        out.push(*cell == Cell::Runner(me.opposite()));
        out.push(white_to_move);
        out.push(true);
    }
    out
}

/// `1` where a runner could step from `i` to `j` on an empty board, `-1` on
/// the diagonal, `0` elsewhere.
pub fn posenc() -> Matrix {
    let mut m = Matrix::zeros(64, 64);
    for i in 0..64 {
        m.set(i, i, -1.0);
        for j in neighbours(i) {
            m.set(i, j, 1.0);
        }
    }
    m
}

pub fn prepare_state(w: &WeightSet, s: &GameState, posenc: &Matrix) -> Result<PreparedPosition> {
    if w.config.planes != PLANES {
        return Err(Error::Config(format!(
            "board encoding has {PLANES} planes, model expects {}",
            w.config.planes
        )));
    }
    Ok(PreparedPosition {
        h0: prepare_input(&planes(s), posenc, w)?,
        legal: legal_moves(s),
    })
}
