//! Square and move names: files `a`–`h` are columns, ranks `1`–`8` are rows,
//! square index is `rank * 8 + file`, move index is `source * 64 + target`.

use crate::error::{Error, Result};
use crate::model::TOKENS;

pub fn square_name(sq: usize) -> String {
    debug_assert!(sq < TOKENS);
    let file = (b'a' + (sq % 8) as u8) as char;
    let rank = (b'1' + (sq / 8) as u8) as char;
    format!("{file}{rank}")
}

pub fn parse_square(s: &str) -> Result<usize> {
    let b = s.as_bytes();
    if b.len() != 2 || !(b'a'..=b'h').contains(&b[0]) || !(b'1'..=b'8').contains(&b[1]) {
        return Err(Error::format(format!("bad square {s:?}")));
    }
    Ok(((b[1] - b'1') as usize) * 8 + (b[0] - b'a') as usize)
}

pub fn move_name(mv: usize) -> String {
    format!("{}{}", square_name(mv / TOKENS), square_name(mv % TOKENS))
}

pub fn parse_move(s: &str) -> Result<usize> {
    if s.len() != 4 || !s.is_ascii() {
        return Err(Error::format(format!("bad move {s:?}")));
    }
    Ok(parse_square(&s[..2])? * TOKENS + parse_square(&s[2..])?)
}
