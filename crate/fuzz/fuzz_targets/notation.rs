#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::notation::{move_name, parse_move, parse_square, square_name};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(sq) = parse_square(s) {
        assert_eq!(parse_square(&square_name(sq)).unwrap(), sq);
    }
    if let Ok(m) = parse_move(s) {
        assert_eq!(parse_move(&move_name(m)).unwrap(), m);
    }
});
