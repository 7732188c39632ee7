#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::arena::{legal_moves, positions_from_jsonl, positions_to_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(states) = positions_from_jsonl(s) {
        for st in &states {
            let _ = legal_moves(st);
        }
        let back = positions_from_jsonl(&positions_to_jsonl(&states)).expect("re-read own output");
        assert_eq!(back, states);
    }
});
