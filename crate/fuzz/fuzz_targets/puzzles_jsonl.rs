#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::arena::puzzles_from_jsonl;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = puzzles_from_jsonl(s);
});
