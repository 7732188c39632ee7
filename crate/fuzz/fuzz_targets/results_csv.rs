#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::arena::GameResultSet;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = GameResultSet::from_csv(s) {
        let back = GameResultSet::from_csv(&r.to_csv()).expect("re-read own output");
        assert_eq!(back.games.len(), r.games.len());
    }
});
