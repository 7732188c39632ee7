#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::model::io;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(w) = io::from_json_str(s) {
        // Anything accepted must survive a round trip unchanged.
        let again = io::from_json_str(&io::to_json_string(&w)).expect("re-read own output");
        assert_eq!(w, again);
    }
});
