#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::lens::{report_from_jsonl, report_to_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = report_from_jsonl(s) {
        let _ = report_to_jsonl(&r);
    }
});
