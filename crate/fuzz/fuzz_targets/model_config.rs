#![no_main]

use libfuzzer_sys::fuzz_target;
use postln_lens::model::ModelConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<ModelConfig>(data) {
        let _ = cfg.validate();
    }
});
