#![no_main]

use libfuzzer_sys::fuzz_target;
use tnqk::preprocess::PreprocessBundle;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = PreprocessBundle::from_json(text);
    }
});
