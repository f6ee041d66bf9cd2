#![no_main]

use libfuzzer_sys::fuzz_target;
use tnqk::circuit::Circuit;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Circuit::parse(text);
    }
});
