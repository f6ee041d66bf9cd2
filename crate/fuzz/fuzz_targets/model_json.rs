#![no_main]

use libfuzzer_sys::fuzz_target;
use tnqk::svm::{OvoEnsemble, SvmModel};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Same surface accepts either a binary model or an ensemble.
        let _ = SvmModel::from_json(text);
        let _ = OvoEnsemble::from_json(text);
    }
});
