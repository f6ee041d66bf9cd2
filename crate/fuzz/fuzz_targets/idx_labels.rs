#![no_main]

use libfuzzer_sys::fuzz_target;
use tnqk::pipeline::read_idx_labels;

fuzz_target!(|data: &[u8]| {
    let _ = read_idx_labels(data);
});
