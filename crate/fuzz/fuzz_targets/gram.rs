#![no_main]

use libfuzzer_sys::fuzz_target;
use tnqk::kernels::read_gram_bytes;

fuzz_target!(|data: &[u8]| {
    // Length fields are validated before any allocation sized by them.
    let _ = read_gram_bytes(data);
});
