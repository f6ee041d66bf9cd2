#![no_main]

use libfuzzer_sys::fuzz_target;
use tnqk::pipeline::read_idx_images;

fuzz_target!(|data: &[u8]| {
    // The decoder must reject hostile headers without panicking or
    // allocating from attacker-controlled lengths.
    let _ = read_idx_images(data);
});
