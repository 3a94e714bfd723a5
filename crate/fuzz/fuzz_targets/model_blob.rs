#![no_main]

use libfuzzer_sys::fuzz_target;
use oneclass::classifier::load_model_bytes;

// Arbitrary bytes must decode to a model or return an error, never panic.
fuzz_target!(|data: &[u8]| {
    let _ = load_model_bytes(data);
});
