#![no_main]

use libfuzzer_sys::fuzz_target;
use oneclass::dataio::{decode_image_bytes, preprocess};
use oneclass::Dims;

// Arbitrary bytes must decode to pixels or return an error, never panic.
// Anything that decodes must also survive preprocessing to a fixed shape.
fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = decode_image_bytes(data) {
        let _ = preprocess(raw, Dims::new(16, 16, 1));
    }
});
