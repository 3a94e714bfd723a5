#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use oneclass::dataio::parse_manifest_str;

// Arbitrary manifest text must either parse or return an error; it must
// never panic, and a successful parse must survive a render round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let origin = Path::new("fuzz.csv");
    let base = Path::new(".");
    if let Ok(manifest) = parse_manifest_str(text, origin, base) {
        let rendered = oneclass::dataio::manifest_to_string(&manifest);
        parse_manifest_str(&rendered, origin, base).expect("rendered manifest must reparse");
    }
});
