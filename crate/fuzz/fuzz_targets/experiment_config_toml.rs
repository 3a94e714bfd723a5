#![no_main]

use libfuzzer_sys::fuzz_target;
use oneclass::experiment::parse_experiment_config;

// Arbitrary TOML must parse or error, never panic. A config that parses
// has passed validation, so rendering it must reparse to the same render.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_experiment_config(text) {
        let rendered = toml::to_string(&config).expect("valid config must serialize");
        let reparsed = parse_experiment_config(&rendered).expect("rendered config must reparse");
        let rendered_again = toml::to_string(&reparsed).expect("reparsed config must serialize");
        assert_eq!(rendered, rendered_again);
    }
});
