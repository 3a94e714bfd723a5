#![no_main]

use libfuzzer_sys::fuzz_target;
use oneclass::transforms::parse_transform_set;

// Arbitrary TOML must parse or error, never panic. A parsed set always
// holds at least 2 members, exactly one of them the identity.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = parse_transform_set(text) {
        assert!(set.len() >= 2);
        let identities = set.specs().iter().filter(|s| s.is_identity()).count();
        assert_eq!(identities, 1);
        assert_eq!(
            set.identity_index(),
            set.specs().iter().position(|s| s.is_identity()).unwrap()
        );
    }
});
