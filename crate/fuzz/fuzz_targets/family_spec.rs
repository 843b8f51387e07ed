#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(family) = maxrun::parse_family_spec(text) {
            // whatever parses must serialize and parse back to the same family
            let again = maxrun::parse_family_spec(&family.to_spec_string().unwrap()).unwrap();
            assert_eq!(again.id(), family.id());
        }
    }
});
