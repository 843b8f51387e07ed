#![no_main]

use libfuzzer_sys::fuzz_target;
use maxrun::experiment::{parse_aggregate_csv, parse_limit_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_limit_csv(text);
        let _ = parse_aggregate_csv(text);
    }
});
