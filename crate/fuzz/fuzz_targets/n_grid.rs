#![no_main]

use libfuzzer_sys::fuzz_target;
use maxrun::NGrid;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = NGrid::parse(text) {
            assert!(grid.values().windows(2).all(|w| w[0] < w[1]));
            assert!(grid.values().first().is_some_and(|&n| n >= 1));
        }
    }
});
