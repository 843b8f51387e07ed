#![no_main]

use libfuzzer_sys::fuzz_target;
use maxrun::stream::{format_digit_file, parse_digit_file};

fuzz_target!(|data: &[u8]| {
    let Some((&b, rest)) = data.split_first() else {
        return;
    };
    let base = 2 + b % 9;
    if let Ok(digits) = parse_digit_file(rest, base) {
        assert!(digits.iter().all(|&d| d < base));
        assert_eq!(
            parse_digit_file(format_digit_file(&digits).as_bytes(), base).unwrap(),
            digits
        );
    }
});
