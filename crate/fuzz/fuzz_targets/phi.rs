#![no_main]

use libfuzzer_sys::fuzz_target;
use maxrun::moran::Phi;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // `file:` would touch the filesystem
        if !text.starts_with("file:") {
            if let Ok(phi) = Phi::parse(text) {
                let _ = phi.value(1);
                let _ = phi.sqrt_floor(1000);
            }
        }
        if let Ok(phi) = Phi::table("fuzz", text) {
            let _ = phi.table_len();
        }
    }
});
