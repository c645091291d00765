#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::logio::{meta_to_text, parse_meta};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(meta) = parse_meta("fuzz", text) {
        assert_eq!(parse_meta("fuzz", &meta_to_text(&meta)).expect("reparse"), meta);
    }
});
