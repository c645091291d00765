#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::logio::parse_log_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_log_csv("fuzz", text, 195.0);
});
