#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::explain::parse_input_opt_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_input_opt_csv("fuzz", text);
});
