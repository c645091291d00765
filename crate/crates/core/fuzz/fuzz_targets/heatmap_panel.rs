#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::explain::{panel_to_csv, parse_panel_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_panel_csv("fuzz", text) {
        assert_eq!(
            parse_panel_csv("fuzz", &panel_to_csv(&m)).expect("reparse"),
            m
        );
    }
});
