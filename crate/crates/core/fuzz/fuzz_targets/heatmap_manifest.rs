#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::explain::{manifest_to_csv, parse_manifest};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(entries) = parse_manifest("fuzz", text) {
        assert!(entries.iter().all(|e| !e.file.contains('/')));
        assert_eq!(
            parse_manifest("fuzz", &manifest_to_csv(&entries)).expect("reparse"),
            entries
        );
    }
});
