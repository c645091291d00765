#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::logio::{parse_report_csv, report_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = parse_report_csv("fuzz", text) {
        assert_eq!(
            parse_report_csv("fuzz", &report_to_csv(&report)).expect("reparse"),
            report
        );
    }
});
