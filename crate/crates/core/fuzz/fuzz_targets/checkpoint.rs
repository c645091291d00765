#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::ppo::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ck) = Checkpoint::parse("fuzz", text) {
        // anything accepted must survive a write/read cycle unchanged
        let again = Checkpoint::parse("fuzz", &ck.to_text()).expect("reparse");
        assert_eq!(again, ck);
    }
});
