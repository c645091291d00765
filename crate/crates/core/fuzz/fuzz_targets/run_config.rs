#![no_main]

use libfuzzer_sys::fuzz_target;
use partppo::ppo::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_kv_text("fuzz", text) {
        let again = RunConfig::from_kv_text("fuzz", &cfg.to_kv_text()).expect("reparse");
        assert_eq!(again, cfg);
    }
});
