#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = dualrisk::config::parse_config(data) {
        // a validated config must survive a round trip unchanged
        let text = serde_json::to_vec(&cfg).unwrap();
        assert_eq!(dualrisk::config::parse_config(&text).unwrap(), cfg);
    }
});
