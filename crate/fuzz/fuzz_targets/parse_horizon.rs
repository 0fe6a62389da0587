#![no_main]

use dualrisk::simulate::Horizon;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match dualrisk::config::parse_horizon(text) {
        Ok(Horizon::Finite { t }) => assert!(t.is_finite() && t > 0.0),
        Ok(h) => assert_eq!(h, Horizon::infinite()),
        Err(_) => {}
    }
});
