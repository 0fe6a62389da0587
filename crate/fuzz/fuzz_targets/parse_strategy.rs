#![no_main]

use dualrisk::simulate::{self, Horizon, SimConfig};
use dualrisk::ModelParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let m = ModelParams::canonical();
    if let Ok(s) = dualrisk::config::parse_strategy(data, &m) {
        let cfg = SimConfig::new(1, 0, Horizon::Finite { t: 1.0 });
        let out = simulate::simulate_path(&m, &s, &cfg, 0).unwrap();
        assert!(out.discounted_dividends >= 0.0);
    }
});
