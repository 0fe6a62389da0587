#![no_main]

use dualrisk::JumpDistribution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = serde_json::from_slice::<JumpDistribution>(data) {
        assert!(d.mean() > 0.0);
        assert!((d.laplace(0.0).unwrap() - 1.0).abs() < 1e-9);
        let q = d.quantile_from_uniform(0.5);
        assert!(q.is_finite() && q >= 0.0);
    }
});
