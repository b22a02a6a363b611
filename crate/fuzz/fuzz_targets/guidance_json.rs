#![no_main]

use ctam_core::guidance::GuidanceMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = GuidanceMap::from_json(text) {
        assert_eq!(GuidanceMap::from_json(&m.to_json()).unwrap(), m);
    }
});
