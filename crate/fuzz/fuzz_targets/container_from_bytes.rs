#![no_main]

use ctam_core::formats::WeightContainer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(wc) = WeightContainer::from_bytes(data) {
        let bytes = wc.to_bytes();
        assert_eq!(WeightContainer::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }
});
