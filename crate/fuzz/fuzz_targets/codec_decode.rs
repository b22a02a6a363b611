#![no_main]

use ctam_core::codec::{decode_with_limit, encode};
use libfuzzer_sys::fuzz_target;

// Small pixel budget keeps each run fast.
const MAX_PIXELS: usize = 1 << 14;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = decode_with_limit(data, MAX_PIXELS) {
        let again = encode(&d.image, d.header.preset, d.header.gamma, d.guidance.as_ref()).unwrap();
        assert!(decode_with_limit(&again.bitstream, MAX_PIXELS).is_ok());
    }
});
