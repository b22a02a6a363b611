#![no_main]

use ctam_core::codec::entropy::BlockDecoder;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(mut dec) = BlockDecoder::new(data, 0) else { return };
    for i in 0..64 {
        if dec.decode_block(i % 3).is_err() {
            return;
        }
    }
    let _ = dec.finish();
});
