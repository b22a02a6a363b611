#![no_main]

use ctam_core::metrics::{bd_rate, read_rd_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_rd_csv(data) {
        let _ = bd_rate(&points, &points);
    }
});
