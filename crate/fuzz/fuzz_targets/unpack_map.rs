#![no_main]

use ctam_core::guidance::{pack_map, unpack_map};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let [rows, cols, five, bytes @ ..] = data else { return };
    let (rows, cols) = (usize::from(*rows), usize::from(*cols));
    let levels = if five & 1 == 1 { 5 } else { 3 };
    if let Ok(m) = unpack_map(bytes, rows, cols, levels) {
        assert_eq!(pack_map(&m), bytes);
    }
});
