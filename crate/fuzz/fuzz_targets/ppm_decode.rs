#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = ctam_core::formats::ppm::decode(data) {
        let again = ctam_core::formats::ppm::decode(&ctam_core::formats::ppm::encode(&img)).unwrap();
        assert_eq!(again, img);
    }
});
