#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::geometry::{decode_surface, encode_surface};

fuzz_target!(|data: &[u8]| {
    if let Ok(cloud) = decode_surface(data) {
        let bytes = encode_surface(&cloud).expect("decoded cloud encodes");
        assert_eq!(decode_surface(&bytes).expect("re-decodes"), cloud);
    }
});
