#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::geometry::io::{parse_xyz, write_xyz};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cloud) = parse_xyz(text) {
        let again = parse_xyz(&write_xyz(&cloud)).expect("written xyz parses");
        assert_eq!(again.len(), cloud.len());
    }
});
