#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::geometry::SdfSampleSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = SdfSampleSet::from_bytes(data) {
        assert_eq!(set.to_bytes(), data);
    }
});
