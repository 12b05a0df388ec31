#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::autodiff::ParamStore;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = ParamStore::from_bytes(data) {
        assert_eq!(store.to_bytes(), data);
    }
});
