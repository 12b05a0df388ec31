#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::train::TrainState;

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = TrainState::from_bytes(data) {
        let bytes = state.to_bytes().expect("loaded state serializes");
        assert_eq!(TrainState::from_bytes(&bytes).expect("re-loads").to_bytes().unwrap(), bytes);
    }
});
