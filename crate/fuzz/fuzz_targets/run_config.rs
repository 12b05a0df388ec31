#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let again = RunConfig::from_toml(&cfg.to_toml().expect("valid config serializes"));
        assert_eq!(again.expect("serialized config parses"), cfg);
    }
});
