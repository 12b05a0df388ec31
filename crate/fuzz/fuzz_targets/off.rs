#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::geometry::io::parse_off;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = parse_off(text) {
        let n = mesh.vertices.len();
        assert!(mesh.faces.iter().flatten().all(|&i| i < n));
    }
});
