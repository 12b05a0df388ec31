#![no_main]

use libfuzzer_sys::fuzz_target;
use sdfc_core::geometry::io::{parse_obj, write_obj};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = parse_obj(text) {
        let again = parse_obj(&write_obj(&mesh)).expect("written obj parses");
        assert_eq!(again.faces, mesh.faces);
        assert_eq!(again.vertices.len(), mesh.vertices.len());
    }
});
