//! Replays the fuzz seed corpora through the invariants the fuzz targets check.

use std::fs;
use std::path::PathBuf;

use sdfc_core::autodiff::ParamStore;
use sdfc_core::config::RunConfig;
use sdfc_core::geometry::io::{parse_obj, parse_off, parse_xyz, write_obj, write_xyz};
use sdfc_core::geometry::{decode_surface, encode_surface, SdfSampleSet};
use sdfc_core::train::TrainState;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.into_iter().map(|p| fs::read(p).unwrap()).collect()
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn mesh_and_cloud_text_seeds() {
    for s in seeds("obj") {
        let mesh = parse_obj(text(&s)).unwrap();
        assert_eq!(parse_obj(&write_obj(&mesh)).unwrap().faces, mesh.faces);
    }
    for s in seeds("off") {
        let mesh = parse_off(text(&s)).unwrap();
        assert!(!mesh.faces.is_empty());
    }
    for s in seeds("xyz") {
        let cloud = parse_xyz(text(&s)).unwrap();
        assert_eq!(parse_xyz(&write_xyz(&cloud)).unwrap().len(), cloud.len());
    }
}

#[test]
fn binary_seeds_round_trip() {
    for s in seeds("sdf_samples") {
        assert_eq!(SdfSampleSet::from_bytes(&s).unwrap().to_bytes(), s);
    }
    for s in seeds("surface") {
        let cloud = decode_surface(&s).unwrap();
        assert_eq!(decode_surface(&encode_surface(&cloud).unwrap()).unwrap(), cloud);
    }
    for s in seeds("param_store") {
        assert_eq!(ParamStore::from_bytes(&s).unwrap().to_bytes(), s);
    }
    for s in seeds("train_checkpoint") {
        assert_eq!(TrainState::from_bytes(&s).unwrap().to_bytes().unwrap(), s);
    }
}

#[test]
fn config_seeds_round_trip() {
    for s in seeds("run_config") {
        let cfg = RunConfig::from_toml(text(&s)).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}

#[test]
fn truncated_binary_seeds_are_rejected() {
    for s in seeds("param_store").into_iter().chain(seeds("train_checkpoint")).chain(seeds("sdf_samples")) {
        for cut in [0, 1, 7, s.len() / 2, s.len() - 1] {
            let t = &s[..cut];
            assert!(ParamStore::from_bytes(t).is_err());
            assert!(TrainState::from_bytes(t).is_err());
            assert!(SdfSampleSet::from_bytes(t).is_err());
            assert!(decode_surface(t).is_err() || t.is_empty());
        }
    }
}
