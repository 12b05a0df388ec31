use std::fs;

use sdfc_core::config::RunConfig;
use sdfc_core::data::CorpusSpec;
use sdfc_core::train::TrainSetup;
use sdfc_core::Error;

#[test]
fn defaults_are_valid_and_round_trip() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    let text = cfg.to_toml().unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
}

#[test]
fn unknown_keys_are_named_in_the_error() {
    for (text, key) in [
        ("bogus = 1\n", "bogus"),
        ("[loss]\nrecon = 1.0\n", "recon"),
        ("[network]\nwidth = 3\n", "width"),
        ("[[network.set_abstraction]]\nratio = 0.5\nradius = 0.2\nmax_neighbors = 4\nmlp = [4]\nk = 1\n", "k"),
    ] {
        match RunConfig::from_toml(text) {
            Err(Error::Config(msg)) => assert!(msg.contains(key), "{msg}"),
            other => panic!("{text:?} gave {other:?}"),
        }
    }
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        "[loss]\nrec = -1.0\n",
        "[loss]\ngp = nan\n",
        "[optim]\nbatch_size = 0\n",
        "[schedule]\nstages = [100, 300]\n",
        "[eval]\npartiality_ratios = [0.0]\n",
        "[corpus]\ncount = 0\n",
    ] {
        let err = RunConfig::from_toml(text).unwrap_err();
        assert!(err.is_validation(), "{text:?} gave {err:?}");
    }
}

#[test]
fn paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "[output]\ndir = \"results\"\n[corpus]\nsource = \"meshes\"\n").unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.output.dir, dir.path().join("results"));
    assert_eq!(cfg.corpus.source, Some(dir.path().join("meshes")));
    assert_eq!(cfg.checkpoint_path(), dir.path().join("results/checkpoint.sdfc"));
    assert!(matches!(RunConfig::load(&dir.path().join("absent.toml")), Err(Error::Config(_))));
}

#[test]
fn checked_in_desk_config_matches_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.train_setup(), TrainSetup::default());
    assert_eq!(cfg.corpus, CorpusSpec::default());
}
