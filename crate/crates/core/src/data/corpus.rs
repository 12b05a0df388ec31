use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::preprocess_with_frame;
use super::shapes::random_rotation;
use super::{AnalyticShape, Family, PreprocessConfig, Preprocessed, Primitive, ShapeRecord, Split};
use crate::error::{Error, Result};
use crate::geometry::io::{is_mesh_path, read_mesh, write_mesh};
use crate::geometry::{
    decode_surface, encode_surface, marching_cubes, retained_count, ScalarGrid, SdfSampleSet,
};

/// Where shapes come from and how they are preprocessed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    /// Directory of `.obj`/`.off` meshes; procedural families are used when unset.
    pub source: Option<PathBuf>,
    pub families: Vec<Family>,
    pub count: usize,
    pub seed: u64,
    pub ellipsoid_radii: [f64; 2],
    pub capsule_half_length: [f64; 2],
    pub capsule_radius: [f64; 2],
    pub box_half_extent: [f64; 2],
    pub box_rounding: [f64; 2],
    /// Grid resolution used to mesh procedural shapes.
    pub mesh_resolution: usize,
    pub sdf_samples: usize,
    pub surface_points: usize,
    pub test_fraction: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            source: None,
            families: vec![Family::Ellipsoid, Family::Capsule],
            count: 50,
            seed: 0,
            ellipsoid_radii: [0.3, 0.8],
            capsule_half_length: [0.1, 0.4],
            capsule_radius: [0.15, 0.35],
            box_half_extent: [0.2, 0.45],
            box_rounding: [0.05, 0.15],
            mesh_resolution: 32,
            sdf_samples: 100_000,
            surface_points: 32_768,
            test_fraction: 0.22,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("corpus: {msg}")));
        if self.count == 0 || self.sdf_samples == 0 || self.surface_points == 0 {
            return bad("count, sdf_samples and surface_points must be positive".into());
        }
        if self.families.is_empty() {
            return bad("families must not be empty".into());
        }
        for (name, [lo, hi]) in [
            ("ellipsoid_radii", self.ellipsoid_radii),
            ("capsule_half_length", self.capsule_half_length),
            ("capsule_radius", self.capsule_radius),
            ("box_half_extent", self.box_half_extent),
            ("box_rounding", self.box_rounding),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} must be a positive range, got [{lo}, {hi}]"));
            }
        }
        if self.mesh_resolution < 4 {
            return bad(format!("mesh_resolution {} below 4", self.mesh_resolution));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        Ok(())
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        PreprocessConfig {
            sdf_samples: self.sdf_samples,
            surface_points: self.surface_points,
            ..PreprocessConfig::default()
        }
    }

    fn shape_rng(&self, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64 + 1);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discard {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub records: Vec<ShapeRecord>,
    pub discarded: Vec<Discard>,
}

fn draw<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn random_primitive<R: Rng + ?Sized>(spec: &CorpusSpec, family: Family, rng: &mut R) -> Primitive {
    match family {
        Family::Ellipsoid => Primitive::Ellipsoid {
            radii: [0; 3].map(|_| draw(rng, spec.ellipsoid_radii)),
        },
        Family::Capsule => Primitive::Capsule {
            half_length: draw(rng, spec.capsule_half_length),
            radius: draw(rng, spec.capsule_radius),
        },
        Family::RoundedBox => Primitive::RoundedBox {
            half_extents: [0; 3].map(|_| draw(rng, spec.box_half_extent)),
            rounding: draw(rng, spec.box_rounding),
        },
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Ellipsoid => "ellipsoid",
        Family::Capsule => "capsule",
        Family::RoundedBox => "rounded_box",
    }
}

/// Procedural shapes meshed by marching cubes on their closed-form SDF, then
/// preprocessed and split.
pub fn generate_toy_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let cfg = spec.preprocess_config();
    let results: Vec<Result<(String, Preprocessed)>> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = spec.shape_rng(i);
            let family = spec.families[i % spec.families.len()];
            let shape = AnalyticShape {
                primitive: random_primitive(spec, family, &mut rng),
                rotation: random_rotation(&mut rng),
            };
            let grid = ScalarGrid::sample(spec.mesh_resolution, -1.0, 1.0, |p| shape.sdf(p))?;
            let mesh = marching_cubes(&grid.padded(1.0), 0.0)?;
            let id = format!("{}_{i:03}", family_name(family));
            let (mut out, frame) = preprocess_with_frame(&id, &mesh, &cfg, &mut rng)?;
            if let (Preprocessed::Kept(rec), Some(frame)) = (&mut out, frame) {
                rec.analytic = Some((shape, frame));
            }
            Ok((id, out))
        })
        .collect();
    assemble(results, spec)
}

/// Preprocess every `.obj`/`.off` file of `dir`, in file-name order.
pub fn preprocess_directory(dir: &Path, spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file() && is_mesh_path(p));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no meshes found in {}", dir.display())));
    }
    let cfg = spec.preprocess_config();
    let results = paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("mesh")
                .to_string();
            let mesh = read_mesh(path)?;
            let (out, _) = preprocess_with_frame(&id, &mesh, &cfg, &mut spec.shape_rng(i))?;
            Ok((id, out))
        })
        .collect();
    assemble(results, spec)
}

fn assemble(results: Vec<Result<(String, Preprocessed)>>, spec: &CorpusSpec) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for r in results {
        match r? {
            (_, Preprocessed::Kept(rec)) => corpus.records.push(rec),
            (id, Preprocessed::Discarded(reason)) => corpus.discarded.push(Discard { id, reason }),
        }
    }
    if !corpus.records.is_empty() {
        let (_, test) = split(corpus.records.len(), spec.test_fraction, spec.seed)?;
        for i in test {
            corpus.records[i].split = Split::Test;
        }
    }
    Ok(corpus)
}

/// Disjoint train and test index lists (each sorted) with
/// `⌈n·fraction⌉` test items.
pub fn split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot split an empty corpus".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let k = retained_count(test_fraction, n).min(n.saturating_sub(1)).max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..k].to_vec();
    let mut train = idx[k..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

const INDEX_HEADER: &str = "id\tsplit\tinside_fraction\tdiscard_reason";

impl Corpus {
    pub fn train(&self) -> Vec<&ShapeRecord> {
        self.records.iter().filter(|r| r.split == Split::Train).collect()
    }

    pub fn test(&self) -> Vec<&ShapeRecord> {
        self.records.iter().filter(|r| r.split == Split::Test).collect()
    }

    /// Writes `<id>/mesh.obj`, `<id>/sdf.bin`, `<id>/surface.bin` for every
    /// kept shape, then `index.tsv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for rec in &self.records {
            let d = dir.join(&rec.id);
            fs::create_dir_all(&d)?;
            write_mesh(&d.join("mesh.obj"), &rec.mesh)?;
            fs::write(d.join("sdf.bin"), rec.sdf.to_bytes())?;
            fs::write(d.join("surface.bin"), encode_surface(&rec.surface)?)?;
        }
        let mut index = String::from(INDEX_HEADER);
        index.push('\n');
        for rec in &self.records {
            let _ = writeln!(index, "{}\t{}\t{}\t", rec.id, rec.split.as_str(), rec.inside_fraction());
        }
        for d in &self.discarded {
            let _ = writeln!(index, "{}\t-\t-\t{}", d.id, d.reason);
        }
        fs::write(dir.join("index.tsv"), index)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Corpus> {
        let index_path = dir.join("index.tsv");
        let text = fs::read_to_string(&index_path)?;
        let parse_err = |line: usize, msg: &str| Error::Parse {
            path: index_path.clone(),
            msg: format!("line {line}: {msg}"),
        };
        let mut lines = text.lines();
        if lines.next() != Some(INDEX_HEADER) {
            return Err(parse_err(1, "unexpected header"));
        }
        let mut corpus = Corpus::default();
        for (n, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            let [id, split, _, reason] = cols[..] else {
                return Err(parse_err(n + 2, "expected 4 tab-separated columns"));
            };
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(parse_err(n + 2, "invalid shape id"));
            }
            let split = match split {
                "train" => Split::Train,
                "test" => Split::Test,
                "-" => {
                    corpus.discarded.push(Discard {
                        id: id.into(),
                        reason: reason.into(),
                    });
                    continue;
                }
                _ => return Err(parse_err(n + 2, "split must be train, test or -")),
            };
            let d = dir.join(id);
            corpus.records.push(ShapeRecord {
                id: id.into(),
                mesh: read_mesh(&d.join("mesh.obj"))?,
                sdf: SdfSampleSet::from_bytes(&fs::read(d.join("sdf.bin"))?)?,
                surface: decode_surface(&fs::read(d.join("surface.bin"))?)?,
                split,
                analytic: None,
            });
        }
        Ok(corpus)
    }
}
