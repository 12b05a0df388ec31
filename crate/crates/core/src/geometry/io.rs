//! OBJ / OFF mesh and XYZ point-cloud text formats.

use std::fmt::Write as _;
use std::path::Path;

use super::{PointCloud, TriMesh, Vec3};
use crate::error::{Error, Result};

fn parse_f64(tok: Option<&str>, what: &'static str, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::format(what, format!("line {line}: missing coordinate")))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::format(what, format!("line {line}: bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::format(what, format!("line {line}: non-finite value")));
    }
    Ok(v)
}

fn triangulate(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

/// Parse Wavefront OBJ geometry (`v` and `f` records; polygons are fanned).
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), "OBJ", line)?;
                let y = parse_f64(toks.next(), "OBJ", line)?;
                let z = parse_f64(toks.next(), "OBJ", line)?;
                vertices.push([x, y, z]);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| Error::format("OBJ", format!("line {line}: bad index {tok:?}")))?;
                    let nv = vertices.len() as i64;
                    let resolved = match i {
                        0 => None,
                        i if i > 0 && i <= nv => Some(i - 1),
                        i if i < 0 && -i <= nv => Some(nv + i),
                        _ => None,
                    };
                    let r = resolved.ok_or_else(|| {
                        Error::format("OBJ", format!("line {line}: index {i} out of range"))
                    })?;
                    poly.push(r as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::format("OBJ", format!("line {line}: face needs 3 vertices")));
                }
                triangulate(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Parse an OFF mesh (`OFF` header, counts, vertices, polygon faces).
pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut toks = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let first = toks.next().ok_or_else(|| Error::format("OFF", "empty file"))?;
    let header_rest = first
        .strip_prefix("OFF")
        .ok_or_else(|| Error::format("OFF", "missing OFF header"))?;
    let mut count = |what: &str| -> Result<usize> {
        let t = toks
            .next()
            .ok_or_else(|| Error::format("OFF", format!("missing {what} count")))?;
        t.parse()
            .map_err(|_| Error::format("OFF", format!("bad {what} count {t:?}")))
    };
    if !header_rest.is_empty() {
        return Err(Error::format("OFF", "unsupported OFF variant"));
    }
    let nv = count("vertex")?;
    let nf = count("face")?;
    let _ne = count("edge")?;
    let mut vertices = Vec::with_capacity(nv.min(1 << 20));
    for _ in 0..nv {
        let x = parse_f64(toks.next(), "OFF", 0)?;
        let y = parse_f64(toks.next(), "OFF", 0)?;
        let z = parse_f64(toks.next(), "OFF", 0)?;
        vertices.push([x, y, z]);
    }
    let mut faces = Vec::with_capacity(nf.min(1 << 20));
    for _ in 0..nf {
        let k: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format("OFF", "bad face arity"))?;
        if !(3..=1024).contains(&k) {
            return Err(Error::format("OFF", format!("face arity {k} unsupported")));
        }
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            let i: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::format("OFF", "bad face index"))?;
            if i >= nv {
                return Err(Error::format("OFF", format!("face index {i} out of range")));
            }
            poly.push(i);
        }
        triangulate(&poly, &mut faces);
    }
    TriMesh::new(vertices, faces)
}

/// Parse whitespace-separated `x y z` or `x y z nx ny nz` rows.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (n, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let vals = content
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| parse_f64(Some(t), "XYZ", n + 1))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(Error::format("XYZ", format!("line {}: expected 3 or 6 values", n + 1)));
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::format("XYZ", format!("line {}: inconsistent columns", n + 1)));
        }
        points.push([vals[0], vals[1], vals[2]]);
        if vals.len() == 6 {
            normals.push([vals[3], vals[4], vals[5]]);
        }
    }
    let cloud = PointCloud {
        points,
        normals: (width == Some(6)).then_some(normals),
    };
    cloud
        .validate()
        .map_err(|e| Error::format("XYZ", e.to_string()))?;
    Ok(cloud)
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_xyz(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for (i, p) in cloud.points.iter().enumerate() {
        match &cloud.normals {
            Some(n) => {
                let n = n[i];
                let _ = writeln!(s, "{} {} {} {} {} {}", p[0], p[1], p[2], n[0], n[1], n[2]);
            }
            None => {
                let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
            }
        }
    }
    s
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format { msg, what } => Error::Parse {
            path: path.to_path_buf(),
            msg: format!("{what}: {msg}"),
        },
        other => other,
    })
}

/// Read an `.obj` or `.off` mesh.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = read_text(path)?;
    match extension(path).as_str() {
        "obj" => with_path(path, parse_obj(&text)),
        "off" => with_path(path, parse_off(&text)),
        other => Err(Error::InvalidInput(format!("unsupported mesh extension {other:?}"))),
    }
}

pub fn write_mesh(path: &Path, mesh: &TriMesh) -> Result<()> {
    std::fs::write(path, write_obj(mesh))?;
    Ok(())
}

pub fn is_mesh_path(path: &Path) -> bool {
    matches!(extension(path).as_str(), "obj" | "off")
}

/// Read a point cloud from `.xyz`/`.pts`/`.txt` text or a surface `.bin`.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "bin" => with_path(path, super::sdf_samples::decode_surface(&std::fs::read(path)?)),
        _ => with_path(path, parse_xyz(&read_text(path)?)),
    }
}
