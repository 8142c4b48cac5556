//! OFF and OBJ triangle-mesh files: reading with line-numbered errors,
//! writing with full-precision floats.
//!
//! Only triangles are accepted — polygon rows with a different arity are
//! reported, not fan-triangulated, so a file round-trips byte-for-byte
//! through read/write modulo formatting. Meshes are validated (closed,
//! oriented, non-degenerate) on read.

use std::fs;
use std::path::Path;

use crate::mesh::TriMesh;
use crate::tensor::Vector;
use crate::{Error, Result};

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::MeshParse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Lines with content: comments (`#` and, for OFF, anything after `#`) and
/// blank lines removed, original 1-based line numbers kept.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = body.trim();
        if trimmed.is_empty() {
            None
        } else {
            Some((i + 1, trimmed))
        }
    })
}

/// Read an OFF file (triangles only).
pub fn read_off(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = content_lines(&text);

    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let counts_text = if header == "OFF" {
        let (line, counts) = lines
            .next()
            .ok_or_else(|| parse_error(path, line, "missing count row after OFF header"))?;
        (line, counts)
    } else if let Some(rest) = header.strip_prefix("OFF") {
        // Single-line variant: "OFF nv nf ne".
        (line, rest.trim())
    } else {
        return Err(parse_error(path, line, "expected OFF header"));
    };

    let counts: Vec<&str> = counts_text.1.split_whitespace().collect();
    if counts.len() < 2 {
        return Err(parse_error(
            path,
            counts_text.0,
            "count row needs at least vertex and face counts",
        ));
    }
    let nv: usize = counts[0]
        .parse()
        .map_err(|_| parse_error(path, counts_text.0, "bad vertex count"))?;
    let nf: usize = counts[1]
        .parse()
        .map_err(|_| parse_error(path, counts_text.0, "bad face count"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = lines
            .next()
            .ok_or_else(|| parse_error(path, 0, "file ends inside vertex block"))?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() < 3 {
            return Err(parse_error(path, line, "vertex row needs three coordinates"));
        }
        let mut v = [0.0; 3];
        for (i, p) in parts.iter().take(3).enumerate() {
            v[i] = p
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad coordinate '{p}'")))?;
        }
        vertices.push(Vector::new(v));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, text) = lines
            .next()
            .ok_or_else(|| parse_error(path, 0, "file ends inside face block"))?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        let arity: usize = parts[0]
            .parse()
            .map_err(|_| parse_error(path, line, "bad face arity"))?;
        if arity != 3 {
            return Err(parse_error(
                path,
                line,
                format!("only triangles are supported, found a {arity}-gon"),
            ));
        }
        if parts.len() < 4 {
            return Err(parse_error(path, line, "face row needs three indices"));
        }
        let mut tri = [0usize; 3];
        for (i, p) in parts[1..4].iter().enumerate() {
            tri[i] = p
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad vertex index '{p}'")))?;
        }
        triangles.push(tri);
    }

    TriMesh::new(vertices, triangles)
}

/// Write an OFF file with 17-significant-digit coordinates.
pub fn write_off(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str("OFF\n");
    out.push_str(&format!(
        "{} {} {}\n",
        mesh.vertices.len(),
        mesh.triangles.len(),
        0
    ));
    for v in &mesh.vertices {
        out.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a Wavefront OBJ file (triangles only; `v` and `f` rows, with
/// `f` accepting the `index/texture/normal` slash syntax).
pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (line, text) in content_lines(&text) {
        let mut parts = text.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<&str> = parts.collect();
                if coords.len() < 3 {
                    return Err(parse_error(path, line, "vertex row needs three coordinates"));
                }
                let mut v = [0.0; 3];
                for (i, p) in coords.iter().take(3).enumerate() {
                    v[i] = p
                        .parse()
                        .map_err(|_| parse_error(path, line, format!("bad coordinate '{p}'")))?;
                }
                vertices.push(Vector::new(v));
            }
            Some("f") => {
                let corners: Vec<&str> = parts.collect();
                if corners.len() != 3 {
                    return Err(parse_error(
                        path,
                        line,
                        format!(
                            "only triangles are supported, found a face with {} corners",
                            corners.len()
                        ),
                    ));
                }
                let mut tri = [0usize; 3];
                for (i, corner) in corners.iter().enumerate() {
                    let index_text = corner.split('/').next().unwrap_or("");
                    let index: i64 = index_text
                        .parse()
                        .map_err(|_| parse_error(path, line, format!("bad vertex index '{corner}'")))?;
                    if index < 1 {
                        return Err(parse_error(
                            path,
                            line,
                            format!("vertex index {index} must be positive (1-based)"),
                        ));
                    }
                    tri[i] = (index - 1) as usize;
                }
                triangles.push(tri);
            }
            // Normals, texture coordinates, groups, materials: ignored.
            Some("vn") | Some("vt") | Some("o") | Some("g") | Some("s") | Some("usemtl")
            | Some("mtllib") => {}
            Some(other) => {
                return Err(parse_error(path, line, format!("unsupported row '{other}'")));
            }
            None => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Write a Wavefront OBJ file with 17-significant-digit coordinates.
pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Dispatch on extension: `.off` or `.obj`.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("off") => read_off(path),
        Some("obj") => read_obj(path),
        _ => Err(parse_error(
            path,
            0,
            "unknown mesh format (expected .off or .obj)",
        )),
    }
}
