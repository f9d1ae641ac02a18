//! Wavefront OBJ subset: `v`, `vn`, `f` and comments.
//!
//! Texture coordinates, groups, smoothing groups and material statements are
//! accepted and ignored. Polygons are fan-triangulated.

use std::fmt::Write as _;

use super::{Category, Mesh, DEFAULT_DIFFUSE};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjError {
    #[error("line {line}: vertex index {index} out of range (have {count} vertices)")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("line {line}: normal index {index} out of range (have {count} normals)")]
    NormalOutOfRange { line: usize, index: i64, count: usize },
    #[error("line {line}: index 0 is invalid, OBJ indices are 1-based")]
    ZeroIndex { line: usize },
    #[error("line {line}: face has {count} vertices, need at least 3")]
    TooFewVertices { line: usize, count: usize },
    #[error("line {line}: non-numeric value {token:?}")]
    NotANumber { line: usize, token: String },
    #[error("line {line}: `{statement}` needs {need} components")]
    MissingComponents {
        line: usize,
        statement: &'static str,
        need: usize,
    },
    #[error("no non-degenerate faces")]
    NoFaces,
}

#[derive(Debug, Clone, Copy)]
struct Corner {
    vertex: usize,
    normal: Option<usize>,
}

struct PendingFace {
    line: usize,
    corners: Vec<(i64, Option<i64>)>,
    vertex_count: usize,
    normal_count: usize,
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ObjError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ObjError::NotANumber {
            line,
            token: tok.to_string(),
        })
}

fn parse_index(tok: &str, line: usize) -> Result<i64, ObjError> {
    let v = tok.parse::<i64>().map_err(|_| ObjError::NotANumber {
        line,
        token: tok.to_string(),
    })?;
    if v == 0 {
        return Err(ObjError::ZeroIndex { line });
    }
    Ok(v)
}

/// Resolves a 1-based (or negative, relative) OBJ index to 0-based.
/// `seen` is the element count at the point of reference, used for negatives;
/// `total` bounds positive indices.
fn resolve(index: i64, seen: usize, total: usize) -> Option<usize> {
    if index > 0 {
        let i = (index - 1) as usize;
        (i < total).then_some(i)
    } else {
        let back = index.unsigned_abs() as usize;
        (back <= seen).then(|| seen - back)
    }
}

fn vec3_components(
    parts: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    statement: &'static str,
) -> Result<Vec3, ObjError> {
    let mut c = [0.0; 3];
    for slot in c.iter_mut() {
        let tok = parts.next().ok_or(ObjError::MissingComponents {
            line,
            statement,
            need: 3,
        })?;
        *slot = parse_f64(tok, line)?;
    }
    // Extra components (homogeneous w, vertex colors) are validated but ignored.
    for tok in parts {
        parse_f64(tok, line)?;
    }
    Ok(Vec3::from_array(c))
}

/// Parses OBJ text into a triangle mesh.
///
/// The returned mesh has the default diffuse color and the airliner category;
/// callers loading from a manifest override both. Faces whose corners lack
/// normals get a normal from their counter-clockwise winding. Zero-area faces
/// without usable normals are dropped.
pub fn parse_obj(text: &str) -> Result<Mesh, ObjError> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut pending = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut parts = content.split_whitespace();
        let Some(keyword) = parts.next() else {
            continue;
        };
        match keyword {
            "v" => vertices.push(vec3_components(&mut parts, line, "v")?),
            "vn" => normals.push(vec3_components(&mut parts, line, "vn")?),
            "f" => {
                let mut corners = Vec::new();
                for tok in parts {
                    let mut fields = tok.split('/');
                    let v = parse_index(fields.next().unwrap_or(""), line)?;
                    let _texcoord = fields.next();
                    let n = match fields.next() {
                        Some(s) if !s.is_empty() => Some(parse_index(s, line)?),
                        _ => None,
                    };
                    corners.push((v, n));
                }
                if corners.len() < 3 {
                    return Err(ObjError::TooFewVertices {
                        line,
                        count: corners.len(),
                    });
                }
                pending.push(PendingFace {
                    line,
                    corners,
                    vertex_count: vertices.len(),
                    normal_count: normals.len(),
                });
            }
            _ => {}
        }
    }

    let mut faces = Vec::new();
    let mut face_normals = Vec::new();
    for face in &pending {
        let corners = face
            .corners
            .iter()
            .map(|&(v, n)| {
                let vertex = resolve(v, face.vertex_count, vertices.len()).ok_or(ObjError::IndexOutOfRange {
                    line: face.line,
                    index: v,
                    count: vertices.len(),
                })?;
                let normal = n
                    .map(|n| {
                        resolve(n, face.normal_count, normals.len()).ok_or(ObjError::NormalOutOfRange {
                            line: face.line,
                            index: n,
                            count: normals.len(),
                        })
                    })
                    .transpose()?;
                Ok(Corner { vertex, normal })
            })
            .collect::<Result<Vec<_>, ObjError>>()?;

        for k in 1..corners.len() - 1 {
            let tri = [corners[0], corners[k], corners[k + 1]];
            if let Some(n) = triangle_normal(&tri, &vertices, &normals) {
                faces.push(tri.map(|c| c.vertex as u32));
                face_normals.push(n);
            }
        }
    }
    if faces.is_empty() {
        return Err(ObjError::NoFaces);
    }
    Ok(Mesh {
        vertices,
        faces,
        face_normals,
        diffuse_color: DEFAULT_DIFFUSE,
        category: Category::Airliner,
    })
}

fn triangle_normal(tri: &[Corner; 3], vertices: &[Vec3], normals: &[Vec3]) -> Option<Vec3> {
    if tri.iter().all(|c| c.normal.is_some()) {
        let sum = tri.iter().fold(Vec3::ZERO, |acc, c| acc + normals[c.normal.unwrap()]);
        if let Some(n) = sum.normalized() {
            return Some(n);
        }
    }
    let [a, b, c] = tri.map(|c| vertices[c.vertex]);
    (b - a).cross(c - a).normalized()
}

/// Serializes a mesh as OBJ with one `vn` per face. Reparsing the output
/// reproduces vertices and faces exactly.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} vertices, {} faces", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for n in &mesh.face_normals {
        let _ = writeln!(out, "vn {:?} {:?} {:?}", n.x, n.y, n.z);
    }
    for (i, f) in mesh.faces.iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(out, "f {}//{n} {}//{n} {}//{n}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}
