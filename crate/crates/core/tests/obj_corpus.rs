use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use synthforge_core::assets::{parse_obj, write_obj, Mesh, ObjError};

fn corpus(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/corpus/obj")
        .join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_round_trip(mesh: &Mesh) {
    let again = parse_obj(&write_obj(mesh)).unwrap();
    assert_eq!(again.vertices, mesh.vertices);
    assert_eq!(again.faces, mesh.faces);
    for (a, b) in again.face_normals.iter().zip(&mesh.face_normals) {
        assert!((*a - *b).length() < 1e-12);
    }
}

#[test]
fn cube_has_8_vertices_and_12_faces() {
    let m = parse_obj(&corpus("cube.obj")).unwrap();
    assert_eq!(m.vertices.len(), 8);
    assert_eq!(m.faces.len(), 12);
    m.validate().unwrap();
}

#[test]
fn quad_fans_into_two_triangles() {
    let m = parse_obj(&corpus("quad.obj")).unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn pentagon_fans_from_first_vertex() {
    let m = parse_obj(&corpus("pentagon.obj")).unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3], [0, 3, 4]]);
}

#[test]
fn negative_indices_are_relative_to_current_count() {
    let m = parse_obj(&corpus("negative_indices.obj")).unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn texture_and_material_statements_are_ignored() {
    let m = parse_obj(&corpus("mixed_tokens.obj")).unwrap();
    assert_eq!(m.vertices.len(), 4);
    assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    for n in &m.face_normals {
        assert_eq!(n.to_array(), [0.0, 0.0, 1.0]);
    }
}

#[test]
fn malformed_files_fail_with_line_numbers() {
    assert_eq!(
        parse_obj(&corpus("bad_zero_index.obj")),
        Err(ObjError::ZeroIndex { line: 4 })
    );
    assert_eq!(
        parse_obj(&corpus("bad_out_of_range.obj")),
        Err(ObjError::IndexOutOfRange {
            line: 4,
            index: 4,
            count: 3
        })
    );
    assert_eq!(
        parse_obj(&corpus("bad_negative_out_of_range.obj")),
        Err(ObjError::IndexOutOfRange {
            line: 4,
            index: -4,
            count: 3
        })
    );
    assert_eq!(
        parse_obj(&corpus("bad_two_vertex_face.obj")),
        Err(ObjError::TooFewVertices { line: 3, count: 2 })
    );
    assert_eq!(
        parse_obj(&corpus("bad_non_numeric.obj")),
        Err(ObjError::NotANumber {
            line: 2,
            token: "zero".into()
        })
    );
    assert_eq!(parse_obj(&corpus("bad_degenerate_only.obj")), Err(ObjError::NoFaces));
    assert_eq!(parse_obj(&corpus("bad_empty.obj")), Err(ObjError::NoFaces));
}

#[test]
fn valid_corpus_round_trips() {
    for name in [
        "cube.obj",
        "quad.obj",
        "pentagon.obj",
        "negative_indices.obj",
        "mixed_tokens.obj",
    ] {
        let m = parse_obj(&corpus(name)).unwrap();
        assert_round_trip(&m);
        assert_eq!(parse_obj(&corpus(name)).unwrap(), m, "{name} not deterministic");
    }
}

fn obj_text() -> impl Strategy<Value = String> {
    let vertex = prop::array::uniform3(-1e3f64..1e3);
    (
        prop::collection::vec(vertex, 3..24),
        prop::collection::vec((3usize..7, any::<u64>(), any::<bool>()), 1..12),
    )
        .prop_map(|(verts, faces)| {
            let n = verts.len();
            let mut s = String::new();
            for v in &verts {
                s += &format!("v {} {} {}\n", v[0], v[1], v[2]);
            }
            for (k, seed, negative) in faces {
                let idx: Vec<String> = (0..k)
                    .map(|j| {
                        let i = (seed
                            .wrapping_mul(6364136223846793005)
                            .wrapping_add(j as u64 * 1442695040888963407)
                            >> 33) as usize
                            % n;
                        if negative {
                            format!("-{}", n - i)
                        } else {
                            format!("{}", i + 1)
                        }
                    })
                    .collect();
                s += &format!("f {}\n", idx.join(" "));
            }
            s
        })
}

proptest! {
    #[test]
    fn random_meshes_round_trip(text in obj_text()) {
        if let Ok(m) = parse_obj(&text) {
            let again = parse_obj(&write_obj(&m)).unwrap();
            prop_assert_eq!(&again.vertices, &m.vertices);
            prop_assert_eq!(&again.faces, &m.faces);
            for (a, b) in again.face_normals.iter().zip(&m.face_normals) {
                prop_assert!((*a - *b).length() < 1e-12);
            }
        }
    }
}
