//! Distractor primitives: box, sphere and cone, each with unit longest extent.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::assets::{normalize_mesh, Category, Mesh};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Box,
    Sphere,
    Cone,
}

impl Primitive {
    pub const ALL: [Primitive; 3] = [Primitive::Box, Primitive::Sphere, Primitive::Cone];

    /// Normalized mesh for this primitive. Built once.
    pub fn mesh(self) -> &'static Mesh {
        static MESHES: LazyLock<[Mesh; 3]> = LazyLock::new(|| {
            [box_mesh(0.6), sphere_mesh(8, 12), cone_mesh(16)].map(|m| {
                normalize_mesh(&m)
                    .expect("primitive has extent")
                    .with_material(Category::Distractor, [1.0, 1.0, 1.0])
            })
        });
        &MESHES[self as usize]
    }
}

fn from_triangles(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Mesh {
    let face_normals = faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            (b - a).cross(c - a).normalized().expect("primitive face has area")
        })
        .collect();
    Mesh {
        vertices,
        faces,
        face_normals,
        diffuse_color: [1.0, 1.0, 1.0],
        category: Category::Distractor,
    }
}

/// Axis-aligned box with unit footprint and the given height.
pub fn box_mesh(height: f64) -> Mesh {
    let mut v = Vec::with_capacity(8);
    for &z in &[0.0, height] {
        for &(x, y) in &[(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)] {
            v.push(Vec3::new(x, y, z));
        }
    }
    let quads: [[u32; 4]; 6] = [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [1, 2, 6, 5],
        [2, 3, 7, 6],
        [3, 0, 4, 7],
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    from_triangles(v, faces)
}

/// UV sphere with outward-facing triangles.
pub fn sphere_mesh(stacks: u32, slices: u32) -> Mesh {
    let mut v = vec![Vec3::new(0.0, 0.0, 1.0)];
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = std::f64::consts::TAU * j as f64 / slices as f64;
            v.push(Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    let bottom = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -1.0));
    let ring = |i: u32, j: u32| 1 + i * slices + (j % slices);
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(0, j), ring(0, j + 1)]);
    }
    for i in 0..stacks - 2 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..slices {
        faces.push([bottom, ring(stacks - 2, j + 1), ring(stacks - 2, j)]);
    }
    from_triangles(v, faces)
}

/// Cone with a unit-diameter base and unit height.
pub fn cone_mesh(slices: u32) -> Mesh {
    let mut v = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO];
    for j in 0..slices {
        let phi = std::f64::consts::TAU * j as f64 / slices as f64;
        v.push(Vec3::new(0.5 * phi.cos(), 0.5 * phi.sin(), 0.0));
    }
    let rim = |j: u32| 2 + (j % slices);
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([rim(j), rim(j + 1), 0]);
        faces.push([1, rim(j + 1), rim(j)]);
    }
    from_triangles(v, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_valid_and_normalized() {
        for p in Primitive::ALL {
            let m = p.mesh();
            m.validate().unwrap();
            let (lo, hi) = m.bounds();
            let e = hi - lo;
            assert!((e.x.max(e.y).max(e.z) - 1.0).abs() < 1e-12, "{p:?}");
            assert_eq!(m.category, Category::Distractor);
        }
    }

    #[test]
    fn sphere_normals_point_outward() {
        let m = sphere_mesh(8, 12);
        for (f, n) in m.faces.iter().zip(&m.face_normals) {
            let c = f.iter().fold(Vec3::ZERO, |acc, &i| acc + m.vertices[i as usize]) * (1.0 / 3.0);
            assert!(n.dot(c) > 0.0);
        }
    }
}
