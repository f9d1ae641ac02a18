//! Orthographic shadow map rendered along the sun direction.

use super::raster::fill_triangle;
use crate::math::{orthonormal_basis, Vec3};

pub const SHADOW_MAP_SIZE: usize = 1024;
/// Depth bias as a fraction of the light-space scene extent.
pub const SHADOW_BIAS_FRACTION: f64 = 1e-3;

pub struct ShadowMap {
    u: Vec3,
    v: Vec3,
    w: Vec3,
    origin: [f64; 2],
    texel: f64,
    bias: f64,
    depth: Vec<f64>,
}

impl ShadowMap {
    /// Builds the map from world-space triangles. `None` when there is nothing to cast.
    pub fn build(sun_direction: Vec3, triangles: &[[Vec3; 3]]) -> Option<Self> {
        let w = sun_direction.normalized()?;
        if triangles.is_empty() {
            return None;
        }
        let (u, v) = orthonormal_basis(w);
        let (mut lo, mut hi) = ([f64::MAX; 3], [f64::MIN; 3]);
        for p in triangles.iter().flatten() {
            let c = [p.dot(u), p.dot(v), p.dot(w)];
            for k in 0..3 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let extent = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
        if !(span > 0.0) {
            return None;
        }
        let pad = span * 0.01;
        let texel = (span + 2.0 * pad) / SHADOW_MAP_SIZE as f64;
        let origin = [lo[0] - pad, lo[1] - pad];
        let mut map = Self {
            u,
            v,
            w,
            origin,
            texel,
            bias: SHADOW_BIAS_FRACTION * extent,
            depth: vec![f64::INFINITY; SHADOW_MAP_SIZE * SHADOW_MAP_SIZE],
        };
        for tri in triangles {
            let tex = tri.map(|p| map.to_texels(p));
            let d = tri.map(|p| p.dot(w));
            let depth = &mut map.depth;
            fill_triangle(tex, SHADOW_MAP_SIZE, SHADOW_MAP_SIZE, |x, y, l| {
                let z = l[0] * d[0] + l[1] * d[1] + l[2] * d[2];
                let slot = &mut depth[y * SHADOW_MAP_SIZE + x];
                if z < *slot {
                    *slot = z;
                }
            });
        }
        Some(map)
    }

    fn to_texels(&self, p: Vec3) -> [f64; 2] {
        [
            (p.dot(self.u) - self.origin[0]) / self.texel,
            (p.dot(self.v) - self.origin[1]) / self.texel,
        ]
    }

    /// True when `p` is hidden from the sun by nearer geometry.
    pub fn occluded(&self, p: Vec3) -> bool {
        let [tx, ty] = self.to_texels(p);
        if !(tx >= 0.0 && ty >= 0.0) {
            return false;
        }
        let (x, y) = (tx.floor() as usize, ty.floor() as usize);
        if x >= SHADOW_MAP_SIZE || y >= SHADOW_MAP_SIZE {
            return false;
        }
        p.dot(self.w) > self.depth[y * SHADOW_MAP_SIZE + x] + self.bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(z: f64, half: f64) -> [[Vec3; 3]; 2] {
        let a = Vec3::new(-half, -half, z);
        let b = Vec3::new(half, -half, z);
        let c = Vec3::new(half, half, z);
        let d = Vec3::new(-half, half, z);
        [[a, b, c], [a, c, d]]
    }

    #[test]
    fn upper_plate_shadows_lower_plate() {
        let sun = Vec3::new(0.0, 0.0, -1.0);
        let mut tris = quad(10.0, 2.0).to_vec();
        tris.extend(quad(0.0, 8.0));
        let map = ShadowMap::build(sun, &tris).unwrap();
        assert!(map.occluded(Vec3::new(0.0, 0.0, 0.0)));
        assert!(!map.occluded(Vec3::new(6.0, 6.0, 0.0)));
        assert!(!map.occluded(Vec3::new(0.0, 0.0, 10.0)), "no self-shadowing");
    }

    #[test]
    fn slanted_sun_moves_the_shadow() {
        let sun = Vec3::new(1.0, 0.0, -1.0).normalized().unwrap();
        let mut tris = quad(5.0, 1.0).to_vec();
        tris.extend(quad(0.0, 10.0));
        let map = ShadowMap::build(sun, &tris).unwrap();
        assert!(map.occluded(Vec3::new(5.0, 0.0, 0.0)));
        assert!(!map.occluded(Vec3::new(0.0, 0.0, 0.0)));
    }

    #[test]
    fn nothing_to_cast() {
        assert!(ShadowMap::build(Vec3::new(0.0, 0.0, -1.0), &[]).is_none());
    }
}
