//! Edge-function triangle fill with a top-left rule. Pixel `(x, y)` is sampled
//! at its center `(x + 0.5, y + 0.5)`.

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Whether samples exactly on edge `a -> b` belong to the triangle.
#[inline]
fn owns_edge(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy > 0.0 || (dy == 0.0 && dx < 0.0)
}

/// Calls `f(x, y, [l0, l1, l2])` for every pixel whose center is covered,
/// with screen-space barycentric weights of `p[0]`, `p[1]`, `p[2]`.
/// Degenerate and non-finite triangles cover nothing.
pub fn fill_triangle(p: [[f64; 2]; 3], width: usize, height: usize, mut f: impl FnMut(usize, usize, [f64; 3])) {
    if width == 0 || height == 0 || p.iter().flatten().any(|v| !v.is_finite()) {
        return;
    }
    let mut area = edge(p[0], p[1], p[2]);
    if area == 0.0 {
        return;
    }
    // Normalize to positive orientation; `order` maps back to caller's vertices.
    let (q, order) = if area < 0.0 {
        area = -area;
        ([p[0], p[2], p[1]], [0usize, 2, 1])
    } else {
        (p, [0usize, 1, 2])
    };

    let min_x = q.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    let max_x = q.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = q.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
    let max_y = q.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_x - 0.5).ceil().max(0.0);
    let x1 = (max_x - 0.5).floor().min(width as f64 - 1.0);
    let y0 = (min_y - 0.5).ceil().max(0.0);
    let y1 = (max_y - 0.5).floor().min(height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }

    let own = [owns_edge(q[1], q[2]), owns_edge(q[2], q[0]), owns_edge(q[0], q[1])];
    let inv_area = 1.0 / area;
    for y in y0 as usize..=y1 as usize {
        let cy = y as f64 + 0.5;
        for x in x0 as usize..=x1 as usize {
            let c = [x as f64 + 0.5, cy];
            let w = [edge(q[1], q[2], c), edge(q[2], q[0], c), edge(q[0], q[1], c)];
            let inside = w.iter().zip(own).all(|(&wi, owned)| wi > 0.0 || (wi == 0.0 && owned));
            if inside {
                let mut l = [0.0; 3];
                for k in 0..3 {
                    l[order[k]] = w[k] * inv_area;
                }
                f(x, y, l);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coverage(p: [[f64; 2]; 3], w: usize, h: usize) -> Vec<u8> {
        let mut c = vec![0u8; w * h];
        fill_triangle(p, w, h, |x, y, _| c[y * w + x] += 1);
        c
    }

    #[test]
    fn square_split_covers_each_pixel_once() {
        let (a, b, c, d) = ([2.0, 2.0], [10.0, 2.0], [10.0, 10.0], [2.0, 10.0]);
        let t1 = coverage([a, b, c], 12, 12);
        let t2 = coverage([a, c, d], 12, 12);
        let mut total = 0;
        for y in 0..12 {
            for x in 0..12 {
                let n = t1[y * 12 + x] + t2[y * 12 + x];
                let inside = (2..10).contains(&x) && (2..10).contains(&y);
                assert_eq!(n, inside as u8, "pixel {x},{y}");
                total += n as usize;
            }
        }
        assert_eq!(total, 64);
    }

    #[test]
    fn winding_does_not_matter() {
        let p = [[1.3, 0.2], [9.1, 3.7], [4.4, 8.8]];
        let q = [p[0], p[2], p[1]];
        assert_eq!(coverage(p, 10, 10), coverage(q, 10, 10));
    }

    #[test]
    fn barycentrics_follow_caller_order() {
        let p = [[0.0, 0.0], [0.0, 8.0], [8.0, 0.0]];
        fill_triangle(p, 8, 8, |x, y, l| {
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let px = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
            let py = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
            assert!((px - (x as f64 + 0.5)).abs() < 1e-12);
            assert!((py - (y as f64 + 0.5)).abs() < 1e-12);
        });
    }

    #[test]
    fn degenerate_and_offscreen_triangles_cover_nothing() {
        assert!(coverage([[0.0, 0.0], [5.0, 5.0], [10.0, 10.0]], 12, 12)
            .iter()
            .all(|&v| v == 0));
        assert!(coverage([[-9.0, -9.0], [-5.0, -9.0], [-5.0, -2.0]], 12, 12)
            .iter()
            .all(|&v| v == 0));
        assert!(coverage([[0.0, f64::NAN], [5.0, 5.0], [1.0, 10.0]], 12, 12)
            .iter()
            .all(|&v| v == 0));
    }
}
