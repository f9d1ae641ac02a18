use image::{Rgb, RgbImage};
use synthforge_core::assets::{parse_obj, AssetStore, BackgroundEntry, BackgroundSet, Category, Model};
use synthforge_core::math::Vec3;
use synthforge_core::render::{apply_fog, quantize, render};
use synthforge_core::scene::{BackgroundRef, Camera, Fog, Instance, Lights, Pose, SceneDescription};

const SIZE: u32 = 64;
const F: f64 = 64.0;
const CAM_Z: f64 = 20.0;

fn background() -> RgbImage {
    RgbImage::from_fn(80, 72, |x, y| {
        Rgb([(x * 3) as u8, (y * 3) as u8, ((x + y) % 256) as u8])
    })
}

fn model(obj: &str, color: [f64; 3]) -> Model {
    Model {
        name: "m".into(),
        mesh: parse_obj(obj).unwrap().with_material(Category::Jet, color),
    }
}

const SQUARE: &str = "v -1 -1 0\nv 1 -1 0\nv 1 1 0\nv -1 1 0\nf 1 2 3 4\n";
const TRI_SMALL: &str = "v -1 -1 0\nv 1 -1 0\nv -1 1 0\nf 1 2 3\n";
const TRI_LARGE: &str = "v -3 -3 0\nv 3 -3 0\nv -3 3 0\nf 1 2 3\n";

fn store(models: Vec<Model>) -> AssetStore {
    let bg = BackgroundSet::new(vec![BackgroundEntry::in_memory("bg", "test", background())]).unwrap();
    AssetStore::new(models, bg)
}

/// Camera straight down from `(0, 0, 20)`; an object at height `z` sits at depth `20 - z`.
fn scene(instances: Vec<(usize, f64)>, lights: Lights, fog: Fog) -> SceneDescription {
    SceneDescription {
        scene_id: 0,
        background: BackgroundRef {
            entry: 0,
            class: "test".into(),
            crop_x: 7,
            crop_y: 3,
            size: SIZE,
        },
        camera: Camera::nadir_at(Vec3::new(0.0, 0.0, CAM_Z), SIZE, F),
        lights,
        fog,
        instances: instances
            .into_iter()
            .map(|(model, depth)| Instance {
                model,
                category: Category::Jet,
                pose: Pose {
                    translation: Vec3::new(0.0, 0.0, CAM_Z - depth),
                    yaw: 0.0,
                    scale: 1.0,
                },
                target_size: 0.0,
            })
            .collect(),
        distractors: Vec::new(),
    }
}

fn ambient_only() -> Lights {
    Lights::from_angles(1.0, 0.0, 60.0, 0.0)
}

const NO_FOG: Fog = Fog {
    density: 0.0,
    color: [0.0; 3],
};

#[test]
fn empty_scene_copies_background_crop() {
    let assets = store(vec![model(SQUARE, [0.8; 3])]);
    let out = render(&scene(vec![], ambient_only(), NO_FOG), &assets).unwrap();
    let crop = image::imageops::crop_imm(&background(), 7, 3, SIZE, SIZE).to_image();
    assert_eq!(out.rgb.as_raw(), crop.as_raw());
    assert!(out.instance_ids.iter().all(|&i| i == 0));
    assert!(out.depth.iter().all(|d| d.is_infinite()));
}

#[test]
fn ambient_only_gives_204() {
    let assets = store(vec![model(SQUARE, [0.8; 3])]);
    let out = render(&scene(vec![(0, 8.0)], ambient_only(), NO_FOG), &assets).unwrap();
    let mut n = 0;
    for (i, &id) in out.instance_ids.iter().enumerate() {
        let px = out.rgb.get_pixel(i as u32 % SIZE, i as u32 / SIZE);
        if id == 1 {
            n += 1;
            assert_eq!(px.0, [204, 204, 204]);
            assert!(out.depth[i].is_finite());
        } else {
            assert!(out.depth[i].is_infinite());
        }
    }
    // 2 x 2 square at depth 8 spans 16 x 16 px.
    assert_eq!(n, 256);
    assert_eq!(out.solo_pixel_counts, vec![256]);
}

#[test]
fn fog_blends_at_one_over_e() {
    let fog = Fog {
        density: 0.1,
        color: [0.2, 0.4, 1.0],
    };
    let assets = store(vec![model(SQUARE, [0.8; 3])]);
    let out = render(&scene(vec![(0, 10.0)], ambient_only(), fog), &assets).unwrap();
    let t = (-1.0f64).exp();
    let expected = [0, 1, 2].map(|c| quantize(t * 0.8 + (1.0 - t) * fog.color[c]));
    assert_eq!(apply_fog([0.8; 3], 10.0, &fog).map(quantize), expected);
    let mut n = 0;
    for (i, &id) in out.instance_ids.iter().enumerate() {
        if id == 1 {
            n += 1;
            assert!((out.depth[i] - 10.0).abs() < 1e-12);
            assert_eq!(out.rgb.get_pixel(i as u32 % SIZE, i as u32 / SIZE).0, expected);
        }
    }
    assert!(n > 0);
}

/// Half-open membership with a margin so pixel centres on an edge are skipped.
fn inside_right_triangle(u: f64, v: f64, half: f64, margin: f64) -> Option<bool> {
    // Region u >= -half, v >= -half, u + v <= 0 in image-scaled units.
    let d = [u + half, v + half, -(u + v)];
    if d.iter().all(|&x| x > margin) {
        Some(true)
    } else if d.iter().any(|&x| x < -margin) {
        Some(false)
    } else {
        None
    }
}

#[test]
fn nearer_triangle_wins_overlap() {
    for order in [[0usize, 1], [1, 0]] {
        let assets = store(vec![model(TRI_SMALL, [0.8; 3]), model(TRI_LARGE, [0.5; 3])]);
        // Small triangle at depth 5, large at depth 10.
        let depths = [5.0, 10.0];
        let inst: Vec<(usize, f64)> = order.iter().map(|&m| (m, depths[m])).collect();
        let out = render(&scene(inst, ambient_only(), NO_FOG), &assets).unwrap();
        let id_of = |m: usize| order.iter().position(|&o| o == m).unwrap() as i32 + 1;

        // World (X, Y) at depth d lands at px = 32 + F X / d, py = 32 - F Y / d.
        let (mut near, mut far) = (0, 0);
        for y in 0..SIZE {
            for x in 0..SIZE {
                let (u, v) = (x as f64 + 0.5 - 32.0, 32.0 - (y as f64 + 0.5));
                let small = inside_right_triangle(u, v, F / 5.0, 1e-9);
                let large = inside_right_triangle(u, v, 3.0 * F / 10.0, 1e-9);
                let id = out.id_at(x, y);
                match (small, large) {
                    (Some(true), _) => {
                        near += 1;
                        assert_eq!(id, id_of(0), "({x},{y})");
                    }
                    (Some(false), Some(true)) => {
                        far += 1;
                        assert_eq!(id, id_of(1), "({x},{y})");
                    }
                    (_, Some(false)) => assert_eq!(id, 0, "({x},{y})"),
                    _ => {}
                }
            }
        }
        assert!(near > 50 && far > 50, "{near} {far}");
    }
}

#[test]
fn render_is_deterministic_and_maps_agree() {
    let lights = Lights::from_angles(0.3, 0.7, 45.0, 30.0);
    let assets = store(vec![model(TRI_SMALL, [0.8; 3]), model(SQUARE, [0.6; 3])]);
    let s = scene(
        vec![(0, 6.0), (1, 9.0)],
        lights,
        Fog {
            density: 0.02,
            color: [0.7; 3],
        },
    );
    let a = render(&s, &assets).unwrap();
    let b = render(&s, &assets).unwrap();
    assert_eq!(a.rgb, b.rgb);
    assert_eq!(a.instance_ids, b.instance_ids);
    for (id, d) in a.instance_ids.iter().zip(&a.depth) {
        assert_eq!(*id != 0, d.is_finite());
    }
    let img = a.id_map_image();
    assert_eq!(img.dimensions(), (SIZE, SIZE));
    assert_eq!(a.depth_le_bytes().len(), (SIZE * SIZE * 4) as usize);
}

#[test]
fn no_sun_means_ambient_only_everywhere() {
    let assets = store(vec![model(TRI_LARGE, [0.8; 3]), model(SQUARE, [0.6; 3])]);
    let dark_sun = Lights::from_angles(0.4, 0.0, 35.0, 10.0);
    let s = scene(vec![(0, 10.0), (1, 4.0)], dark_sun, NO_FOG);
    let out = render(&s, &assets).unwrap();
    for (i, &id) in out.instance_ids.iter().enumerate() {
        let expected = match id {
            1 => quantize(0.8 * 0.4),
            2 => quantize(0.6 * 0.4),
            _ => continue,
        };
        assert_eq!(out.rgb.get_pixel(i as u32 % SIZE, i as u32 / SIZE).0, [expected; 3]);
    }
}

#[test]
fn fog_moves_monotonically_toward_fog_color() {
    let assets = store(vec![model(SQUARE, [0.8; 3])]);
    let fog_color = [0.1, 0.9, 0.5];
    let mut prev: Option<[u8; 3]> = None;
    for density in [0.0, 0.01, 0.05, 0.1, 0.3, 1.0] {
        let out = render(
            &scene(
                vec![(0, 10.0)],
                ambient_only(),
                Fog {
                    density,
                    color: fog_color,
                },
            ),
            &assets,
        )
        .unwrap();
        let px = out.rgb.get_pixel(32, 32).0;
        if let Some(p) = prev {
            for c in 0..3 {
                let target = quantize(fog_color[c]);
                assert!(p[c].abs_diff(target) >= px[c].abs_diff(target));
            }
        }
        prev = Some(px);
    }
}
