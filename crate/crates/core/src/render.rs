//! Ray-cast renderer producing paired RGB and ground-truth depth rasters.
//!
//! Depth is planar z (distance along the camera's forward axis, the usual
//! depth-buffer convention), not ray length, clamped to
//! [`NEAR_CLIP`, `FAR_CLIP`]; rays that escape to the sky record `FAR_CLIP`.
//! Shading is Lambertian with a single directional sun plus an ambient
//! floor, and surfaces fade toward the sky color with exponential fog.
//! Lighting and weather touch only the RGB path, so the depth raster for a
//! scene/camera pair is bit-identical whatever the conditions. Pixels are
//! independent, which also makes the output identical however many worker
//! threads the row loop uses.

use crate::error::{Error, Result};
use crate::exec::for_each_chunk_pair_mut;
use crate::math::Vec3;
use crate::raster::Raster;
use crate::scenegen::{Camera, LightingState, Primitive, Scene, WeatherKind, WeatherState};

/// Closest measurable depth in meters.
pub const NEAR_CLIP: f64 = 0.5;

/// Farthest measurable depth in meters; also the value stored for sky.
pub const FAR_CLIP: f64 = 2000.0;

/// Minimum ray parameter accepted as a hit; anything closer counts as the
/// ray's own surface.
const T_EPS: f64 = 1e-12;

/// Identifies which scene conditions produced a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeta {
    pub scene_seed: u64,
    pub time_of_day: f64,
    pub weather: WeatherKind,
}

/// One rendered frame: 3-channel RGB in `[0, 1]` and 1-channel metric depth.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub rgb: Raster,
    pub depth: Raster,
    pub meta: FrameMeta,
}

struct SurfaceHit {
    t: f64,
    normal: Vec3,
    albedo: [f64; 3],
}

/// Distance along `direction` (assumed unit length) from `origin` to the
/// first surface of `primitive`, or `None` for misses and grazing contact.
pub fn intersect(origin: Vec3, direction: Vec3, primitive: &Primitive) -> Option<f64> {
    debug_assert!((direction.norm() - 1.0).abs() < 1e-9);
    hit_primitive(origin, direction, primitive).map(|h| h.t)
}

fn hit_primitive(origin: Vec3, direction: Vec3, primitive: &Primitive) -> Option<SurfaceHit> {
    match *primitive {
        Primitive::Ground { height, albedo } => {
            let dy = direction.y;
            if dy.abs() < 1e-12 {
                return None;
            }
            let t = (height - origin.y) / dy;
            if t <= T_EPS {
                return None;
            }
            let normal = if origin.y >= height {
                Vec3::new(0.0, 1.0, 0.0)
            } else {
                Vec3::new(0.0, -1.0, 0.0)
            };
            Some(SurfaceHit { t, normal, albedo })
        }
        Primitive::Box { min, max, albedo } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut near_axis = 0usize;
            let mut far_axis = 0usize;
            for a in 0..3 {
                let d = direction.axis(a);
                let o = origin.axis(a);
                let (lo, hi) = (min.axis(a), max.axis(a));
                if d.abs() < 1e-12 {
                    if o < lo || o > hi {
                        return None;
                    }
                    continue;
                }
                let inv = 1.0 / d;
                let (entry, exit) = {
                    let t1 = (lo - o) * inv;
                    let t2 = (hi - o) * inv;
                    if t1 < t2 {
                        (t1, t2)
                    } else {
                        (t2, t1)
                    }
                };
                if entry > t_near {
                    t_near = entry;
                    near_axis = a;
                }
                if exit < t_far {
                    t_far = exit;
                    far_axis = a;
                }
                // Edge-grazing rays (entry == exit) count as misses.
                if t_near >= t_far {
                    return None;
                }
            }
            if t_far <= T_EPS {
                return None;
            }
            let axis_normal = |axis: usize, sign: f64| {
                let mut n = Vec3::ZERO;
                match axis {
                    0 => n.x = sign,
                    1 => n.y = sign,
                    _ => n.z = sign,
                }
                n
            };
            if t_near > T_EPS {
                let sign = -direction.axis(near_axis).signum();
                Some(SurfaceHit {
                    t: t_near,
                    normal: axis_normal(near_axis, sign),
                    albedo,
                })
            } else {
                // Origin inside the box: the first surface is the exit face.
                let sign = direction.axis(far_axis).signum();
                Some(SurfaceHit {
                    t: t_far,
                    normal: axis_normal(far_axis, sign),
                    albedo,
                })
            }
        }
        Primitive::Sphere {
            center,
            radius,
            albedo,
        } => {
            let oc = origin - center;
            let b = oc.dot(direction);
            let c = oc.dot(oc) - radius * radius;
            let disc = b * b - c;
            // Tangent rays (disc == 0) count as misses.
            if disc <= 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let t0 = -b - sq;
            let t1 = -b + sq;
            let t = if t0 > T_EPS {
                t0
            } else if t1 > T_EPS {
                t1
            } else {
                return None;
            };
            let normal = (origin + direction * t - center) * (1.0 / radius);
            Some(SurfaceHit { t, normal, albedo })
        }
    }
}

fn validate_lighting(light: &LightingState) -> Result<()> {
    if (light.sun_direction.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(
            "sun direction must be unit length".into(),
        ));
    }
    if !(0.0..=1.0).contains(&light.sun_intensity) {
        return Err(Error::InvalidConfig(format!(
            "sun intensity must lie in [0,1], got {}",
            light.sun_intensity
        )));
    }
    if !(0.05 - 1e-12..=0.2 + 1e-12).contains(&light.ambient) {
        return Err(Error::InvalidConfig(format!(
            "ambient must lie in [0.05, 0.2], got {}",
            light.ambient
        )));
    }
    Ok(())
}

fn validate_weather(weather: &WeatherState) -> Result<()> {
    if !(weather.fog_density.is_finite() && weather.fog_density >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "fog density must be non-negative, got {}",
            weather.fog_density
        )));
    }
    if weather.sky_color.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidConfig(format!(
            "sky color must lie in [0,1], got {:?}",
            weather.sky_color
        )));
    }
    if !(weather.light_scale > 0.0 && weather.light_scale <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "light scale must lie in (0,1], got {}",
            weather.light_scale
        )));
    }
    Ok(())
}

/// Renders one frame of `scene` through `camera` under the given sun and
/// atmosphere.
pub fn render_frame(
    scene: &Scene,
    camera: &Camera,
    light: &LightingState,
    weather: &WeatherState,
) -> Result<FrameSample> {
    validate_lighting(light)?;
    validate_weather(weather)?;

    let (w, h) = (camera.width(), camera.height());
    let right = camera.forward().cross(camera.up());
    let tan_half = (camera.fov_y() / 2.0).tan();
    let aspect = w as f64 / h as f64;

    let mut rgb = vec![0.0f64; w * h * 3];
    let mut depth = vec![0.0f64; w * h];
    for_each_chunk_pair_mut(&mut rgb, w * 3, &mut depth, w, |y, rgb_row, depth_row| {
        for x in 0..w {
            let u = ((x as f64 + 0.5) / w as f64) * 2.0 - 1.0;
            let v = 1.0 - 2.0 * ((y as f64 + 0.5) / h as f64);
            let dir = (right * (u * tan_half * aspect)
                + camera.up() * (v * tan_half)
                + camera.forward())
            .normalized()
            .expect("camera basis is orthonormal, so pixel rays are non-zero");

            let mut nearest: Option<SurfaceHit> = None;
            for p in scene.primitives() {
                if let Some(hit) = hit_primitive(camera.position(), dir, p) {
                    if nearest.as_ref().map_or(true, |n| hit.t < n.t) {
                        nearest = Some(hit);
                    }
                }
            }

            let (z, color) = match nearest {
                None => (FAR_CLIP, weather.sky_color),
                Some(hit) => {
                    let z = (hit.t * dir.dot(camera.forward())).clamp(NEAR_CLIP, FAR_CLIP);
                    let lambert = light.ambient
                        + light.sun_intensity
                            * weather.light_scale
                            * hit.normal.dot(light.sun_direction).max(0.0);
                    let fog = (-weather.fog_density * z).exp();
                    let mut color = [0.0; 3];
                    for k in 0..3 {
                        let surface = (hit.albedo[k] * lambert).clamp(0.0, 1.0);
                        color[k] = surface * fog + weather.sky_color[k] * (1.0 - fog);
                    }
                    (z, color)
                }
            };
            depth_row[x] = z;
            rgb_row[x * 3] = color[0];
            rgb_row[x * 3 + 1] = color[1];
            rgb_row[x * 3 + 2] = color[2];
        }
    });

    Ok(FrameSample {
        rgb: Raster::from_vec(w, h, 3, rgb)?,
        depth: Raster::from_vec(w, h, 1, depth)?,
        meta: FrameMeta {
            scene_seed: scene.rng_seed(),
            time_of_day: light.time_of_day,
            weather: weather.kind,
        },
    })
}

/// Renders the same scene and camera at several times of day. Geometry never
/// moves, so every returned frame carries a bit-identical depth raster; only
/// the RGB changes with the sun.
pub fn time_sweep(
    scene: &Scene,
    camera: &Camera,
    times: &[f64],
    weather: &WeatherState,
) -> Result<Vec<FrameSample>> {
    times
        .iter()
        .map(|&t| render_frame(scene, camera, &crate::scenegen::sun_state(t)?, weather))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{generate_scene, sun_state, weather_state, SceneConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ground(albedo: f64) -> Primitive {
        Primitive::Ground {
            height: 0.0,
            albedo: [albedo; 3],
        }
    }

    #[test]
    fn plane_hit_at_expected_distance() {
        let p = Primitive::Ground {
            height: 5.0,
            albedo: [0.5; 3],
        };
        let t = intersect(Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0), &p).unwrap();
        assert!((t - 5.0).abs() < 1e-12);
    }

    #[test]
    fn plane_parallel_and_backward_rays_miss() {
        let p = Primitive::Ground {
            height: 5.0,
            albedo: [0.5; 3],
        };
        assert!(intersect(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), &p).is_none());
        assert!(intersect(Vec3::ZERO, Vec3::new(0.0, -1.0, 0.0), &p).is_none());
    }

    #[test]
    fn unit_box_face_hit() {
        let b = Primitive::Box {
            min: Vec3::new(1.0, 1.0, 1.0),
            max: Vec3::new(2.0, 2.0, 2.0),
            albedo: [0.5; 3],
        };
        let t = intersect(Vec3::new(0.0, 1.5, 1.5), Vec3::new(1.0, 0.0, 0.0), &b).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_hit_from_outside_and_tangent_miss() {
        let s = Primitive::Sphere {
            center: Vec3::new(0.0, 0.0, 10.0),
            radius: 2.0,
            albedo: [0.5; 3],
        };
        let t = intersect(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), &s).unwrap();
        assert!((t - 8.0).abs() < 1e-12);
        // Exactly tangent ray grazes and counts as a miss.
        assert!(intersect(Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, 0.0, 1.0), &s).is_none());
    }

    #[test]
    fn box_intersection_agrees_with_ray_marching() {
        // Distance-field marching: each step advances by the exact distance
        // to the box, so the march can approach the surface but never step
        // through it. Transversal rays converge to the entry point; rays that
        // graze within numerical resolution run out of steps and are skipped
        // rather than guessed at.
        #[derive(Debug)]
        enum March {
            Hit(f64),
            Miss,
            Stalled,
        }
        let t_max = 40.0;
        let march = |o: Vec3, d: Vec3, min: Vec3, max: Vec3| -> March {
            let gap = |p: Vec3| {
                let dx = (min.x - p.x).max(p.x - max.x).max(0.0);
                let dy = (min.y - p.y).max(p.y - max.y).max(0.0);
                let dz = (min.z - p.z).max(p.z - max.z).max(0.0);
                (dx * dx + dy * dy + dz * dz).sqrt()
            };
            let mut t = 0.0;
            for _ in 0..200_000 {
                let g = gap(o + d * t);
                if g < 1e-12 {
                    return March::Hit(t);
                }
                t += g;
                if t > t_max {
                    return March::Miss;
                }
            }
            March::Stalled
        };

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hits = 0;
        let mut stalled = 0;
        for _ in 0..1000 {
            let min = Vec3::new(
                rng.gen_range(-4.0..2.0),
                rng.gen_range(-4.0..2.0),
                rng.gen_range(4.0..8.0),
            );
            let max = min
                + Vec3::new(
                    rng.gen_range(0.5..3.0),
                    rng.gen_range(0.5..3.0),
                    rng.gen_range(0.5..3.0),
                );
            let b = Primitive::Box {
                min,
                max,
                albedo: [0.5; 3],
            };
            // Aim at a point in the box inflated by 40% per axis so a healthy
            // mix of hits, near misses, and clean misses shows up.
            let origin = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0);
            let center = (min + max) * 0.5;
            let half = (max - min) * 0.5;
            let target = Vec3::new(
                center.x + rng.gen_range(-1.4..1.4) * half.x,
                center.y + rng.gen_range(-1.4..1.4) * half.y,
                center.z + rng.gen_range(-1.4..1.4) * half.z,
            );
            let dir = (target - origin).normalized().unwrap();

            let analytic = intersect(origin, dir, &b);
            match (analytic, march(origin, dir, min, max)) {
                (None, March::Miss) => {}
                (Some(ta), March::Hit(tm)) => {
                    hits += 1;
                    assert!(
                        (ta - tm).abs() <= 1e-6,
                        "distance disagreement: analytic {ta}, marched {tm}"
                    );
                }
                (_, March::Stalled) => stalled += 1,
                (a, m) => panic!("hit/miss disagreement: analytic {a:?}, marched {m:?}"),
            }
        }
        assert!(hits > 300, "seed produced too few hits to be meaningful");
        assert!(stalled < 20, "too many grazing rays to trust the oracle");
    }

    #[test]
    fn ground_depth_is_planar_z_not_ray_length() {
        let scene = Scene::new(vec![ground(0.5)], 0).unwrap();
        let camera = Camera::standard(64, 64).unwrap();
        let frame = render_frame(
            &scene,
            &camera,
            &sun_state(12.0).unwrap(),
            &weather_state(WeatherKind::Sunny),
        )
        .unwrap();

        // Recompute the bottom-center pixel by hand: the ray drops from
        // y=1.8 to the plane, and planar depth is 1.8 * |dz| / |dy|.
        let (x, y) = (32usize, 63usize);
        let tan_half = (camera.fov_y() / 2.0).tan();
        let u = ((x as f64 + 0.5) / 64.0) * 2.0 - 1.0;
        let v = 1.0 - 2.0 * ((y as f64 + 0.5) / 64.0);
        let dir = Vec3::new(u * tan_half, v * tan_half, -1.0).normalized().unwrap();
        let expected = 1.8 * (dir.z / dir.y).abs();
        let got = frame.depth.get(x, y, 0);
        assert!(
            (got - expected).abs() / expected < 1e-12,
            "depth {got} vs closed form {expected}"
        );
    }

    #[test]
    fn sky_pixels_record_far_clip() {
        let scene = Scene::new(vec![ground(0.5)], 0).unwrap();
        let camera = Camera::standard(32, 32).unwrap();
        let frame = render_frame(
            &scene,
            &camera,
            &sun_state(12.0).unwrap(),
            &weather_state(WeatherKind::Sunny),
        )
        .unwrap();
        // Level camera: the top rows look above the horizon.
        for x in 0..32 {
            assert_eq!(frame.depth.get(x, 0, 0), FAR_CLIP);
        }
        // Everything is clamped into the measurable range.
        for &d in frame.depth.samples() {
            assert!((NEAR_CLIP..=FAR_CLIP).contains(&d));
        }
    }

    #[test]
    fn noon_ground_color_matches_lambert_formula() {
        let scene = Scene::new(vec![ground(0.5)], 0).unwrap();
        let camera = Camera::standard(32, 32).unwrap();
        let fogless = WeatherState {
            kind: WeatherKind::Sunny,
            fog_density: 0.0,
            sky_color: [0.6, 0.75, 0.95],
            light_scale: 1.0,
        };
        let frame = render_frame(&scene, &camera, &sun_state(12.0).unwrap(), &fogless).unwrap();
        // Ground pixel, upward normal, noon sun overhead: albedo * (0.2 + 1).
        let expected = 0.5 * 1.2;
        let got = frame.rgb.get(16, 30, 0);
        assert!((got - expected).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn rgb_stays_inside_unit_interval() {
        let scene = generate_scene(11, &SceneConfig::default()).unwrap();
        let camera = Camera::standard(48, 32).unwrap();
        for kind in WeatherKind::ALL {
            for t in [0.0, 9.5, 12.0] {
                let frame =
                    render_frame(&scene, &camera, &sun_state(t).unwrap(), &weather_state(kind))
                        .unwrap();
                for &v in frame.rgb.samples() {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn depth_ignores_lighting_and_weather() {
        let scene = generate_scene(3, &SceneConfig::default()).unwrap();
        let camera = Camera::standard(24, 24).unwrap();
        let reference = render_frame(
            &scene,
            &camera,
            &sun_state(12.0).unwrap(),
            &weather_state(WeatherKind::Sunny),
        )
        .unwrap();
        let mut saw_rgb_difference = false;
        for kind in [WeatherKind::Foggy, WeatherKind::Stormy] {
            for t in [0.0, 16.5] {
                let frame =
                    render_frame(&scene, &camera, &sun_state(t).unwrap(), &weather_state(kind))
                        .unwrap();
                assert_eq!(frame.depth, reference.depth, "depth must be bit-identical");
                if frame.rgb != reference.rgb {
                    saw_rgb_difference = true;
                }
            }
        }
        assert!(saw_rgb_difference, "conditions should visibly change RGB");
    }

    #[test]
    fn fog_pulls_color_toward_sky() {
        let scene = Scene::new(vec![ground(0.5)], 0).unwrap();
        let camera = Camera::standard(32, 32).unwrap();
        let sky = [0.7, 0.8, 0.9];
        let light = sun_state(12.0).unwrap();
        let mut prev_gap: Option<f64> = None;
        for fog_density in [0.0, 0.001, 0.01, 0.1] {
            let weather = WeatherState {
                kind: WeatherKind::Foggy,
                fog_density,
                sky_color: sky,
                light_scale: 1.0,
            };
            let frame = render_frame(&scene, &camera, &light, &weather).unwrap();
            let gap: f64 = (0..3)
                .map(|k| (frame.rgb.get(16, 28, k) - sky[k]).abs())
                .sum();
            if let Some(p) = prev_gap {
                assert!(gap <= p + 1e-12, "fog should move color toward sky");
            }
            prev_gap = Some(gap);
        }
    }

    #[test]
    fn time_sweep_shares_depth_across_frames() {
        let scene = generate_scene(5, &SceneConfig::default()).unwrap();
        let camera = Camera::standard(16, 16).unwrap();
        let frames = time_sweep(
            &scene,
            &camera,
            &[0.0, 6.0, 12.0, 18.0],
            &weather_state(WeatherKind::Sunny),
        )
        .unwrap();
        assert_eq!(frames.len(), 4);
        for f in &frames[1..] {
            assert_eq!(f.depth, frames[0].depth);
        }
        // Daytime frames differ from each other in RGB.
        assert_ne!(frames[1].rgb, frames[2].rgb);
    }

    #[test]
    fn invalid_states_are_rejected() {
        let scene = Scene::new(vec![ground(0.5)], 0).unwrap();
        let camera = Camera::standard(16, 16).unwrap();
        let mut light = sun_state(12.0).unwrap();
        light.sun_direction = Vec3::new(0.0, 2.0, 0.0);
        assert!(render_frame(
            &scene,
            &camera,
            &light,
            &weather_state(WeatherKind::Sunny)
        )
        .is_err());

        let mut weather = weather_state(WeatherKind::Sunny);
        weather.fog_density = -1.0;
        assert!(render_frame(&scene, &camera, &sun_state(12.0).unwrap(), &weather).is_err());
    }
}
