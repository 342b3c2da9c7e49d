//! Procedural scene construction: primitives, camera, sun and weather.
//!
//! Scenes are a ground plane plus seeded boxes and spheres. Object placement
//! is stratified in log-depth over [`DEPTH_MIN`], [`DEPTH_MAX`] so that every
//! multi-object scene exercises the whole range the renderer can measure,
//! from half a meter out to a kilometer; the first object's near face sits
//! exactly at `DEPTH_MIN` and the last object's far face exactly at
//! `DEPTH_MAX`. All randomness comes from a ChaCha stream seeded by the
//! caller, so a seed fully determines the scene.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Nearest object placement depth in meters. Matches the renderer's near
/// clip so the closest surfaces are still measurable.
pub const DEPTH_MIN: f64 = 0.5;

/// Farthest object placement depth in meters. Half the renderer's far clip,
/// which leaves sky pixels clearly separated from the farthest geometry.
pub const DEPTH_MAX: f64 = 1000.0;

/// One renderable solid. Every variant carries its surface albedo
/// (per-channel reflectance in `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Horizontal plane `y = height` extending to infinity.
    Ground { height: f64, albedo: [f64; 3] },
    /// Axis-aligned box spanning `min..max` per axis.
    Box {
        min: Vec3,
        max: Vec3,
        albedo: [f64; 3],
    },
    Sphere {
        center: Vec3,
        radius: f64,
        albedo: [f64; 3],
    },
}

impl Primitive {
    pub fn albedo(&self) -> [f64; 3] {
        match self {
            Primitive::Ground { albedo, .. }
            | Primitive::Box { albedo, .. }
            | Primitive::Sphere { albedo, .. } => *albedo,
        }
    }

    fn validate(&self) -> Result<()> {
        let albedo = self.albedo();
        if albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidConfig(format!(
                "albedo components must lie in [0,1], got {albedo:?}"
            )));
        }
        match self {
            Primitive::Ground { height, .. } => {
                if !height.is_finite() {
                    return Err(Error::InvalidConfig("ground height must be finite".into()));
                }
            }
            Primitive::Box { min, max, .. } => {
                if !(min.is_finite() && max.is_finite()) {
                    return Err(Error::InvalidConfig("box bounds must be finite".into()));
                }
                if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                    return Err(Error::InvalidConfig(format!(
                        "box needs min < max per axis, got {min:?}..{max:?}"
                    )));
                }
            }
            Primitive::Sphere { center, radius, .. } => {
                if !center.is_finite() || !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "sphere needs a finite center and radius > 0, got radius {radius}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A validated set of primitives: at least one, exactly one ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    primitives: Vec<Primitive>,
    rng_seed: u64,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, rng_seed: u64) -> Result<Scene> {
        if primitives.is_empty() {
            return Err(Error::InvalidConfig(
                "a scene needs at least one primitive".into(),
            ));
        }
        let grounds = primitives
            .iter()
            .filter(|p| matches!(p, Primitive::Ground { .. }))
            .count();
        if grounds != 1 {
            return Err(Error::InvalidConfig(format!(
                "a scene needs exactly one ground plane, got {grounds}"
            )));
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Scene {
            primitives,
            rng_seed,
        })
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// Pinhole camera. Constructed through [`Camera::new`], which checks the
/// frame invariants once so the renderer can trust them.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    position: Vec3,
    forward: Vec3,
    up: Vec3,
    fov_y: f64,
    width: usize,
    height: usize,
}

impl Camera {
    /// `forward` and `up` must be unit length and perpendicular (both within
    /// 1e-9), `fov_y` in `(0, pi)` radians, and the resolution at least 8x8.
    pub fn new(
        position: Vec3,
        forward: Vec3,
        up: Vec3,
        fov_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Camera> {
        if !position.is_finite() || !forward.is_finite() || !up.is_finite() {
            return Err(Error::InvalidConfig("camera vectors must be finite".into()));
        }
        if (forward.norm() - 1.0).abs() > 1e-9 || (up.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "camera forward and up must be unit length".into(),
            ));
        }
        if forward.dot(up).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "camera forward and up must be perpendicular".into(),
            ));
        }
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!(
                "vertical field of view must lie in (0, pi), got {fov_y}"
            )));
        }
        if width < 8 || height < 8 {
            return Err(Error::InvalidConfig(format!(
                "resolution must be at least 8x8, got {width}x{height}"
            )));
        }
        Ok(Camera {
            position,
            forward,
            up,
            fov_y,
            width,
            height,
        })
    }

    /// Eye-level camera at (0, 1.8, 0) looking down -z with a 60 degree
    /// vertical field of view. The dataset generator uses this viewpoint.
    pub fn standard(width: usize, height: usize) -> Result<Camera> {
        Camera::new(
            Vec3::new(0.0, 1.8, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.0, 1.0, 0.0),
            std::f64::consts::FRAC_PI_3,
            width,
            height,
        )
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn fov_y(&self) -> f64 {
        self.fov_y
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Sun position and brightness at one time of day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightingState {
    /// Hour in `[0, 24)`.
    pub time_of_day: f64,
    /// Unit vector pointing from the scene toward the sun.
    pub sun_direction: Vec3,
    /// Direct light strength in `[0, 1]`; zero while the sun is below the
    /// horizon.
    pub sun_intensity: f64,
    /// Base illumination floor in `[0.05, 0.2]`.
    pub ambient: f64,
}

/// Computes the sun state for an hour in `[0, 24)`.
///
/// The sun swings through a vertical circle: elevation is
/// `sin(pi * (t - 6) / 12)`, so it crosses the horizon at 6:00 and 18:00 and
/// peaks at noon. Intensity clamps the elevation at zero for night hours and
/// ambient light follows it between 0.05 and 0.2.
pub fn sun_state(time_of_day: f64) -> Result<LightingState> {
    if !time_of_day.is_finite() || !(0.0..24.0).contains(&time_of_day) {
        return Err(Error::InvalidConfig(format!(
            "time of day must lie in [0, 24), got {time_of_day}"
        )));
    }
    let phase = std::f64::consts::PI * (time_of_day - 6.0) / 12.0;
    let elevation = phase.sin();
    let sun_direction = Vec3::new(phase.cos(), elevation, 0.0);
    Ok(LightingState {
        time_of_day,
        sun_direction,
        sun_intensity: elevation.max(0.0),
        ambient: 0.05 + 0.15 * elevation.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeatherKind {
    Sunny,
    Rainy,
    Foggy,
    Stormy,
    Smoggy,
}

impl WeatherKind {
    pub const ALL: [WeatherKind; 5] = [
        WeatherKind::Sunny,
        WeatherKind::Rainy,
        WeatherKind::Foggy,
        WeatherKind::Stormy,
        WeatherKind::Smoggy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeatherKind::Sunny => "sunny",
            WeatherKind::Rainy => "rainy",
            WeatherKind::Foggy => "foggy",
            WeatherKind::Stormy => "stormy",
            WeatherKind::Smoggy => "smoggy",
        }
    }
}

impl std::fmt::Display for WeatherKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for WeatherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<WeatherKind> {
        WeatherKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown weather '{s}' (expected one of sunny, rainy, foggy, stormy, smoggy)"
                ))
            })
    }
}

/// Atmosphere parameters for one weather kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherState {
    pub kind: WeatherKind,
    /// Exponential extinction coefficient in 1/m.
    pub fog_density: f64,
    /// Horizon color each kind fades toward.
    pub sky_color: [f64; 3],
    /// Multiplier on direct sunlight in `(0, 1]`.
    pub light_scale: f64,
}

/// Fixed atmosphere table. Clear air still scatters a little, so even sunny
/// skies carry a small nonzero fog density.
pub fn weather_state(kind: WeatherKind) -> WeatherState {
    let (fog_density, light_scale, sky_color) = match kind {
        WeatherKind::Sunny => (0.0005, 1.0, [0.60, 0.75, 0.95]),
        WeatherKind::Rainy => (0.004, 0.7, [0.55, 0.58, 0.62]),
        WeatherKind::Foggy => (0.02, 0.8, [0.78, 0.79, 0.80]),
        WeatherKind::Stormy => (0.006, 0.5, [0.35, 0.37, 0.42]),
        WeatherKind::Smoggy => (0.01, 0.85, [0.70, 0.62, 0.48]),
    };
    WeatherState {
        kind,
        fog_density,
        sky_color,
        light_scale,
    }
}

/// Knobs for [`generate_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub box_count: usize,
    pub sphere_count: usize,
    /// Lateral half-width in meters; object footprints stay inside
    /// `|x| <= extent`.
    pub extent: f64,
    /// Smallest edge length / sphere diameter in meters.
    pub min_size: f64,
    /// Largest edge length / sphere diameter in meters.
    pub max_size: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            box_count: 6,
            sphere_count: 4,
            extent: 40.0,
            min_size: 0.3,
            max_size: 8.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "extent must be positive, got {}",
                self.extent
            )));
        }
        if !(self.min_size.is_finite() && self.min_size > 0.0 && self.max_size >= self.min_size) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_size <= max_size, got {}..{}",
                self.min_size, self.max_size
            )));
        }
        if self.extent < self.max_size {
            return Err(Error::InvalidConfig(format!(
                "extent {} cannot hold a primitive of size {}",
                self.extent, self.max_size
            )));
        }
        Ok(())
    }
}

/// Generates a scene: one ground plane at y = 0 plus the configured number
/// of boxes and spheres.
///
/// Kinds are shuffled, then object `i` of `n` is assigned the `i`-th
/// log-depth stratum of `[DEPTH_MIN, DEPTH_MAX]`. With two or more objects
/// the first near face is pinned to `DEPTH_MIN` and the last far face to
/// `DEPTH_MAX`, so the generated depth distribution always spans the full
/// measurable range. The same seed always yields the same scene.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ground_albedo = [
        rng.gen_range(0.15..0.35),
        rng.gen_range(0.25..0.50),
        rng.gen_range(0.10..0.30),
    ];
    let mut primitives = vec![Primitive::Ground {
        height: 0.0,
        albedo: ground_albedo,
    }];

    #[derive(Clone, Copy)]
    enum Kind {
        Box,
        Sphere,
    }
    let mut kinds = Vec::with_capacity(config.box_count + config.sphere_count);
    kinds.extend(std::iter::repeat(Kind::Box).take(config.box_count));
    kinds.extend(std::iter::repeat(Kind::Sphere).take(config.sphere_count));
    kinds.shuffle(&mut rng);

    enum SizeDraw {
        Box { sx: f64, sy: f64, sz: f64 },
        Sphere { radius: f64 },
    }

    let total = kinds.len();
    let (ln_lo, ln_hi) = (DEPTH_MIN.ln(), DEPTH_MAX.ln());
    for (i, kind) in kinds.iter().enumerate() {
        // Size first, then depth, then lateral offset, then albedo: a fixed
        // draw order keeps scenes reproducible if variants are added later.
        let size = match kind {
            Kind::Box => SizeDraw::Box {
                sx: rng.gen_range(config.min_size..=config.max_size),
                sy: rng.gen_range(config.min_size..=config.max_size),
                sz: rng.gen_range(config.min_size..=config.max_size),
            },
            Kind::Sphere => SizeDraw::Sphere {
                radius: rng.gen_range(config.min_size / 2.0..=config.max_size / 2.0),
            },
        };
        let (lateral_half, depth_extent) = match size {
            SizeDraw::Box { sx, sz, .. } => (sx / 2.0, sz),
            SizeDraw::Sphere { radius } => (radius, 2.0 * radius),
        };

        let u: f64 = rng.gen_range(0.0..1.0);
        let stratum = (i as f64 + u) / total as f64;
        let mut near_face = (ln_lo + (ln_hi - ln_lo) * stratum).exp();
        near_face = near_face.clamp(DEPTH_MIN, DEPTH_MAX - depth_extent);
        let mut far_face = near_face + depth_extent;
        if i == 0 && total >= 2 {
            near_face = DEPTH_MIN;
            far_face = DEPTH_MIN + depth_extent;
        }
        if i == total - 1 && total >= 2 {
            near_face = DEPTH_MAX - depth_extent;
            far_face = DEPTH_MAX;
        }

        let x_slack = config.extent - lateral_half;
        let x = rng.gen_range(-x_slack..=x_slack);
        let albedo = [
            rng.gen_range(0.10..0.95),
            rng.gen_range(0.10..0.95),
            rng.gen_range(0.10..0.95),
        ];
        primitives.push(match size {
            SizeDraw::Box { sx, sy, .. } => Primitive::Box {
                min: Vec3::new(x - sx / 2.0, 0.0, -far_face),
                max: Vec3::new(x + sx / 2.0, sy, -near_face),
                albedo,
            },
            SizeDraw::Sphere { radius } => Primitive::Sphere {
                center: Vec3::new(x, radius, -near_face - radius),
                radius,
                albedo,
            },
        });
    }

    Scene::new(primitives, seed)
}
