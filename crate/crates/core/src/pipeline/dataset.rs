//! Dataset generation and the manifest that indexes it.
//!
//! A dataset directory holds `rgb_NNNNN.ppm` / `depth_NNNNN.pfm` pairs plus
//! `manifest.tsv`, one tab-separated record per frame: rgb path, depth path,
//! scene seed, time of day, weather. Frames walk the cartesian product of
//! the configured times and weathers before advancing to the next scene, so
//! consecutive frames show the same geometry under different conditions.
//! Rendering is parallel over frames; file contents depend only on the
//! config, never on thread timing.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec;
use crate::raster::Raster;
use crate::render::{render_frame, FrameSample};
use crate::scenegen::{
    generate_scene, sun_state, weather_state, Camera, SceneConfig, WeatherKind,
};

use super::io::{read_pfm, read_ppm, write_pfm, write_ppm};

/// Spreads consecutive scene indices across the seed space (the 64-bit
/// golden-ratio increment) so scenes differ thoroughly, not just in their
/// last RNG word.
const SCENE_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// What to render: how many frames, at what size, under which conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub count: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Times of day in hours, each in `[0, 24)`.
    pub times: Vec<f64>,
    pub weathers: Vec<WeatherKind>,
    pub scene: SceneConfig,
}

impl GenerateConfig {
    pub fn new(count: usize, seed: u64, width: usize, height: usize) -> GenerateConfig {
        GenerateConfig {
            count,
            seed,
            width,
            height,
            times: vec![12.0],
            weathers: vec![WeatherKind::Sunny],
            scene: SceneConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("frame count must be positive".into()));
        }
        if self.times.is_empty() {
            return Err(Error::InvalidConfig("need at least one time of day".into()));
        }
        if self.weathers.is_empty() {
            return Err(Error::InvalidConfig("need at least one weather kind".into()));
        }
        for &t in &self.times {
            sun_state(t)?;
        }
        self.scene.validate()
    }
}

/// One line of the manifest. Paths are relative to the dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub rgb_path: PathBuf,
    pub depth_path: PathBuf,
    pub scene_seed: u64,
    pub time_of_day: f64,
    pub weather: WeatherKind,
}

/// An ordered index of the frames in one dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    root: PathBuf,
    records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    /// Parses `manifest.tsv` under `dir`. Rejects duplicate file paths;
    /// whether the files themselves exist is checked by [`Self::validate`]
    /// or simply by loading samples.
    pub fn load(dir: &Path) -> Result<DatasetManifest> {
        let path = dir.join("manifest.tsv");
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let context = |reason: String| Error::Format {
                path: path.clone(),
                reason: format!("line {}: {reason}", lineno + 1),
            };
            if fields.len() != 5 {
                return Err(context(format!("expected 5 fields, got {}", fields.len())));
            }
            let record = ManifestRecord {
                rgb_path: PathBuf::from(fields[0]),
                depth_path: PathBuf::from(fields[1]),
                scene_seed: fields[2]
                    .parse()
                    .map_err(|_| context(format!("bad scene seed {:?}", fields[2])))?,
                time_of_day: fields[3]
                    .parse()
                    .map_err(|_| context(format!("bad time of day {:?}", fields[3])))?,
                weather: fields[4]
                    .parse()
                    .map_err(|_| context(format!("bad weather {:?}", fields[4])))?,
            };
            for p in [&record.rgb_path, &record.depth_path] {
                if !seen.insert(p.clone()) {
                    return Err(context(format!("duplicate path {}", p.display())));
                }
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::Format {
                path,
                reason: "manifest lists no frames".into(),
            });
        }
        Ok(DatasetManifest {
            root: dir.to_path_buf(),
            records,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Reads the RGB and depth rasters of record `index`.
    pub fn load_sample(&self, index: usize) -> Result<(Raster, Raster)> {
        let record = &self.records[index];
        let rgb = read_ppm(&self.root.join(&record.rgb_path))?;
        let depth = read_pfm(&self.root.join(&record.depth_path))?;
        Ok((rgb, depth))
    }

    /// Confirms every referenced file exists and parses.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.records.len() {
            self.load_sample(i)?;
        }
        Ok(())
    }
}

/// Derives the scene seed used for frame group `scene_index`.
fn scene_seed(base: u64, scene_index: usize) -> u64 {
    base.wrapping_add((scene_index as u64).wrapping_mul(SCENE_SEED_STRIDE))
}

/// Renders `config.count` frames into `out_dir` and writes `manifest.tsv`.
/// Frame `i` uses scene `i / (times · weathers)` and walks times (outer) and
/// weathers (inner) within each scene, so a full cycle reuses one scene
/// under every configured condition.
pub fn generate_dataset(config: &GenerateConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    let camera = Camera::standard(config.width, config.height)?;
    let cycle = config.times.len() * config.weathers.len();
    let frames: Vec<FrameSample> = exec::try_map_indexed(config.count, |i| {
        let seed = scene_seed(config.seed, i / cycle);
        let time = config.times[(i % cycle) / config.weathers.len()];
        let weather = config.weathers[i % config.weathers.len()];
        let scene = generate_scene(seed, &config.scene)?;
        render_frame(&scene, &camera, &sun_state(time)?, &weather_state(weather))
    })?;

    let mut manifest_text = String::new();
    let mut records = Vec::with_capacity(config.count);
    for (i, frame) in frames.iter().enumerate() {
        let rgb_path = PathBuf::from(format!("rgb_{i:05}.ppm"));
        let depth_path = PathBuf::from(format!("depth_{i:05}.pfm"));
        write_ppm(&frame.rgb, &out_dir.join(&rgb_path))?;
        write_pfm(&frame.depth, &out_dir.join(&depth_path))?;
        manifest_text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            rgb_path.display(),
            depth_path.display(),
            frame.meta.scene_seed,
            frame.meta.time_of_day,
            frame.meta.weather,
        ));
        records.push(ManifestRecord {
            rgb_path,
            depth_path,
            scene_seed: frame.meta.scene_seed,
            time_of_day: frame.meta.time_of_day,
            weather: frame.meta.weather,
        });
    }
    let manifest_path = out_dir.join("manifest.tsv");
    fs::write(&manifest_path, manifest_text)
        .map_err(|e| Error::io(format!("writing {}", manifest_path.display()), e))?;
    Ok(DatasetManifest {
        root: out_dir.to_path_buf(),
        records,
    })
}
