//! Scene ingest, mask PNGs and the `TGF1` float field format.
//!
//! `TGF1` layout, all little-endian:
//!
//! ```text
//! b"TGF1" | height: u32 | width: u32 | height*width f32 values, row-major
//! ```

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BitMask, GridMap, Pixel, Scene};

pub const FIELD_MAGIC: &[u8; 4] = b"TGF1";
const HEADER_LEN: usize = 12;

/// Threshold on the normalized grayscale value above which a pixel is a building.
pub const BUILDING_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    All,
}

/// Where the dataset rasters live. Patterns are relative to `root`, with `{id}`
/// replaced by the map id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub building_pattern: String,
    pub tx_pattern: String,
    pub gain_pattern: String,
    pub train_ids: RangeInclusive<u32>,
    pub test_ids: RangeInclusive<u32>,
}

impl DatasetLayout {
    /// RadioMapSeer-style layout, first transmitter of each map.
    pub fn radiomapseer(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            building_pattern: "png/buildings_complete/{id}.png".into(),
            tx_pattern: "png/antennas/{id}_0.png".into(),
            gain_pattern: "gain/DPM/{id}_0.png".into(),
            train_ids: 0..=499,
            test_ids: 500..=700,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (&self.train_ids, &self.test_ids);
        if a.start() <= b.end() && b.start() <= a.end() {
            return Err(Error::InvalidParameter("train and test id ranges overlap".into()));
        }
        Ok(())
    }

    pub fn ids(&self, split: Split) -> Vec<u32> {
        match split {
            Split::Train => self.train_ids.clone().collect(),
            Split::Test => self.test_ids.clone().collect(),
            Split::All => {
                let mut ids: Vec<u32> = self.train_ids.clone().chain(self.test_ids.clone()).collect();
                ids.sort_unstable();
                ids
            }
        }
    }

    fn resolve(&self, pattern: &str, map_id: u32) -> PathBuf {
        self.root.join(pattern.replace("{id}", &map_id.to_string()))
    }

    pub fn building_path(&self, map_id: u32) -> PathBuf {
        self.resolve(&self.building_pattern, map_id)
    }

    pub fn tx_path(&self, map_id: u32) -> PathBuf {
        self.resolve(&self.tx_pattern, map_id)
    }

    pub fn gain_path(&self, map_id: u32) -> PathBuf {
        self.resolve(&self.gain_pattern, map_id)
    }
}

/// Reads a raster as values in `[0, 1]`: 8- and 16-bit grayscale PNGs are
/// divided by their full scale, `.tgf` files are read as-is and clamped.
pub fn read_unit_raster(path: &Path) -> Result<GridMap> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    if path.extension().is_some_and(|e| e == "tgf") {
        let raw = read_field(path)?;
        let (h, w) = raw.dims();
        return GridMap::from_unit_values(h, w, raw.into_values());
    }
    let (w, h, values): (u32, u32, Vec<f64>) = match image::open(path)? {
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            (w, h, img.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        other => {
            let img = other.into_luma8();
            let (w, h) = img.dimensions();
            (w, h, img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
    };
    GridMap::from_unit_values(h as usize, w as usize, values)
}

/// Loads buildings, transmitter and gain map for one id.
///
/// Buildings are `value > 0.5`; the transmitter is the first (row-major)
/// maximum of its raster.
pub fn load_scene(layout: &DatasetLayout, map_id: u32) -> Result<Scene> {
    let building_raw = read_unit_raster(&layout.building_path(map_id))?;
    let tx_raw = read_unit_raster(&layout.tx_path(map_id))?;
    let truth = read_unit_raster(&layout.gain_path(map_id))?;
    building_raw.ensure_same_dims(tx_raw.dims())?;
    building_raw.ensure_same_dims(truth.dims())?;

    let (h, w) = building_raw.dims();
    let building = BitMask::new(h, w, building_raw.values().iter().map(|&v| v > BUILDING_THRESHOLD).collect())?;
    let (best, peak) =
        tx_raw
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    if peak <= 0.0 {
        return Err(Error::NoTransmitter);
    }
    Scene::new(map_id, building, Pixel::new(best / w, best % w), truth)
}

/// Writes an 8-bit grayscale PNG with set pixels as 255 and clear pixels as 0.
pub fn write_mask_png(mask: &BitMask, path: &Path) -> Result<()> {
    let (h, w) = mask.dims();
    let data = mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let img: GrayImage = ImageBuffer::from_raw(w as u32, h as u32, data).expect("buffer sized to raster");
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Reads a mask PNG; any value other than 0 or 255 is an error.
pub fn read_mask_png(path: &Path) -> Result<BitMask> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = match image::open(path)? {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(Error::UnsupportedRaster(format!("mask must be 8-bit grayscale, got {:?}", other.color())))
        }
    };
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    let mut bits = Vec::with_capacity(w * h);
    for (i, &v) in img.as_raw().iter().enumerate() {
        match v {
            0 => bits.push(false),
            255 => bits.push(true),
            value => return Err(Error::NonBinaryPixel { value, pixel: (i / w, i % w) }),
        }
    }
    BitMask::new(h, w, bits)
}

pub fn encode_field(map: &GridMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    for &v in map.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<GridMap> {
    if bytes.len() < 4 || &bytes[..4] != FIELD_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (h, w) = (word(4), word(8));
    let expected = h * w * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Truncated { expected, found: payload.len() });
    }
    let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    GridMap::new(h, w, values)
}

/// Writes a `TGF1` field; values are stored at `f32` precision.
pub fn write_field(map: &GridMap, path: &Path) -> Result<()> {
    fs::write(path, encode_field(map))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<GridMap> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_field(&fs::read(path)?)
}

/// 8-bit preview value: `round(v * 255)` with halves up, clamped to `[0, 255]`.
pub fn preview_level(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Visualization-only grayscale PNG of a unit-range field.
pub fn write_field_preview(map: &GridMap, path: &Path) -> Result<()> {
    let (h, w) = map.dims();
    let data = map.values().iter().map(|&v| preview_level(v)).collect();
    let img: GrayImage =
        ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, data).expect("buffer sized to raster");
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Rate in per mille as used in file names: `0.005 -> "5"`, `0.0125 -> "12p5"`.
pub fn rate_tag(rate: f64) -> String {
    let permille = (rate * 1e6).round() / 1e3;
    let text = format!("{permille}");
    text.replace('.', "p")
}

/// `{map_id}_{rate‰}_{variant}`, shared by every per-instance file.
pub fn instance_stem(map_id: u32, rate: f64, variant: u32) -> String {
    format!("{map_id}_{}_{variant}", rate_tag(rate))
}
