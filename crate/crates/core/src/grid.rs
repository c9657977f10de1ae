//! Raster types, condition assembly, sampling budgets and the observation hard constraint.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pixel coordinate, `row` first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub(crate) fn tuple(self) -> (usize, usize) {
        (self.row, self.col)
    }
}

impl From<(usize, usize)> for Pixel {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

fn check_dims(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 || height.checked_mul(width) != Some(len) {
        return Err(Error::InvalidDimensions);
    }
    Ok(())
}

/// Single-channel row-major scalar raster.
///
/// Normalized maps (radio maps, guidance maps) live in `[0, 1]`; distance
/// fields are in pixel units. Values are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GridMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at index {i}")));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        Self { height, width, values: vec![value; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(Pixel) -> f64) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        let mut values = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                values.push(f(Pixel::new(row, col)));
            }
        }
        Self { height, width, values }
    }

    /// Builds a normalized map, clamping anything outside `[0, 1]`.
    pub fn from_unit_values(height: usize, width: usize, mut values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        let mut clamped = 0usize;
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("non-finite value on ingest".into()));
            }
            if *v < 0.0 || *v > 1.0 {
                *v = v.clamp(0.0, 1.0);
                clamped += 1;
            }
        }
        if clamped > 0 {
            warn!("clamped {clamped} values outside [0, 1]");
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.values[p.row * self.width + p.col]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { height: self.height, width: self.width, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Min-max rescale to `[0, 1]`; a constant map becomes all zeros.
    pub fn min_max_normalized(&self) -> Self {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        if span <= 0.0 {
            return Self::zeros(self.height, self.width);
        }
        self.map(|v| (v - lo) / span)
    }

    /// Rounds every value through `f32`, the precision of the on-disk field format.
    pub fn to_f32_precision(&self) -> Self {
        self.map(|v| v as f32 as f64)
    }

    pub(crate) fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::DimensionMismatch { expected: self.dims(), actual: other });
        }
        Ok(())
    }
}

/// Row-major boolean raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(height, width, bits.len())?;
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn full(height: usize, width: usize) -> Self {
        let mut m = Self::empty(height, width);
        m.bits.fill(true);
        m
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(Pixel) -> bool) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        let mut bits = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(Pixel::new(row, col)));
            }
        }
        Self { height, width, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, p: Pixel) -> bool {
        self.bits[p.row * self.width + p.col]
    }

    pub fn set(&mut self, p: Pixel, value: bool) {
        self.bits[p.row * self.width + p.col] = value;
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn none(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn pixel(&self, index: usize) -> Pixel {
        Pixel::new(index / self.width, index % self.width)
    }

    /// Row-major indices of the set pixels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.indices().map(|i| self.pixel(i))
    }

    pub fn complement(&self) -> Self {
        Self { height: self.height, width: self.width, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn intersects(&self, other: &BitMask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }

    pub fn to_grid(&self) -> GridMap {
        GridMap {
            height: self.height,
            width: self.width,
            values: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub(crate) fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::DimensionMismatch { expected: self.dims(), actual: other });
        }
        Ok(())
    }
}

/// One dataset map: buildings, transmitter location and ground-truth radio map.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub map_id: u32,
    pub building: BitMask,
    pub tx: Pixel,
    pub truth: GridMap,
}

impl Scene {
    pub fn new(map_id: u32, building: BitMask, tx: Pixel, truth: GridMap) -> Result<Self> {
        building.ensure_same_dims(truth.dims())?;
        if !building.contains(tx) {
            return Err(Error::OutOfBounds(tx.tuple()));
        }
        Ok(Self { map_id, building, tx, truth })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.building.dims()
    }

    pub fn accessible(&self) -> BitMask {
        self.building.complement()
    }

    pub fn tx_onehot(&self) -> BitMask {
        let (h, w) = self.dims();
        let mut m = BitMask::empty(h, w);
        m.set(self.tx, true);
        m
    }
}

/// Network input planes `[B, T_x, M, Y]`, optionally extended by a guidance plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionStack {
    pub building: BitMask,
    pub tx_onehot: BitMask,
    pub mask: BitMask,
    pub samples: GridMap,
    pub guidance: Option<GridMap>,
}

impl ConditionStack {
    pub fn plane_count(&self) -> usize {
        4 + usize::from(self.guidance.is_some())
    }

    /// Planes in stack order: building, transmitter, mask, samples, then guidance if present.
    pub fn planes(&self) -> Vec<GridMap> {
        let mut planes =
            vec![self.building.to_grid(), self.tx_onehot.to_grid(), self.mask.to_grid(), self.samples.clone()];
        if let Some(g) = &self.guidance {
            planes.push(g.clone());
        }
        planes
    }
}

/// Number of observed pixels for a sampling rate: `round(rate * accessible)`, halves rounding up.
pub fn sampling_budget(building: &BitMask, rate: f64) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter(format!("sampling rate {rate} not in (0, 1]")));
    }
    let accessible = building.len() - building.count();
    if accessible == 0 {
        return Err(Error::NoAccessibleArea);
    }
    let budget = (rate * accessible as f64 + 0.5).floor() as usize;
    Ok(budget.min(accessible))
}

/// `mask ⊙ truth`.
pub fn apply_samples(truth: &GridMap, mask: &BitMask) -> Result<GridMap> {
    truth.ensure_same_dims(mask.dims())?;
    let values = truth.values.iter().zip(&mask.bits).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    Ok(GridMap { height: truth.height, width: truth.width, values })
}

/// Overwrites the prediction with the observed samples on mask pixels.
pub fn hard_constraint(prediction: &GridMap, mask: &BitMask, samples: &GridMap) -> Result<GridMap> {
    prediction.ensure_same_dims(mask.dims())?;
    prediction.ensure_same_dims(samples.dims())?;
    let values = prediction
        .values
        .iter()
        .zip(&mask.bits)
        .zip(&samples.values)
        .map(|((&p, &m), &s)| if m { s } else { p })
        .collect();
    Ok(GridMap { height: prediction.height, width: prediction.width, values })
}

pub fn assemble_condition(scene: &Scene, mask: &BitMask, guidance: Option<GridMap>) -> Result<ConditionStack> {
    scene.building.ensure_same_dims(mask.dims())?;
    if mask.intersects(&scene.building) {
        return Err(Error::MaskOverlapsBuilding);
    }
    if let Some(g) = &guidance {
        g.ensure_same_dims(scene.dims())?;
    }
    Ok(ConditionStack {
        building: scene.building.clone(),
        tx_onehot: scene.tx_onehot(),
        mask: mask.clone(),
        samples: apply_samples(&scene.truth, mask)?,
        guidance,
    })
}
