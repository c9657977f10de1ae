use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("raster dimensions must be positive and match the buffer length")]
    InvalidDimensions,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no accessible area")]
    NoAccessibleArea,
    #[error("observation mask overlaps building pixels")]
    MaskOverlapsBuilding,
    #[error("empty source set")]
    EmptySource,
    #[error("empty mask")]
    EmptyMask,
    #[error("disconnected: goal {goal:?} is unreachable from {start:?}")]
    Disconnected { start: (usize, usize), goal: (usize, usize) },
    #[error("pixel {0:?} is not accessible")]
    NotAccessible((usize, usize)),
    #[error("pixel {0:?} is outside the raster")]
    OutOfBounds((usize, usize)),
    #[error("budget {budget} exceeds accessible pixel count {accessible}")]
    BudgetExceedsAccessible { budget: usize, accessible: usize },
    #[error("no reachable waypoint after {0} redraws")]
    WaypointRetriesExhausted(usize),
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("truth energy is zero over the evaluation mask; nmse undefined")]
    ZeroTruthEnergy,
    #[error("image {actual:?} is smaller than the {window}x{window} window")]
    ImageTooSmall { actual: (usize, usize), window: usize },
    #[error("no reports to aggregate")]
    EmptyReports,
    #[error("transmitter raster has no positive pixel")]
    NoTransmitter,
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("bad magic in field file")]
    BadMagic,
    #[error("truncated field file: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("mask raster contains non-binary value {value} at {pixel:?}")]
    NonBinaryPixel { value: u8, pixel: (usize, usize) },
    #[error("unsupported raster: {0}")]
    UnsupportedRaster(String),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
