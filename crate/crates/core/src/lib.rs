//! Toolkit for trajectory-sampled radio map reconstruction.
//!
//! The crate covers the whole non-neural side of the problem:
//!
//! * [`grid`]: rasters, sampling budgets, condition stacks and the observation hard constraint.
//! * [`io`]: scene loading, mask PNGs and the `TGF1` float field format.
//! * [`traj`]: seeded trajectory (A*) and random observation masks.
//! * [`geom`]: exact Euclidean distance transforms, segment sampling and Gaussian smoothing.
//! * [`guidance`]: the distance / boundary / occlusion risk prior and its loss.
//! * [`recon`]: nearest, inverse-distance and harmonic (Laplace) reconstructors.
//! * [`metrics`]: masked MAE / RMSE / NMSE / PSNR / SSIM and report aggregation.
//! * [`toy`]: a deterministic synthetic scene generator used by tests and the CLI.

pub mod error;
pub mod geom;
pub mod grid;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod recon;
pub mod toy;
pub mod traj;

pub use error::{Error, Result};
pub use grid::{BitMask, ConditionStack, GridMap, Pixel, Scene};
