//! Trajectory-guided risk prior.
//!
//! Three per-pixel risks are fused into a soft target in `[0, 1]`:
//!
//! * distance risk `R_d = 1 - exp(-d_tau / sigma_d)`, growing away from the observed trajectory;
//! * boundary risk `R_e = exp(-d_e / sigma_e)`, high near building boundaries;
//! * occlusion risk `R_o`, the fraction of transmitter-to-pixel segment samples inside buildings.
//!
//! The weighted sum is clipped and masked to accessible pixels, smoothed with a
//! Gaussian, then clipped and masked again.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    boundary_distance, euclidean_distance_transform, gaussian_smooth, line_blockage_fraction, DistanceField,
};
use crate::grid::{BitMask, GridMap, Pixel, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub sigma_d: f64,
    pub sigma_e: f64,
    pub sigma_s: f64,
    pub n_occlusion_samples: usize,
    pub w_d: f64,
    pub w_e: f64,
    pub w_o: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self { sigma_d: 16.0, sigma_e: 5.0, sigma_s: 1.0, n_occlusion_samples: 64, w_d: 0.6, w_e: 0.25, w_o: 0.15 }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.sigma_d > 0.0 && self.sigma_d.is_finite()) {
            return bad("sigma_d must be positive");
        }
        if !(self.sigma_e > 0.0 && self.sigma_e.is_finite()) {
            return bad("sigma_e must be positive");
        }
        if !(self.sigma_s >= 0.0 && self.sigma_s.is_finite()) {
            return bad("sigma_s must be non-negative");
        }
        if self.n_occlusion_samples == 0 {
            return bad("n_occlusion_samples must be at least 1");
        }
        if [self.w_d, self.w_e, self.w_o].iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("risk weights must be non-negative");
        }
        Ok(())
    }
}

/// Every intermediate field of the guidance target.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskDecomposition {
    pub r_distance: GridMap,
    pub r_boundary: GridMap,
    pub r_occlusion: GridMap,
    pub fused_raw: GridMap,
    pub target: GridMap,
}

pub fn distance_risk(d_tau: &DistanceField, sigma_d: f64) -> GridMap {
    d_tau.as_map().map(|d| 1.0 - (-d / sigma_d).exp())
}

pub fn boundary_risk(d_e: &DistanceField, sigma_e: f64) -> GridMap {
    d_e.as_map().map(|d| (-d / sigma_e).exp())
}

/// Occlusion risk at every pixel; building pixels are computed then zeroed.
pub fn occlusion_risk(building: &BitMask, tx: Pixel, n_samples: usize) -> GridMap {
    let (h, w) = building.dims();
    GridMap::from_fn(h, w, |p| {
        let blocked = line_blockage_fraction(building, tx, p, n_samples);
        if building.get(p) {
            0.0
        } else {
            blocked
        }
    })
}

fn clip_and_mask(map: &GridMap, building: &BitMask) -> GridMap {
    let (h, w) = map.dims();
    GridMap::from_fn(h, w, |p| if building.get(p) { 0.0 } else { map.get(p).clamp(0.0, 1.0) })
}

pub fn guidance_target(scene: &Scene, mask: &BitMask, params: &RiskParams) -> Result<RiskDecomposition> {
    params.validate()?;
    scene.building.ensure_same_dims(mask.dims())?;
    if mask.none() {
        return Err(Error::EmptyMask);
    }
    let building = &scene.building;
    let r_distance = distance_risk(&euclidean_distance_transform(mask)?, params.sigma_d);
    let r_boundary = boundary_risk(&boundary_distance(building), params.sigma_e);
    let r_occlusion = occlusion_risk(building, scene.tx, params.n_occlusion_samples);

    let (h, w) = scene.dims();
    let weighted = GridMap::from_fn(h, w, |p| {
        params.w_d * r_distance.get(p) + params.w_e * r_boundary.get(p) + params.w_o * r_occlusion.get(p)
    });
    let fused_raw = clip_and_mask(&weighted, building);
    let target = clip_and_mask(&gaussian_smooth(&fused_raw, params.sigma_s)?, building);
    Ok(RiskDecomposition { r_distance, r_boundary, r_occlusion, fused_raw, target })
}

/// Mean absolute difference over non-building pixels.
pub fn guidance_loss(predicted: &GridMap, target: &GridMap, building: &BitMask) -> Result<f64> {
    predicted.ensure_same_dims(target.dims())?;
    predicted.ensure_same_dims(building.dims())?;
    let (sum, n) = predicted
        .values()
        .iter()
        .zip(target.values())
        .zip(building.bits())
        .filter(|(_, &b)| !b)
        .fold((0.0, 0usize), |(s, n), ((p, t), _)| (s + (p - t).abs(), n + 1));
    if n == 0 {
        return Err(Error::NoAccessibleArea);
    }
    Ok(sum / n as f64)
}
