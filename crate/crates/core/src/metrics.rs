//! Masked reconstruction metrics.
//!
//! Every error metric is computed over an evaluation mask (normally the
//! non-building pixels). PSNR uses a peak of 1 and caps exact matches at
//! [`PSNR_CAP_DB`]. SSIM is the single-scale Gaussian-window variant; its
//! per-pixel map is defined where the 11×11 window fits inside the raster,
//! and is averaged over the evaluation pixels in that region.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::gaussian_kernel;
use crate::grid::{apply_samples, hard_constraint, BitMask, GridMap};

pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskedErrors {
    pub mae: f64,
    pub rmse: f64,
    pub nmse: f64,
    pub count: usize,
}

fn check(pred: &GridMap, truth: &GridMap, mask: &BitMask) -> Result<()> {
    pred.ensure_same_dims(truth.dims())?;
    pred.ensure_same_dims(mask.dims())?;
    if mask.none() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Mean squared error over the mask.
fn masked_mse(pred: &GridMap, truth: &GridMap, mask: &BitMask) -> f64 {
    let (sum, n) = mask
        .indices()
        .map(|i| pred.values()[i] - truth.values()[i])
        .fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    sum / n as f64
}

/// MAE, RMSE and truth-energy-normalized MSE over `eval_mask`.
pub fn masked_errors(pred: &GridMap, truth: &GridMap, eval_mask: &BitMask) -> Result<MaskedErrors> {
    check(pred, truth, eval_mask)?;
    let (mut abs, mut sq, mut energy, mut n) = (0.0, 0.0, 0.0, 0usize);
    for i in eval_mask.indices() {
        let x = truth.values()[i];
        let e = pred.values()[i] - x;
        abs += e.abs();
        sq += e * e;
        energy += x * x;
        n += 1;
    }
    if energy == 0.0 {
        return Err(Error::ZeroTruthEnergy);
    }
    Ok(MaskedErrors { mae: abs / n as f64, rmse: (sq / n as f64).sqrt(), nmse: sq / energy, count: n })
}

pub fn psnr(pred: &GridMap, truth: &GridMap, eval_mask: &BitMask) -> Result<f64> {
    check(pred, truth, eval_mask)?;
    Ok(psnr_from_mse(masked_mse(pred, truth, eval_mask)))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        -10.0 * mse.log10()
    }
}

/// Per-pixel SSIM map; `None` where the window does not fit.
pub fn ssim_map(pred: &GridMap, truth: &GridMap) -> Result<Vec<Option<f64>>> {
    pred.ensure_same_dims(truth.dims())?;
    let (h, w) = pred.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { actual: (h, w), window: SSIM_WINDOW });
    }
    let radius = SSIM_WINDOW / 2;
    let kernel = gaussian_kernel(SSIM_SIGMA, radius);
    let (x, y) = (pred.values(), truth.values());
    let vh = h - 2 * radius;
    let vw = w - 2 * radius;

    // horizontal valid pass for the five moment images, then vertical
    let moments = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut horiz = vec![0.0; h * vw];
        for r in 0..h {
            for c in 0..vw {
                horiz[r * vw + c] = kernel.iter().enumerate().map(|(t, k)| k * f(r * w + c + t)).sum();
            }
        }
        let mut out = vec![0.0; vh * vw];
        for r in 0..vh {
            for c in 0..vw {
                out[r * vw + c] = kernel.iter().enumerate().map(|(t, k)| k * horiz[(r + t) * vw + c]).sum();
            }
        }
        out
    };
    let mu_x = moments(&|i| x[i]);
    let mu_y = moments(&|i| y[i]);
    let xx = moments(&|i| x[i] * x[i]);
    let yy = moments(&|i| y[i] * y[i]);
    let xy = moments(&|i| x[i] * y[i]);

    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let mut map = vec![None; h * w];
    for r in 0..vh {
        for c in 0..vw {
            let j = r * vw + c;
            let (mx, my) = (mu_x[j], mu_y[j]);
            let vx = xx[j] - mx * mx;
            let vy = yy[j] - my * my;
            let cov = xy[j] - mx * my;
            let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            map[(r + radius) * w + c + radius] = Some(s);
        }
    }
    Ok(map)
}

pub fn ssim(pred: &GridMap, truth: &GridMap, eval_mask: &BitMask) -> Result<f64> {
    pred.ensure_same_dims(eval_mask.dims())?;
    let map = ssim_map(pred, truth)?;
    let (sum, n) = eval_mask.indices().filter_map(|i| map[i]).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Mean absolute deviation of the raw prediction from the observations, over mask pixels.
pub fn obs_loss(raw_pred: &GridMap, samples: &GridMap, mask: &BitMask) -> Result<f64> {
    check(raw_pred, samples, mask)?;
    let (sum, n) = mask
        .indices()
        .map(|i| (raw_pred.values()[i] - samples.values()[i]).abs())
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    Ok(sum / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub map_id: Option<u32>,
    pub rate: Option<f64>,
    pub variant: Option<u32>,
    pub method: Option<String>,
    pub mae: f64,
    pub rmse: f64,
    pub nmse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub obs_loss: f64,
    pub guide_loss: Option<f64>,
    pub count: usize,
}

impl MetricReport {
    pub fn with_key(mut self, map_id: u32, rate: f64, variant: u32, method: &str) -> Self {
        self.map_id = Some(map_id);
        self.rate = Some(rate);
        self.variant = Some(variant);
        self.method = Some(method.to_string());
        self
    }
}

/// Scores a raw prediction against the truth over non-building pixels.
///
/// `obs_loss` always uses the raw prediction. With `enforce_observations` the
/// remaining metrics are computed after the hard constraint, otherwise on the
/// raw prediction.
pub fn evaluate(
    raw_pred: &GridMap,
    truth: &GridMap,
    mask: &BitMask,
    building: &BitMask,
    enforce_observations: bool,
) -> Result<MetricReport> {
    let samples = apply_samples(truth, mask)?;
    let obs = if mask.none() { 0.0 } else { obs_loss(raw_pred, &samples, mask)? };
    let pred = if enforce_observations { hard_constraint(raw_pred, mask, &samples)? } else { raw_pred.clone() };
    let eval_mask = building.complement();
    let errors = masked_errors(&pred, truth, &eval_mask)?;
    Ok(MetricReport {
        map_id: None,
        rate: None,
        variant: None,
        method: None,
        mae: errors.mae,
        rmse: errors.rmse,
        nmse: errors.nmse,
        psnr_db: psnr_from_mse(errors.rmse * errors.rmse),
        ssim: ssim(&pred, truth, &eval_mask)?,
        obs_loss: obs,
        guide_loss: None,
        count: errors.count,
    })
}

fn shared<T: PartialEq + Clone>(mut items: impl Iterator<Item = Option<T>>) -> Option<T> {
    let first = items.next()??;
    items.all(|x| x.as_ref() == Some(&first)).then_some(first)
}

/// Unweighted mean of every metric. Keys shared by all inputs are kept, the rest become `None`.
pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::EmptyReports);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let guide_loss =
        reports.iter().map(|r| r.guide_loss).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n);
    Ok(MetricReport {
        map_id: shared(reports.iter().map(|r| r.map_id)),
        rate: shared(reports.iter().map(|r| r.rate)),
        variant: shared(reports.iter().map(|r| r.variant)),
        method: shared(reports.iter().map(|r| r.method.clone())),
        mae: mean(|r| r.mae),
        rmse: mean(|r| r.rmse),
        nmse: mean(|r| r.nmse),
        psnr_db: mean(|r| r.psnr_db),
        ssim: mean(|r| r.ssim),
        obs_loss: mean(|r| r.obs_loss),
        guide_loss,
        count: reports.iter().map(|r| r.count).sum(),
    })
}

/// Aggregates within groups sharing the same key.
pub fn aggregate_by<K: Ord>(
    reports: &[MetricReport],
    key: impl Fn(&MetricReport) -> K,
) -> Result<BTreeMap<K, MetricReport>> {
    let mut groups: BTreeMap<K, Vec<MetricReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(key(r)).or_default().push(r.clone());
    }
    groups.into_iter().map(|(k, v)| aggregate(&v).map(|a| (k, a))).collect()
}
