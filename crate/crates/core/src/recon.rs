//! Model-free reconstructors mapping `(mask, samples, building)` to a full radio map.
//!
//! All three interpolate: sampled pixels keep their observed value, building
//! pixels are written as 0, and every accessible value stays within the range
//! of the samples that produced it.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::nearest_sources;
use crate::grid::{apply_samples, hard_constraint, BitMask, GridMap, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nearest,
    Idw,
    Laplace,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Nearest, Method::Idw, Method::Laplace];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nearest => "nearest",
            Method::Idw => "idw",
            Method::Laplace => "laplace",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub method: Method,
    pub idw_power: f64,
    pub idw_k: usize,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { method: Method::Laplace, idw_power: 2.0, idw_k: 8, cg_tolerance: 1e-8, cg_max_iters: 20_000 }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.idw_power > 0.0 && self.idw_power.is_finite()) {
            return Err(Error::InvalidParameter("idw_power must be positive".into()));
        }
        if self.idw_k == 0 {
            return Err(Error::InvalidParameter("idw_k must be at least 1".into()));
        }
        if self.cg_tolerance.is_nan() || self.cg_tolerance <= 0.0 {
            return Err(Error::InvalidParameter("cg_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Convergence record of a conjugate gradient solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub unknowns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub map: GridMap,
    pub solver: Option<SolverStats>,
}

fn check_inputs(samples: &GridMap, mask: &BitMask, building: &BitMask) -> Result<()> {
    samples.ensure_same_dims(mask.dims())?;
    samples.ensure_same_dims(building.dims())?;
    if mask.none() {
        return Err(Error::EmptyMask);
    }
    if mask.intersects(building) {
        return Err(Error::MaskOverlapsBuilding);
    }
    Ok(())
}

/// Each accessible pixel copies its Euclidean-nearest sample (ties go to the
/// sample with the smaller row-major index).
pub fn reconstruct_nearest(samples: &GridMap, mask: &BitMask, building: &BitMask) -> Result<GridMap> {
    check_inputs(samples, mask, building)?;
    let ns = nearest_sources(mask)?;
    let (h, w) = samples.dims();
    let values = (0..h * w).map(|i| if building.bits()[i] { 0.0 } else { samples.values()[ns.source[i]] }).collect();
    GridMap::new(h, w, values)
}

/// Inverse-distance weighting over the `k` nearest samples, `w = 1 / dist^power`.
/// Neighbors are ranked by `(squared distance, row-major index)`.
pub fn reconstruct_idw(samples: &GridMap, mask: &BitMask, building: &BitMask, cfg: &ReconConfig) -> Result<GridMap> {
    cfg.validate()?;
    check_inputs(samples, mask, building)?;
    let (h, w) = samples.dims();
    let sites: Vec<(usize, usize, f64)> = mask.pixels().map(|p| (p.row, p.col, samples.get(p))).collect();
    let k = cfg.idw_k.min(sites.len());
    let half_power = cfg.idw_power / 2.0;

    let mut best: Vec<(u64, usize)> = Vec::with_capacity(k + 1);
    let mut values = vec![0.0; h * w];
    for (i, out) in values.iter_mut().enumerate() {
        if building.bits()[i] {
            continue;
        }
        if mask.bits()[i] {
            *out = samples.values()[i];
            continue;
        }
        let (r, c) = (i / w, i % w);
        best.clear();
        for (s, &(sr, sc, _)) in sites.iter().enumerate() {
            let dr = sr.abs_diff(r) as u64;
            let dc = sc.abs_diff(c) as u64;
            let cand = (dr * dr + dc * dc, s);
            if best.len() == k && cand >= best[k - 1] {
                continue;
            }
            let pos = best.partition_point(|b| *b < cand);
            best.insert(pos, cand);
            best.truncate(k);
        }
        let (mut num, mut den) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(d2, s) in &best {
            let v = sites[s].2;
            let wgt = 1.0 / (d2 as f64).powf(half_power);
            num += wgt * v;
            den += wgt;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        *out = (num / den).clamp(lo, hi);
    }
    GridMap::new(h, w, values)
}

/// 4-connected component labels over accessible pixels.
fn components4(building: &BitMask) -> (Vec<usize>, usize) {
    let (h, w) = building.dims();
    let mut label = vec![usize::MAX; h * w];
    let mut count = 0;
    let mut stack = Vec::new();
    for seed in 0..h * w {
        if building.bits()[seed] || label[seed] != usize::MAX {
            continue;
        }
        label[seed] = count;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for j in neighbors4(i, h, w) {
                if !building.bits()[j] && label[j] == usize::MAX {
                    label[j] = count;
                    stack.push(j);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn neighbors4(i: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (i / w, i % w);
    [(r > 0).then(|| i - w), (c > 0).then(|| i - 1), (c + 1 < w).then(|| i + 1), (r + 1 < h).then(|| i + w)]
        .into_iter()
        .flatten()
}

/// Symmetric positive-definite graph Laplacian restricted to the unknowns.
struct LaplaceSystem {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    rhs: Vec<f64>,
}

impl LaplaceSystem {
    /// `y = A x`, off-diagonal entries are all −1.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = self.diag[row] * x[row];
            for &c in &self.cols[self.offsets[row]..self.offsets[row + 1]] {
                acc -= x[c];
            }
            *out = acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient, stopping at `‖r‖ ≤ tol·‖b‖`.
fn solve_pcg(sys: &LaplaceSystem, tol: f64, max_iters: usize) -> Result<(Vec<f64>, SolverStats)> {
    let n = sys.rhs.len();
    let b_norm = dot(&sys.rhs, &sys.rhs).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, SolverStats { iterations: 0, relative_residual: 0.0, unknowns: n }));
    }
    let mut r = sys.rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&sys.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 0..=max_iters {
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual <= tol {
            return Ok((x, SolverStats { iterations: it, relative_residual: residual, unknowns: n }));
        }
        if it == max_iters {
            break;
        }
        sys.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / sys.diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged { iterations: max_iters, residual })
}

/// Harmonic inpainting: discrete Laplace equation on accessible unsampled
/// pixels, Dirichlet data at samples, walls and raster edges dropped from the
/// 5-point stencil. Components without any sample get the mean of all samples.
pub fn reconstruct_laplace(
    samples: &GridMap,
    mask: &BitMask,
    building: &BitMask,
    cfg: &ReconConfig,
) -> Result<(GridMap, SolverStats)> {
    cfg.validate()?;
    check_inputs(samples, mask, building)?;
    let (h, w) = samples.dims();
    let known = mask.bits();
    let sample_values: Vec<f64> = mask.indices().map(|i| samples.values()[i]).collect();
    let lo = sample_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = sample_values.iter().sum::<f64>() / sample_values.len() as f64;

    let (label, n_comp) = components4(building);
    let mut anchored = vec![false; n_comp];
    for i in mask.indices() {
        anchored[label[i]] = true;
    }

    let mut values = vec![0.0; h * w];
    let mut unknown_of = vec![usize::MAX; h * w];
    let mut unknowns = Vec::new();
    let mut orphaned = 0usize;
    for i in 0..h * w {
        if building.bits()[i] {
            continue;
        }
        if known[i] {
            values[i] = samples.values()[i];
        } else if anchored[label[i]] {
            unknown_of[i] = unknowns.len();
            unknowns.push(i);
        } else {
            values[i] = mean;
            orphaned += 1;
        }
    }
    if orphaned > 0 {
        warn!("{orphaned} accessible pixels lie in components without samples; filled with the sample mean");
    }

    let mut sys = LaplaceSystem {
        diag: Vec::with_capacity(unknowns.len()),
        offsets: vec![0],
        cols: Vec::new(),
        rhs: Vec::with_capacity(unknowns.len()),
    };
    for &i in &unknowns {
        let mut degree = 0.0;
        let mut rhs = 0.0;
        for j in neighbors4(i, h, w) {
            if building.bits()[j] {
                continue;
            }
            degree += 1.0;
            if known[j] {
                rhs += samples.values()[j];
            } else {
                sys.cols.push(unknown_of[j]);
            }
        }
        sys.diag.push(degree);
        sys.rhs.push(rhs);
        sys.offsets.push(sys.cols.len());
    }

    let (x, stats) = solve_pcg(&sys, cfg.cg_tolerance, cfg.cg_max_iters)?;
    for (&i, v) in unknowns.iter().zip(x) {
        values[i] = v.clamp(lo, hi);
    }
    Ok((GridMap::new(h, w, values)?, stats))
}

/// Runs the configured method on a scene, then enforces the observations.
pub fn reconstruct(scene: &Scene, mask: &BitMask, cfg: &ReconConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let samples = apply_samples(&scene.truth, mask)?;
    let building = &scene.building;
    let (raw, solver) = match cfg.method {
        Method::Nearest => (reconstruct_nearest(&samples, mask, building)?, None),
        Method::Idw => (reconstruct_idw(&samples, mask, building, cfg)?, None),
        Method::Laplace => {
            let (map, stats) = reconstruct_laplace(&samples, mask, building, cfg)?;
            (map, Some(stats))
        }
    };
    let map = hard_constraint(&raw, mask, &samples)?;
    assert_eq!(map, raw, "reconstructor must interpolate its samples");
    Ok(Reconstruction { map, solver })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Pixel;

    fn single(h: usize, w: usize, p: Pixel, v: f64) -> (GridMap, BitMask) {
        let mut mask = BitMask::empty(h, w);
        mask.set(p, true);
        (GridMap::from_fn(h, w, |q| if q == p { v } else { 0.0 }), mask)
    }

    #[test]
    fn method_parsing() {
        assert_eq!("idw".parse::<Method>().unwrap(), Method::Idw);
        assert!("kriging".parse::<Method>().is_err());
    }

    #[test]
    fn nearest_single_sample_fills_everything() {
        let building = BitMask::from_fn(6, 6, |p| p.row == 0);
        let (samples, mask) = single(6, 6, Pixel::new(3, 3), 0.4);
        let out = reconstruct_nearest(&samples, &mask, &building).unwrap();
        for p in (0..36).map(|i| mask.pixel(i)) {
            assert_eq!(out.get(p), if building.get(p) { 0.0 } else { 0.4 });
        }
    }

    #[test]
    fn nearest_strip_halves() {
        let mask = BitMask::from_fn(1, 8, |p| p.col == 0 || p.col == 7);
        let samples = GridMap::from_fn(1, 8, |p| if p.col == 7 { 1.0 } else { 0.0 });
        let out = reconstruct_nearest(&samples, &mask, &BitMask::empty(1, 8)).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn full_mask_is_identity() {
        let building = BitMask::from_fn(5, 5, |p| p.row == 2 && p.col == 2);
        let truth = GridMap::from_fn(5, 5, |p| if building.get(p) { 0.0 } else { (p.row + p.col) as f64 / 10.0 });
        let mask = building.complement();
        let cfg = ReconConfig::default();
        assert_eq!(reconstruct_nearest(&truth, &mask, &building).unwrap(), truth);
        assert_eq!(reconstruct_idw(&truth, &mask, &building, &cfg).unwrap(), truth);
        assert_eq!(reconstruct_laplace(&truth, &mask, &building, &cfg).unwrap().0, truth);
    }

    #[test]
    fn constant_samples_reproduce_constant() {
        let building = BitMask::from_fn(9, 9, |p| p.col == 4 && p.row < 7);
        let mask = BitMask::from_fn(9, 9, |p| (p.row * 9 + p.col) % 7 == 0 && !building.get(p));
        let samples = GridMap::from_fn(9, 9, |p| if mask.get(p) { 0.3 } else { 0.0 });
        let cfg = ReconConfig::default();
        for out in [
            reconstruct_idw(&samples, &mask, &building, &cfg).unwrap(),
            reconstruct_laplace(&samples, &mask, &building, &cfg).unwrap().0,
        ] {
            for p in building.complement().pixels() {
                assert_eq!(out.get(p), 0.3);
            }
        }
    }

    #[test]
    fn idw_equidistant_pair() {
        let mask = BitMask::from_fn(1, 5, |p| p.col == 0 || p.col == 4);
        let samples = GridMap::from_fn(1, 5, |p| if p.col == 4 { 1.0 } else { 0.0 });
        let cfg = ReconConfig { idw_k: 2, ..Default::default() };
        let out = reconstruct_idw(&samples, &mask, &BitMask::empty(1, 5), &cfg).unwrap();
        assert_eq!(out.get(Pixel::new(0, 2)), 0.5);
    }

    #[test]
    fn laplace_single_unknown_is_neighbor_mean() {
        let mask = BitMask::from_fn(3, 3, |p| p != Pixel::new(1, 1));
        let samples = GridMap::from_fn(3, 3, |p| match (p.row, p.col) {
            (0, 1) => 0.1,
            (1, 0) => 0.2,
            (1, 2) => 0.6,
            (2, 1) => 0.9,
            (1, 1) => 0.0,
            _ => 0.5,
        });
        let (out, stats) =
            reconstruct_laplace(&samples, &mask, &BitMask::empty(3, 3), &ReconConfig::default()).unwrap();
        assert!((out.get(Pixel::new(1, 1)) - 0.45).abs() < 1e-12);
        assert_eq!(stats.unknowns, 1);
    }

    #[test]
    fn laplace_orphan_component_gets_mean() {
        // wall splits the map; samples only on the left
        let building = BitMask::from_fn(4, 5, |p| p.col == 2);
        let mask = BitMask::from_fn(4, 5, |p| p.col == 0 && p.row < 2);
        let samples = GridMap::from_fn(4, 5, |p| if mask.get(p) { 0.2 + 0.4 * p.row as f64 } else { 0.0 });
        let (out, _) = reconstruct_laplace(&samples, &mask, &building, &ReconConfig::default()).unwrap();
        assert!((out.get(Pixel::new(3, 4)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn laplace_reports_non_convergence() {
        let mask = BitMask::from_fn(20, 20, |p| p.row == 0 && p.col == 0);
        let samples = GridMap::from_fn(20, 20, |p| if mask.get(p) { 1.0 } else { 0.0 });
        let cfg = ReconConfig { cg_max_iters: 1, cg_tolerance: 1e-14, ..Default::default() };
        match reconstruct_laplace(&samples, &mask, &BitMask::empty(20, 20), &cfg) {
            Err(Error::NotConverged { iterations: 1, residual }) => assert!(residual > 1e-14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_mask_and_overlap_rejected() {
        let building = BitMask::from_fn(4, 4, |p| p.row == 0);
        let samples = GridMap::zeros(4, 4);
        assert!(matches!(reconstruct_nearest(&samples, &BitMask::empty(4, 4), &building), Err(Error::EmptyMask)));
        let mask = BitMask::from_fn(4, 4, |p| p.row == 0 && p.col == 0);
        assert!(matches!(reconstruct_nearest(&samples, &mask, &building), Err(Error::MaskOverlapsBuilding)));
    }

    #[test]
    fn reconstruct_with_full_mask_returns_truth() {
        let building = BitMask::from_fn(6, 6, |p| p.row == 5);
        let truth = GridMap::from_fn(6, 6, |p| if building.get(p) { 0.0 } else { p.col as f64 / 6.0 });
        let scene = Scene::new(0, building.clone(), Pixel::new(0, 0), truth.clone()).unwrap();
        for method in Method::ALL {
            let cfg = ReconConfig { method, ..Default::default() };
            let out = reconstruct(&scene, &building.complement(), &cfg).unwrap();
            assert_eq!(out.map, truth);
            assert_eq!(out.solver.is_some(), method == Method::Laplace);
        }
    }
}
