//! Subcommand bodies. Work is split per map over a bounded rayon pool; each map
//! handles its own `(rate, variant)` instances and writes only its own files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, ensure, Context, Result};
use log::info;
use radiomap_core::grid::sampling_budget;
use radiomap_core::guidance::{guidance_loss, guidance_target};
use radiomap_core::io::{
    instance_stem, load_scene, read_field, read_mask_png, write_field, write_field_preview, write_mask_png,
};
use radiomap_core::metrics::{aggregate, aggregate_by, evaluate, MetricReport};
use radiomap_core::recon::{reconstruct, Method, ReconConfig, SolverStats};
use radiomap_core::toy::toy_scene;
use radiomap_core::traj::{generate_random_mask, generate_trajectory_mask, TrajectorySpec};
use radiomap_core::Scene;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MaskKind, RunConfig, SceneSource};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub map_id: u32,
    pub rate: f64,
    pub variant: u32,
}

impl Instance {
    pub fn stem(&self) -> String {
        instance_stem(self.map_id, self.rate, self.variant)
    }

    fn spec(&self, seed: u64) -> Result<TrajectorySpec> {
        Ok(TrajectorySpec::new(self.map_id, self.rate, self.variant, seed)?)
    }
}

/// Output tree below `out_dir`.
pub struct Paths<'a> {
    pub out: &'a Path,
}

impl Paths<'_> {
    pub fn masks(&self, kind: MaskKind) -> PathBuf {
        self.out.join("masks").join(kind.dir())
    }

    pub fn mask(&self, kind: MaskKind, inst: &Instance) -> PathBuf {
        self.masks(kind).join(format!("mask_{}.png", inst.stem()))
    }

    pub fn mask_record(&self, kind: MaskKind, inst: &Instance) -> PathBuf {
        self.masks(kind).join(format!("mask_{}.json", inst.stem()))
    }

    pub fn guidance(&self, kind: MaskKind) -> PathBuf {
        self.out.join("guidance").join(kind.dir())
    }

    pub fn guidance_file(&self, kind: MaskKind, prefix: &str, inst: &Instance, ext: &str) -> PathBuf {
        self.guidance(kind).join(format!("{prefix}_{}.{ext}", inst.stem()))
    }

    pub fn predictions(&self, kind: MaskKind) -> PathBuf {
        self.out.join("pred").join(kind.dir())
    }

    pub fn reports(&self, kind: MaskKind) -> PathBuf {
        self.out.join("reports").join(kind.dir())
    }
}

pub fn prediction_file(dir: &Path, inst: &Instance) -> PathBuf {
    dir.join(format!("pred_{}.tgf", inst.stem()))
}

/// Sidecar written next to every mask.
#[derive(Debug, Serialize, Deserialize)]
pub struct MaskRecord {
    pub kind: MaskKind,
    pub map_id: u32,
    pub rate: f64,
    pub variant: u32,
    pub global_seed: u64,
    pub budget: usize,
    pub achieved_count: usize,
}

/// Sidecar written next to every prediction.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub method: Method,
    pub map_id: u32,
    pub rate: f64,
    pub variant: u32,
    pub solver: Option<SolverStats>,
}

/// Counts of files written and instances skipped by a resumable command.
#[derive(Debug, Default)]
pub struct Tally {
    pub written: AtomicUsize,
    pub skipped: AtomicUsize,
}

impl Tally {
    fn wrote(&self, n: usize) {
        self.written.fetch_add(n, Ordering::Relaxed);
    }

    fn skip(&self) {
        self.skipped.fetch_add(1, Ordering::Relaxed);
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.written.load(Ordering::Relaxed), self.skipped.load(Ordering::Relaxed))
    }
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
        Ok(Self { cfg, pool })
    }

    fn paths(&self) -> Paths<'_> {
        Paths { out: &self.cfg.out_dir }
    }

    /// Field files hold f32, so the truth is held at the same precision.
    pub fn load(&self, map_id: u32) -> Result<Scene> {
        let mut scene = match &self.cfg.source {
            SceneSource::Toy { options, .. } => toy_scene(map_id, options),
            SceneSource::Dataset { layout, .. } => {
                load_scene(layout, map_id).with_context(|| format!("loading map {map_id}"))?
            }
        };
        scene.truth = scene.truth.to_f32_precision();
        Ok(scene)
    }

    fn instances(&self, map_id: u32) -> Vec<Instance> {
        let mut out = Vec::new();
        for &rate in &self.cfg.rates {
            for variant in 0..self.cfg.variants {
                out.push(Instance { map_id, rate, variant });
            }
        }
        out
    }

    /// Runs `work` once per map on the pool; the first error aborts the run.
    fn per_map<T: Send>(&self, work: impl Fn(&Scene) -> Result<T> + Sync) -> Result<Vec<T>> {
        let ids = self.cfg.map_ids();
        self.pool.install(|| {
            ids.par_iter()
                .map(|&id| {
                    let scene = self.load(id)?;
                    work(&scene).with_context(|| format!("map {id}"))
                })
                .collect()
        })
    }

    pub fn gen_masks(&self, also_random: bool, force: bool) -> Result<Tally> {
        let mut kinds = vec![MaskKind::Trajectory];
        if also_random {
            kinds.push(MaskKind::Random);
        }
        for &kind in &kinds {
            fs::create_dir_all(self.paths().masks(kind))?;
        }
        let tally = Tally::default();
        self.per_map(|scene| {
            for inst in self.instances(scene.map_id) {
                for &kind in &kinds {
                    let png = self.paths().mask(kind, &inst);
                    let record = self.paths().mask_record(kind, &inst);
                    if !force && png.exists() && record.exists() {
                        tally.skip();
                        continue;
                    }
                    let spec = inst.spec(self.cfg.global_seed)?;
                    let mask = match kind {
                        MaskKind::Trajectory => generate_trajectory_mask(scene, &spec)?,
                        MaskKind::Random => generate_random_mask(scene, &spec)?,
                    };
                    let budget = sampling_budget(&scene.building, inst.rate)?;
                    ensure!(
                        mask.count() == budget,
                        "{} mask {} has {} pixels, budget {budget}",
                        kind.dir(),
                        inst.stem(),
                        mask.count()
                    );
                    write_mask_png(&mask, &png)?;
                    let rec = MaskRecord {
                        kind,
                        map_id: inst.map_id,
                        rate: inst.rate,
                        variant: inst.variant,
                        global_seed: self.cfg.global_seed,
                        budget,
                        achieved_count: mask.count(),
                    };
                    fs::write(&record, serde_json::to_string_pretty(&rec)? + "\n")?;
                    tally.wrote(1);
                }
            }
            Ok(())
        })?;
        Ok(tally)
    }

    fn read_mask(&self, inst: &Instance) -> Result<radiomap_core::BitMask> {
        let path = self.paths().mask(self.cfg.mask_kind, inst);
        read_mask_png(&path).with_context(|| format!("missing mask {}", path.display()))
    }

    pub fn gen_guidance(&self, components: bool, distance: bool, preview: bool, force: bool) -> Result<Tally> {
        let kind = self.cfg.mask_kind;
        fs::create_dir_all(self.paths().guidance(kind))?;
        let tally = Tally::default();
        self.per_map(|scene| {
            for inst in self.instances(scene.map_id) {
                let target_path = self.paths().guidance_file(kind, "guide", &inst, "tgf");
                if !force && target_path.exists() {
                    tally.skip();
                    continue;
                }
                let mask = self.read_mask(&inst)?;
                let risk = guidance_target(scene, &mask, &self.cfg.risk)?;
                let mut outputs = vec![("guide", risk.target.clone())];
                if components {
                    outputs.push(("rd", risk.r_distance.clone()));
                    outputs.push(("re", risk.r_boundary.clone()));
                    outputs.push(("ro", risk.r_occlusion.clone()));
                    outputs.push(("rbar", risk.fused_raw.clone()));
                }
                if distance {
                    let d = radiomap_core::geom::euclidean_distance_transform(&mask)?;
                    outputs.push(("dtaun", d.normalized()));
                    outputs.push(("dtau", d.into_map()));
                }
                // the target is written last so an interrupted run is redone
                for (prefix, map) in outputs.iter().rev() {
                    write_field(map, &self.paths().guidance_file(kind, prefix, &inst, "tgf"))?;
                }
                if preview {
                    write_field_preview(&risk.target, &self.paths().guidance_file(kind, "guide", &inst, "png"))?;
                }
                tally.wrote(outputs.len());
            }
            Ok(())
        })?;
        Ok(tally)
    }

    pub fn reconstruct(&self, methods: &[Method], force: bool) -> Result<Tally> {
        let kind = self.cfg.mask_kind;
        for m in methods {
            fs::create_dir_all(self.paths().predictions(kind).join(m.name()))?;
        }
        let tally = Tally::default();
        self.per_map(|scene| {
            for inst in self.instances(scene.map_id) {
                let mut mask = None;
                for &method in methods {
                    let dir = self.paths().predictions(kind).join(method.name());
                    let path = prediction_file(&dir, &inst);
                    if !force && path.exists() {
                        tally.skip();
                        continue;
                    }
                    if mask.is_none() {
                        mask = Some(self.read_mask(&inst)?);
                    }
                    let cfg = ReconConfig { method, ..self.cfg.recon };
                    let out = reconstruct(scene, mask.as_ref().unwrap(), &cfg)?;
                    write_field(&out.map, &path)?;
                    let rec = PredictionRecord {
                        method,
                        map_id: inst.map_id,
                        rate: inst.rate,
                        variant: inst.variant,
                        solver: out.solver,
                    };
                    fs::write(path.with_extension("json"), serde_json::to_string_pretty(&rec)? + "\n")?;
                    tally.wrote(1);
                }
            }
            Ok(())
        })?;
        Ok(tally)
    }

    /// Prediction sets found under the output tree, as `(label, directory)`.
    pub fn local_prediction_sets(&self) -> Result<Vec<(String, PathBuf)>> {
        let root = self.paths().predictions(self.cfg.mask_kind);
        let mut sets = Vec::new();
        if root.is_dir() {
            for entry in fs::read_dir(&root)? {
                let path = entry?.path();
                if path.is_dir() {
                    let label = path.file_name().unwrap().to_string_lossy().into_owned();
                    sets.push((label, path));
                }
            }
        }
        sets.sort();
        Ok(sets)
    }

    /// Scores each prediction set on every instance and writes the report files.
    pub fn evaluate(
        &self,
        sets: &[(String, PathBuf)],
        guide_pred: Option<&Path>,
        raw: bool,
    ) -> Result<Vec<MetricReport>> {
        if sets.is_empty() {
            bail!("no prediction sets to evaluate");
        }
        let kind = self.cfg.mask_kind;
        let per_map = self.per_map(|scene| {
            let mut reports = Vec::new();
            for inst in self.instances(scene.map_id) {
                let mask = self.read_mask(&inst)?;
                let guide = match guide_pred {
                    Some(dir) => {
                        let predicted = read_field(&dir.join(format!("guide_{}.tgf", inst.stem())))?;
                        let target = read_field(&self.paths().guidance_file(kind, "guide", &inst, "tgf"))?;
                        Some(guidance_loss(&predicted, &target, &scene.building)?)
                    }
                    None => None,
                };
                for (label, dir) in sets {
                    let path = prediction_file(dir, &inst);
                    let pred = read_field(&path).with_context(|| format!("prediction {}", path.display()))?;
                    if pred.dims() != scene.dims() {
                        bail!("shape mismatch: {} is {:?}, truth is {:?}", path.display(), pred.dims(), scene.dims());
                    }
                    let mut report = evaluate(&pred, &scene.truth, &mask, &scene.building, !raw)?.with_key(
                        inst.map_id,
                        inst.rate,
                        inst.variant,
                        label,
                    );
                    report.guide_loss = guide;
                    reports.push(report);
                }
            }
            Ok(reports)
        })?;
        let reports: Vec<MetricReport> = per_map.into_iter().flatten().collect();
        write_reports(&self.paths().reports(kind), &reports)?;
        info!("evaluated {} instances", reports.len());
        Ok(reports)
    }
}

#[derive(Serialize)]
struct InstanceRow<'a> {
    map_id: u32,
    rate: f64,
    variant: u32,
    method: &'a str,
    mae: f64,
    rmse: f64,
    nmse: f64,
    psnr_db: f64,
    ssim: f64,
    obs_loss: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    rate: Option<f64>,
    mae: f64,
    rmse: f64,
    nmse: f64,
    psnr_db: f64,
    ssim: f64,
    obs_loss: f64,
    guide_loss: Option<f64>,
    instances: usize,
}

fn summary_row<'a>(method: &'a str, rate: Option<f64>, r: &MetricReport, instances: usize) -> SummaryRow<'a> {
    SummaryRow {
        method,
        rate,
        mae: r.mae,
        rmse: r.rmse,
        nmse: r.nmse,
        psnr_db: r.psnr_db,
        ssim: r.ssim,
        obs_loss: r.obs_loss,
        guide_loss: r.guide_loss,
        instances,
    }
}

/// `instances.csv`, `summary.csv` (one row per method, averaged over rates,
/// variants and maps), `by_rate.csv`, and a markdown `summary.md`.
pub fn write_reports(dir: &Path, reports: &[MetricReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sorted: Vec<&MetricReport> = reports.iter().collect();
    let key = |r: &MetricReport| {
        (r.method.clone().unwrap_or_default(), r.map_id, (r.rate.unwrap_or(0.0) * 1e6).round() as u64, r.variant)
    };
    sorted.sort_by_key(|r| key(r));

    let mut w = csv::Writer::from_path(dir.join("instances.csv"))?;
    for r in &sorted {
        w.serialize(InstanceRow {
            map_id: r.map_id.unwrap_or_default(),
            rate: r.rate.unwrap_or_default(),
            variant: r.variant.unwrap_or_default(),
            method: r.method.as_deref().unwrap_or(""),
            mae: r.mae,
            rmse: r.rmse,
            nmse: r.nmse,
            psnr_db: r.psnr_db,
            ssim: r.ssim,
            obs_loss: r.obs_loss,
        })?;
    }
    w.flush()?;

    let by_method = aggregate_by(reports, |r| r.method.clone().unwrap_or_default())?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    let mut md = String::from("| Method | MAE | RMSE | NMSE | PSNR (dB) | SSIM |\n|---|---|---|---|---|---|\n");
    for (method, agg) in &by_method {
        let n = reports.iter().filter(|r| r.method.as_deref() == Some(method)).count();
        w.serialize(summary_row(method, None, agg, n))?;
        md += &format!(
            "| {method} | {:.4} | {:.4} | {:.4} | {:.2} | {:.4} |\n",
            agg.mae, agg.rmse, agg.nmse, agg.psnr_db, agg.ssim
        );
    }
    w.flush()?;
    fs::write(dir.join("summary.md"), md)?;

    let by_rate = aggregate_by(reports, |r| {
        (r.method.clone().unwrap_or_default(), (r.rate.unwrap_or(0.0) * 1e6).round() as u64)
    })?;
    let mut w = csv::Writer::from_path(dir.join("by_rate.csv"))?;
    for ((method, _), agg) in &by_rate {
        let n = reports.iter().filter(|r| r.method.as_deref() == Some(method) && r.rate == agg.rate).count();
        w.serialize(summary_row(method, agg.rate, agg, n))?;
    }
    w.flush()?;
    // overall mean across all sets, mostly for logging
    if let Ok(all) = aggregate(reports) {
        info!("overall: mae {:.5} rmse {:.5} ssim {:.4}", all.mae, all.rmse, all.ssim);
    }
    Ok(())
}
