//! Run configuration: a flat TOML file, overridden key by key from the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use radiomap_core::guidance::RiskParams;
use radiomap_core::io::{DatasetLayout, Split};
use radiomap_core::recon::{Method, ReconConfig};
use radiomap_core::toy::ToyOptions;
use radiomap_core::traj::VARIANTS;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RATES: [f64; 5] = [0.005, 0.010, 0.015, 0.020, 0.025];

/// Raised for bad configuration; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Trajectory,
    Random,
}

impl MaskKind {
    pub fn dir(self) -> &'static str {
        match self {
            MaskKind::Trajectory => "trajectory",
            MaskKind::Random => "random",
        }
    }
}

/// Every key the config file accepts. Each is optional; unset keys take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset_root: Option<PathBuf>,
    pub building_pattern: Option<String>,
    pub tx_pattern: Option<String>,
    pub gain_pattern: Option<String>,
    pub split: Option<Split>,
    pub map_ids: Option<String>,
    pub toy: Option<bool>,
    pub toy_maps: Option<usize>,
    pub toy_size: Option<usize>,
    pub global_seed: Option<u64>,
    pub rates: Option<Vec<f64>>,
    pub variants: Option<u32>,
    pub mask_kind: Option<MaskKind>,
    pub sigma_d: Option<f64>,
    pub sigma_e: Option<f64>,
    pub sigma_s: Option<f64>,
    pub n_occlusion: Option<usize>,
    pub w_d: Option<f64>,
    pub w_e: Option<f64>,
    pub w_o: Option<f64>,
    pub methods: Option<Vec<Method>>,
    pub idw_power: Option<f64>,
    pub idw_k: Option<usize>,
    pub cg_tolerance: Option<f64>,
    pub cg_max_iters: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// Keys set in `other` replace keys set here.
    pub fn overlay(self, other: ConfigFile) -> ConfigFile {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigFile { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            dataset_root,
            building_pattern,
            tx_pattern,
            gain_pattern,
            split,
            map_ids,
            toy,
            toy_maps,
            toy_size,
            global_seed,
            rates,
            variants,
            mask_kind,
            sigma_d,
            sigma_e,
            sigma_s,
            n_occlusion,
            w_d,
            w_e,
            w_o,
            methods,
            idw_power,
            idw_k,
            cg_tolerance,
            cg_max_iters,
            out_dir,
            workers
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SceneSource {
    Toy { options: ToyOptions, maps: usize },
    Dataset { layout: DatasetLayout, ids: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: SceneSource,
    pub global_seed: u64,
    pub rates: Vec<f64>,
    pub variants: u32,
    pub mask_kind: MaskKind,
    pub risk: RiskParams,
    pub methods: Vec<Method>,
    pub recon: ReconConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Parses `"0-4,7,9-10"` into a sorted id list.
pub fn parse_id_list(text: &str) -> anyhow::Result<Vec<u32>> {
    let mut ids = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty id range {part}");
                }
                ids.extend(a..=b);
            }
            None => ids.push(part.parse()?),
        }
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

impl RunConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self, UsageError> {
        let usage = |m: String| UsageError(m);
        let global_seed = file.global_seed.unwrap_or(0);

        let source = if file.toy.unwrap_or(false) {
            let size = file.toy_size.unwrap_or(64);
            if size < 16 {
                return Err(usage("toy_size must be at least 16".into()));
            }
            SceneSource::Toy {
                options: ToyOptions { size, buildings: (size / 10).max(2), seed: global_seed },
                maps: file.toy_maps.unwrap_or(5),
            }
        } else {
            let root =
                file.dataset_root.clone().ok_or_else(|| usage("either dataset_root or toy must be set".into()))?;
            let mut layout = DatasetLayout::radiomapseer(root);
            if let Some(p) = file.building_pattern.clone() {
                layout.building_pattern = p;
            }
            if let Some(p) = file.tx_pattern.clone() {
                layout.tx_pattern = p;
            }
            if let Some(p) = file.gain_pattern.clone() {
                layout.gain_pattern = p;
            }
            layout.validate().map_err(|e| usage(e.to_string()))?;
            let ids = match &file.map_ids {
                Some(list) => parse_id_list(list).map_err(|e| usage(format!("map_ids: {e}")))?,
                None => layout.ids(file.split.unwrap_or(Split::Test)),
            };
            SceneSource::Dataset { layout, ids }
        };

        let rates = file.rates.clone().unwrap_or_else(|| DEFAULT_RATES.to_vec());
        if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(usage("rates must be non-empty and each in (0, 1]".into()));
        }
        let variants = file.variants.unwrap_or(VARIANTS);
        if variants == 0 || variants > VARIANTS {
            return Err(usage(format!("variants must be in 1..={VARIANTS}")));
        }

        let defaults = RiskParams::default();
        let risk = RiskParams {
            sigma_d: file.sigma_d.unwrap_or(defaults.sigma_d),
            sigma_e: file.sigma_e.unwrap_or(defaults.sigma_e),
            sigma_s: file.sigma_s.unwrap_or(defaults.sigma_s),
            n_occlusion_samples: file.n_occlusion.unwrap_or(defaults.n_occlusion_samples),
            w_d: file.w_d.unwrap_or(defaults.w_d),
            w_e: file.w_e.unwrap_or(defaults.w_e),
            w_o: file.w_o.unwrap_or(defaults.w_o),
        };
        risk.validate().map_err(|e| usage(e.to_string()))?;

        let methods = file.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
        if methods.is_empty() {
            return Err(usage("methods must not be empty".into()));
        }
        let base = ReconConfig::default();
        let recon = ReconConfig {
            method: methods[0],
            idw_power: file.idw_power.unwrap_or(base.idw_power),
            idw_k: file.idw_k.unwrap_or(base.idw_k),
            cg_tolerance: file.cg_tolerance.unwrap_or(base.cg_tolerance),
            cg_max_iters: file.cg_max_iters.unwrap_or(base.cg_max_iters),
        };
        recon.validate().map_err(|e| usage(e.to_string()))?;

        let workers = file.workers.unwrap_or(4);
        if workers == 0 {
            return Err(usage("workers must be at least 1".into()));
        }
        Ok(RunConfig {
            source,
            global_seed,
            rates,
            variants,
            mask_kind: file.mask_kind.unwrap_or(MaskKind::Trajectory),
            risk,
            methods,
            recon,
            out_dir: file.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            workers,
        })
    }

    pub fn map_ids(&self) -> Vec<u32> {
        match &self.source {
            SceneSource::Toy { maps, .. } => (0..*maps as u32).collect(),
            SceneSource::Dataset { ids, .. } => ids.clone(),
        }
    }
}
