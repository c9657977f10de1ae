//! `radiomap`: trajectory masks, guidance targets, baseline reconstructions and evaluation.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use radiomap_core::recon::Method;

use config::{parse_id_list, ConfigFile, MaskKind, RunConfig, UsageError};
use pipeline::Pipeline;

#[derive(Parser, Debug)]
#[command(name = "radiomap", version, about = "Sparse radio map reconstruction from trajectory samples")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use generated toy scenes instead of a dataset.
    #[arg(long, global = true)]
    toy: bool,
    #[arg(long = "toy_maps", alias = "toy-maps", global = true)]
    toy_maps: Option<usize>,
    #[arg(long = "toy_size", alias = "toy-size", global = true)]
    toy_size: Option<usize>,
    #[arg(long = "dataset_root", alias = "dataset-root", global = true)]
    dataset_root: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["train", "test", "all"])]
    split: Option<String>,
    /// Map ids such as `500-509,612`.
    #[arg(long = "map_ids", alias = "map-ids", global = true)]
    map_ids: Option<String>,
    #[arg(long = "global_seed", visible_alias = "seed", alias = "global-seed", global = true)]
    global_seed: Option<u64>,
    /// Comma separated sampling rates.
    #[arg(long, global = true, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, global = true)]
    variants: Option<u32>,
    #[arg(long = "mask_kind", alias = "mask-kind", global = true, value_enum)]
    mask_kind: Option<MaskKind>,
    #[arg(long = "out_dir", alias = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate trajectory (and optionally random) sampling masks.
    GenMasks {
        /// Also write random masks with the same budgets.
        #[arg(long)]
        random: bool,
        #[arg(long)]
        force: bool,
    },
    /// Compute guidance targets for existing masks.
    GenGuidance {
        #[command(flatten)]
        risk: RiskArgs,
        /// Also write the individual risk components.
        #[arg(long)]
        components: bool,
        /// Also write the distance-to-observation field, raw and normalized.
        #[arg(long)]
        distance: bool,
        /// Also write an 8-bit preview of each target.
        #[arg(long)]
        preview: bool,
        #[arg(long)]
        force: bool,
    },
    /// Run the baseline interpolators.
    Reconstruct {
        #[arg(long, value_enum)]
        method: Vec<Method>,
        #[arg(long = "idw_power", alias = "idw-power")]
        idw_power: Option<f64>,
        #[arg(long = "idw_k", alias = "idw-k")]
        idw_k: Option<usize>,
        #[arg(long = "cg_tolerance", alias = "cg-tolerance")]
        cg_tolerance: Option<f64>,
        #[arg(long = "cg_max_iters", alias = "cg-max-iters")]
        cg_max_iters: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Score predictions and write reports.
    Evaluate {
        /// Extra prediction directory holding `pred_<stem>.tgf` files. Repeatable.
        #[arg(long)]
        pred: Vec<PathBuf>,
        /// Skip the hard observation constraint.
        #[arg(long)]
        raw: bool,
        /// Directory of predicted guidance maps (`guide_<stem>.tgf`).
        #[arg(long = "guide_pred", alias = "guide-pred")]
        guide_pred: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RiskArgs {
    #[arg(long = "sigma_d", alias = "sigma-d")]
    sigma_d: Option<f64>,
    #[arg(long = "sigma_e", alias = "sigma-e")]
    sigma_e: Option<f64>,
    #[arg(long = "sigma_s", alias = "sigma-s")]
    sigma_s: Option<f64>,
    #[arg(long = "n_occlusion", alias = "n-occlusion")]
    n_occlusion: Option<usize>,
    #[arg(long = "w_d", alias = "w-d")]
    w_d: Option<f64>,
    #[arg(long = "w_e", alias = "w-e")]
    w_e: Option<f64>,
    #[arg(long = "w_o", alias = "w-o")]
    w_o: Option<f64>,
}

fn flag_overrides(cli: &Cli) -> Result<ConfigFile> {
    let g = &cli.global;
    let split = match g.split.as_deref() {
        Some(s) => Some(toml::Value::String(s.into()).try_into()?),
        None => None,
    };
    if let Some(ids) = &g.map_ids {
        parse_id_list(ids).map_err(|e| UsageError(format!("--map_ids: {e}")))?;
    }
    let mut file = ConfigFile {
        dataset_root: g.dataset_root.clone(),
        split,
        map_ids: g.map_ids.clone(),
        toy: g.toy.then_some(true),
        toy_maps: g.toy_maps,
        toy_size: g.toy_size,
        global_seed: g.global_seed,
        rates: g.rates.clone(),
        variants: g.variants,
        mask_kind: g.mask_kind,
        out_dir: g.out_dir.clone(),
        workers: g.workers,
        ..Default::default()
    };
    match &cli.command {
        Command::GenGuidance { risk, .. } => {
            file.sigma_d = risk.sigma_d;
            file.sigma_e = risk.sigma_e;
            file.sigma_s = risk.sigma_s;
            file.n_occlusion = risk.n_occlusion;
            file.w_d = risk.w_d;
            file.w_e = risk.w_e;
            file.w_o = risk.w_o;
        }
        Command::Reconstruct { method, idw_power, idw_k, cg_tolerance, cg_max_iters, .. } => {
            if !method.is_empty() {
                file.methods = Some(method.clone());
            }
            file.idw_power = *idw_power;
            file.idw_k = *idw_k;
            file.cg_tolerance = *cg_tolerance;
            file.cg_max_iters = *cg_max_iters;
        }
        _ => {}
    }
    Ok(file)
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.global.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = RunConfig::resolve(base.overlay(flag_overrides(&cli)?))?;
    log::debug!("resolved config: {cfg:?}");
    let pipeline = Pipeline::new(cfg)?;

    match cli.command {
        Command::GenMasks { random, force } => {
            let (written, skipped) = pipeline.gen_masks(random, force)?.counts();
            println!("wrote {written}, skipped {skipped}");
        }
        Command::GenGuidance { components, distance, preview, force, .. } => {
            let (written, skipped) = pipeline.gen_guidance(components, distance, preview, force)?.counts();
            println!("wrote {written}, skipped {skipped}");
        }
        Command::Reconstruct { force, .. } => {
            let methods = pipeline.cfg.methods.clone();
            let (written, skipped) = pipeline.reconstruct(&methods, force)?.counts();
            println!("wrote {written}, skipped {skipped}");
        }
        Command::Evaluate { pred, raw, guide_pred } => {
            let mut sets = pipeline.local_prediction_sets()?;
            for dir in pred {
                if !dir.is_dir() {
                    return Err(UsageError(format!("--pred {} is not a directory", dir.display())).into());
                }
                let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                sets.push((label, dir));
            }
            let reports = pipeline.evaluate(&sets, guide_pred.as_deref(), raw)?;
            println!("evaluated {} predictions", reports.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
