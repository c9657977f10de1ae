use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use radiomap_core::io::read_field;
use radiomap_core::toy::{toy_scene, ToyOptions};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radiomap"))
        .args(["--toy", "--toy_maps", "2", "--toy_size", "40", "--rates", "0.01,0.02"])
        .arg("--out_dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = run(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn files(dir: &Path, ext: &str) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(ext))
        .collect();
    names.sort();
    names
}

#[test]
fn gen_masks_writes_every_instance_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let masks = tmp.path().join("masks/trajectory");
    assert_eq!(ok(tmp.path(), &["gen-masks"]).trim(), "wrote 32, skipped 0");
    assert_eq!(files(&masks, ".png").len(), 32);
    assert!(files(&masks, ".png").contains(&"mask_1_20_7.png".to_string()));
    assert_eq!(ok(tmp.path(), &["gen-masks"]).trim(), "wrote 0, skipped 32");

    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(masks.join("mask_0_10_3.json")).unwrap()).unwrap();
    assert_eq!(record["achieved_count"], record["budget"]);
    assert_eq!(record["kind"], "trajectory");

    let target = masks.join("mask_0_10_3.png");
    let before = fs::read(&target).unwrap();
    fs::remove_file(&target).unwrap();
    assert_eq!(ok(tmp.path(), &["gen-masks"]).trim(), "wrote 1, skipped 31");
    assert_eq!(fs::read(&target).unwrap(), before);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["reconstruct", "--method", "kriging"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(tmp.path(), &["--variants", "9", "gen-masks"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "gen-masks"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["gen-guidance"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing mask"));
}

#[test]
fn guidance_components_and_laplace_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--variants", "2", "gen-masks"]);
    assert_eq!(ok(tmp.path(), &["--variants", "2", "gen-guidance", "--components"]).trim(), "wrote 40, skipped 0");
    let guide = tmp.path().join("guidance/trajectory");
    for prefix in ["guide_", "rd_", "re_", "ro_", "rbar_"] {
        assert_eq!(files(&guide, ".tgf").iter().filter(|n| n.starts_with(prefix)).count(), 8, "{prefix}");
    }

    ok(tmp.path(), &["--variants", "2", "reconstruct", "--method", "laplace", "--cg_tolerance", "1e-8"]);
    let dir = tmp.path().join("pred/trajectory/laplace");
    let sidecars = files(&dir, ".json");
    assert_eq!(sidecars.len(), 8);
    for name in sidecars {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap();
        assert!(v["solver"]["relative_residual"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn evaluate_writes_reports_with_fixed_columns() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--variants", "1", "gen-masks"]);
    ok(tmp.path(), &["--variants", "1", "reconstruct", "--method", "nearest", "--method", "idw"]);
    ok(tmp.path(), &["--variants", "1", "evaluate"]);
    let reports = tmp.path().join("reports/trajectory");
    let instances = fs::read_to_string(reports.join("instances.csv")).unwrap();
    let mut lines = instances.lines();
    assert_eq!(lines.next().unwrap(), "map_id,rate,variant,method,mae,rmse,nmse,psnr_db,ssim,obs_loss");
    assert_eq!(lines.count(), 2 * 2 * 2);
    let summary = fs::read_to_string(reports.join("summary.md")).unwrap();
    assert!(summary.contains("| idw |") && summary.contains("| nearest |"));
    assert!(reports.join("summary.csv").exists() && reports.join("by_rate.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "variants = 1\nrates = [0.01]\nglobal_seed = 9\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_radiomap"))
        .args(["--toy", "--toy_maps", "1", "--toy_size", "32", "--config", cfg.to_str().unwrap()])
        .args(["--rates", "0.02", "--out-dir", tmp.path().join("o").to_str().unwrap(), "gen-masks"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(files(&tmp.path().join("o/masks/trajectory"), ".png"), vec!["mask_0_20_0.png"]);
}

#[test]
fn degenerate_weights_give_the_masked_distance_risk() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--variants", "1", "--rates", "0.01", "gen-masks"]);
    let args = ["--variants", "1", "--rates", "0.01", "gen-guidance", "--distance"];
    let weights = ["--w_d", "1", "--w_e", "0", "--w_o", "0", "--sigma_s", "0"];
    ok(tmp.path(), &[&args[..], &weights[..]].concat());
    let scene = toy_scene(0, &ToyOptions { size: 40, buildings: 4, seed: 0 });
    let dir = tmp.path().join("guidance/trajectory");
    let guide = read_field(&dir.join("guide_0_10_0.tgf")).unwrap();
    let d_tau = read_field(&dir.join("dtau_0_10_0.tgf")).unwrap();
    for (i, (&g, &d)) in guide.values().iter().zip(d_tau.values()).enumerate() {
        let expected = if scene.building.bits()[i] { 0.0 } else { 1.0 - (-d / 16.0).exp() };
        assert!((g - expected).abs() < 1e-6, "pixel {i}: {g} vs {expected}");
    }
}

#[test]
fn five_map_pipeline_finishes_within_a_minute() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let full = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_radiomap"))
            .args(["--toy", "--toy_maps", "5", "--out_dir", tmp.path().to_str().unwrap()])
            .args(args)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    full(&["gen-masks", "--random"]);
    full(&["gen-guidance"]);
    full(&["reconstruct"]);
    full(&["evaluate"]);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    let rows = fs::read_to_string(tmp.path().join("reports/trajectory/instances.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 5 * 5 * 8 * 3);
}
