use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_floodsr");

fn floodsr(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small dataset plus a briefly trained checkpoint, shared by the tests
/// that only need some plausible artifacts to operate on.
struct Fixture {
    _keep: TempDir,
    data: PathBuf,
    ckpt: PathBuf,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let keep = TempDir::new().unwrap();
        let data = keep.path().join("data");
        let ckpt = keep.path().join("tiny.ckpt");
        assert_ok(
            &floodsr(&["synth", "--out", data.to_str().unwrap(), "--seed", "11", "--size", "257"]),
            "synth",
        );
        assert_ok(
            &floodsr(&[
                "train",
                "--data",
                data.to_str().unwrap(),
                "--out",
                ckpt.to_str().unwrap(),
                "--features",
                "4",
                "--blocks",
                "1",
                "--layers",
                "2",
                "--growth",
                "4",
                "--epochs",
                "2",
            ]),
            "train",
        );
        Fixture { _keep: keep, data, ckpt }
    })
}

fn walk(dir: &Path, base: &Path, files: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(&path, base, files);
        } else {
            files.push(path.strip_prefix(base).unwrap().to_path_buf());
        }
    }
}

fn first_wfm(data: &Path) -> PathBuf {
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(data.join("manifest.json")).unwrap()).unwrap();
    let rel = manifest["tiles"][0]["wfm"].as_str().unwrap();
    data.join(rel)
}

#[test]
fn synth_runs_are_byte_identical_apart_from_timing() {
    let keep = TempDir::new().unwrap();
    let a = keep.path().join("a");
    let b = keep.path().join("b");
    for dir in [&a, &b] {
        assert_ok(
            &floodsr(&["synth", "--out", dir.to_str().unwrap(), "--seed", "11", "--size", "257"]),
            "synth",
        );
    }

    let mut files = Vec::new();
    walk(&a, &a, &mut files);
    files.sort();
    assert!(files.iter().any(|f| f.ends_with("manifest.json")));
    for rel in &files {
        let bytes_a = std::fs::read(a.join(rel)).unwrap();
        let bytes_b = std::fs::read(b.join(rel)).unwrap();
        if rel.ends_with("run.json") {
            // The manifest records the destination paths, which necessarily
            // differ between the two runs; everything else must agree once
            // the timing field is dropped.
            let scrub = |bytes: &[u8], dir: &Path| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v["duration_ms"] = serde_json::Value::Null;
                serde_json::to_string(&v)
                    .unwrap()
                    .replace(dir.to_str().unwrap(), "<out>")
            };
            assert_eq!(scrub(&bytes_a, &a), scrub(&bytes_b, &b), "{}", rel.display());
        } else {
            assert_eq!(bytes_a, bytes_b, "{} differs between runs", rel.display());
        }
    }
}

#[test]
fn train_writes_checkpoint_log_and_manifest() {
    let fx = fixture();
    assert!(fx.ckpt.is_file());
    let log = fx.ckpt.with_file_name("train_log.csv");
    let body = std::fs::read_to_string(&log).unwrap();
    assert!(body.starts_with("epoch,lr,"));
    assert_eq!(body.lines().count(), 3, "header plus one row per epoch");
    let run: serde_json::Value = serde_json::from_slice(
        &std::fs::read(fx.ckpt.with_file_name("tiny.ckpt.run.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(run["command"], "train");
    assert!(run["seed"].is_u64());
}

#[test]
fn downscale_emits_a_full_resolution_flood_map() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("pred.pgm");
    let prob = keep.path().join("prob.wfg");
    let wfm = first_wfm(&fx.data);
    assert_ok(
        &floodsr(&[
            "downscale",
            "--model",
            fx.ckpt.to_str().unwrap(),
            "--wfm",
            wfm.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--prob",
            prob.to_str().unwrap(),
        ]),
        "downscale",
    );
    let pred = floodsr::raster::read_binary_grid(&out).unwrap();
    assert_eq!((pred.rows(), pred.cols()), (100, 100));
    let probs = floodsr::raster::read_fraction_grid::<f64>(&prob).unwrap();
    assert!(probs.cells().iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn evaluate_reports_the_documented_fields() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("report.json");
    assert_ok(
        &floodsr(&[
            "evaluate",
            "--data",
            fx.data.to_str().unwrap(),
            "--split",
            "val",
            "--model",
            fx.ckpt.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        "evaluate",
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["model"], "tiny");
    let n = report["n"].as_u64().unwrap();
    assert!(n > 0);
    let acc = report["accuracy"].as_f64().unwrap();
    let lo = report["acc_pi"][0].as_f64().unwrap();
    let hi = report["acc_pi"][1].as_f64().unwrap();
    assert!(lo <= acc && acc <= hi);
    assert!(report["mcc"].as_f64().unwrap().abs() <= 1.0);
    let auc = report["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    let counts = &report["counts"];
    let total: u64 = ["tp", "tn", "fp", "fn"]
        .iter()
        .map(|k| counts[*k].as_u64().unwrap())
        .sum();
    assert_eq!(total, n);
}

#[test]
fn evaluating_stored_truth_is_perfect() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("report.json");
    assert_ok(
        &floodsr(&[
            "evaluate",
            "--data",
            fx.data.to_str().unwrap(),
            "--split",
            "val",
            "--pred-dir",
            fx.data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        "evaluate truth dir",
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["accuracy"].as_f64().unwrap(), 1.0);
    assert_eq!(report["mcc"].as_f64().unwrap(), 1.0);
    assert!(report["auc"].is_null(), "stored maps carry no scores");
}

#[test]
fn roc_writes_curve_and_area() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("curve.csv");
    assert_ok(
        &floodsr(&[
            "roc",
            "--data",
            fx.data.to_str().unwrap(),
            "--split",
            "val",
            "--model",
            fx.ckpt.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        "roc",
    );
    let body = std::fs::read_to_string(&out).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("theta,fpr,tpr"));
    assert!(lines.clone().count() >= 101, "at least the percent lattice");
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        assert!((0.0..=1.0).contains(&cols[1]) && (0.0..=1.0).contains(&cols[2]));
    }
    let area: serde_json::Value =
        serde_json::from_slice(&std::fs::read(keep.path().join("curve.auc.json")).unwrap())
            .unwrap();
    let auc = area["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
}

#[test]
fn compare_tests_every_pair_under_one_correction() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("compare.json");
    assert_ok(
        &floodsr(&[
            "compare",
            "--data",
            fx.data.to_str().unwrap(),
            "--split",
            "val",
            "--model",
            fx.ckpt.to_str().unwrap(),
            "--method",
            "bicubic",
            "--method",
            "lanczos",
            "--out",
            out.to_str().unwrap(),
        ]),
        "compare",
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["fwer"].as_f64().unwrap(), 1e-3);
    let pairs = report["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3, "three predictors give three pairs");
    for pair in pairs {
        assert!(pair["a"].is_string() && pair["b"].is_string());
        let p = pair["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(pair["rejected"].is_boolean());
    }
}

#[test]
fn render_draws_flood_maps_and_difference_maps() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fx.data.join("manifest.json")).unwrap()).unwrap();
    let fim_rel = manifest["tiles"][0]["fim"].as_str().unwrap();
    let fim = fx.data.join(fim_rel);

    let plain = keep.path().join("plain.pgm");
    assert_ok(
        &floodsr(&["render", "--in", fim.to_str().unwrap(), "--out", plain.to_str().unwrap()]),
        "render binary",
    );
    let bytes = std::fs::read(&plain).unwrap();
    assert!(bytes.starts_with(b"P5"));

    let diff = keep.path().join("diff.pgm");
    assert_ok(
        &floodsr(&[
            "render",
            "--in",
            fim.to_str().unwrap(),
            "--out",
            diff.to_str().unwrap(),
            "--truth",
            fim.to_str().unwrap(),
        ]),
        "render diff",
    );
    assert!(std::fs::read(&diff).unwrap().starts_with(b"P5"));

    let gray = keep.path().join("gray.pgm");
    let wfm = first_wfm(&fx.data);
    assert_ok(
        &floodsr(&["render", "--in", wfm.to_str().unwrap(), "--out", gray.to_str().unwrap()]),
        "render fractions",
    );
    assert!(std::fs::read(&gray).unwrap().starts_with(b"P5"));
}

#[test]
fn usage_data_and_internal_problems_use_distinct_exit_codes() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("x.pgm");

    // Unknown flags are usage errors straight from the parser.
    let bad_flag = floodsr(&["synth", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    // A config value outside its documented range is a usage error too.
    let bad_eta = floodsr(&[
        "train",
        "--data",
        fx.data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--eta",
        "5000",
    ]);
    assert_eq!(bad_eta.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad_eta.stderr);
    assert_eq!(msg.lines().count(), 1, "one parsable line: {msg}");
    assert!(msg.starts_with("error: "));

    // Missing or malformed input data is a data error.
    let missing = floodsr(&[
        "baseline",
        "--wfm",
        "/nonexistent/tile.wfg",
        "--out",
        out.to_str().unwrap(),
        "--method",
        "bicubic",
    ]);
    assert_eq!(missing.status.code(), Some(3));

    // Fewer than two predictors cannot be compared.
    let lonely = floodsr(&[
        "compare",
        "--data",
        fx.data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--method",
        "bicubic",
    ]);
    assert_eq!(lonely.status.code(), Some(2));
}

#[test]
fn baseline_command_matches_the_library_kernel() {
    let fx = fixture();
    let keep = TempDir::new().unwrap();
    let out = keep.path().join("baseline.pgm");
    let wfm_path = first_wfm(&fx.data);
    assert_ok(
        &floodsr(&[
            "baseline",
            "--wfm",
            wfm_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--method",
            "lanczos",
        ]),
        "baseline",
    );
    let got = floodsr::raster::read_binary_grid(&out).unwrap();
    let wfm = floodsr::raster::read_fraction_grid::<f64>(&wfm_path).unwrap();
    let want = floodsr::baseline::baseline_downscale(
        &wfm,
        floodsr::wfm::ScaleFactor::DEFAULT,
        floodsr::baseline::KernelSpec::LANCZOS_DEFAULT,
        0.5,
    );
    assert_eq!(got.cells(), want.cells());
}
