//! End-to-end checks of the command runners and the binary's exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use vesselgrow_cli::{
    run_dump_plane, run_extract, run_loio, run_segment, run_train, DumpPlaneConfig, ElementFlags,
    ExtractConfig, ForestFlags, LoioConfig, RunError, SegmentConfig, TrainConfig, TrainInput,
};
use vesselgrow_core::imaging::load_gray;
use vesselgrow_core::phantom::{generate_corpus, write_corpus, PhantomParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vesselgrow"))
}

fn write_tiny_dataset(dir: &Path, count: usize) {
    let params = PhantomParams {
        width: 48,
        height: 48,
        trunks: 2,
        ..PhantomParams::default()
    };
    let corpus = generate_corpus(&params, count, 31);
    write_corpus(&corpus, dir).unwrap();
}

fn tiny_forest() -> ForestFlags {
    ForestFlags {
        n_trees: 5,
        ..ForestFlags::default()
    }
}

#[test]
fn extract_writes_one_csv_per_image() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 2);

    let out = tmp.path().join("features");
    run_extract(&ExtractConfig {
        dataset_dir: data,
        out_dir: out.clone(),
        subsample: 1.0,
        seed: 42,
        balanced: false,
    })
    .unwrap();

    for id in ["phantom1", "phantom2"] {
        let text = std::fs::read_to_string(out.join(format!("{id}.csv"))).unwrap();
        // Header plus one row per pixel.
        assert_eq!(text.lines().count(), 1 + 48 * 48, "{id}");
    }
    assert!(out.join("run.json").exists());
}

#[test]
fn extract_empty_dir_succeeds_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("empty");
    std::fs::create_dir(&data).unwrap();
    let out = tmp.path().join("features");

    let status = bin()
        .args(["extract", "--dataset-dir"])
        .arg(&data)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("warning"));
    assert_eq!(
        std::fs::read_dir(&out)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
            .count(),
        0
    );
}

#[test]
fn extract_bad_path_exits_2_and_names_it() {
    let out = bin()
        .args([
            "extract",
            "--dataset-dir",
            "/definitely/not/here",
            "--out-dir",
            "/tmp/unused-out",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/definitely/not/here"));
}

#[test]
fn train_is_deterministic_and_feeds_segment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 2);

    let train_cfg = |out: PathBuf| TrainConfig {
        input: TrainInput::Dataset {
            dir: data.clone(),
            hold_out: Some("phantom2".into()),
            subsample: 1.0,
            balanced: false,
        },
        model_out: out,
        forest: tiny_forest(),
    };
    let model_a = tmp.path().join("a.vgf");
    let model_b = tmp.path().join("b.vgf");
    run_train(&train_cfg(model_a.clone())).unwrap();
    run_train(&train_cfg(model_b.clone())).unwrap();
    assert_eq!(
        std::fs::read(&model_a).unwrap(),
        std::fs::read(&model_b).unwrap()
    );
    assert!(tmp.path().join("a.vgf.run.json").exists());

    let mask_out = tmp.path().join("mask.png");
    let proba_out = tmp.path().join("proba.png");
    run_segment(&SegmentConfig {
        image: data.join("phantom2.png"),
        model: model_a,
        mask_out: mask_out.clone(),
        proba_out: Some(proba_out.clone()),
        element: ElementFlags::default(),
    })
    .unwrap();
    let mask = load_gray(&mask_out).unwrap();
    assert_eq!((mask.width(), mask.height()), (48, 48));
    assert!(mask.data().iter().all(|&v| v == 0.0 || v == 255.0));
    let proba = load_gray(&proba_out).unwrap();
    assert_eq!((proba.width(), proba.height()), (48, 48));
}

#[test]
fn train_from_extracted_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 2);

    let features = tmp.path().join("features");
    run_extract(&ExtractConfig {
        dataset_dir: data,
        out_dir: features.clone(),
        subsample: 1.0,
        seed: 42,
        balanced: false,
    })
    .unwrap();

    let model_out = tmp.path().join("model.vgf");
    run_train(&TrainConfig {
        input: TrainInput::Csv(vec![features.join("phantom1.csv")]),
        model_out: model_out.clone(),
        forest: tiny_forest(),
    })
    .unwrap();
    assert!(model_out.exists());
}

#[test]
fn segment_rejects_wrong_feature_count() {
    // A 29-feature model must fail with dimension wording.
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 1);

    let mut ds = vesselgrow_core::featureset::LabeledDataset::new();
    ds.feature_names.pop();
    for i in 0..40u32 {
        let mut features = [0.0; 30];
        features[0] = i as f64;
        ds.rows.push(vesselgrow_core::featureset::LabeledRow {
            features,
            label: i % 2 == 0,
            image_id: "x".into(),
            x: i,
            y: 0,
        });
    }
    // Rebuild rows with 29 names; train accepts the narrower table.
    let model = vesselgrow_core::forest::train(
        &ds,
        &vesselgrow_core::forest::ForestParams {
            n_trees: 3,
            mtry: 5,
            ..Default::default()
        },
    )
    .unwrap();
    let model_path = tmp.path().join("narrow.vgf");
    model.save(&model_path).unwrap();

    let err = run_segment(&SegmentConfig {
        image: data.join("phantom1.png"),
        model: model_path,
        mask_out: tmp.path().join("mask.png"),
        proba_out: None,
        element: ElementFlags::default(),
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.message().contains("dimension"), "{}", err.message());
}

#[test]
fn loio_writes_reports_and_fold_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 3);

    let out_dir = tmp.path().join("run");
    let outcome = run_loio(&LoioConfig {
        dataset_dir: data,
        out_dir: out_dir.clone(),
        forest: tiny_forest(),
        element: ElementFlags::default(),
        subsample: 0.5,
        balanced: false,
        ablate_connectivity: false,
    })
    .unwrap();

    assert_eq!(outcome.report.per_image.len(), 3);
    assert_eq!(outcome.fold_stats.len(), 3);
    for id in ["phantom1", "phantom2", "phantom3"] {
        for file in ["mask.png", "proba.png", "model.vgf"] {
            assert!(out_dir.join("folds").join(id).join(file).exists(), "{id}/{file}");
        }
    }
    for file in ["metrics.json", "metrics.txt", "roc.csv", "run.json"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
    let json = std::fs::read_to_string(out_dir.join("metrics.json")).unwrap();
    assert!(json.contains("pooled"));
}

#[test]
fn dump_plane_validates_name() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 1);

    let err = run_dump_plane(&DumpPlaneConfig {
        image: data.join("phantom1.png"),
        plane: "frangi".into(),
        out: tmp.path().join("x.png"),
    })
    .unwrap_err();
    assert!(matches!(err, RunError::Usage(_)));
    assert_eq!(err.exit_code(), 1);
    assert!(err.message().contains("hess_det"));

    let out = tmp.path().join("kuw.png");
    run_dump_plane(&DumpPlaneConfig {
        image: data.join("phantom1.png"),
        plane: "kuw_11".into(),
        out: out.clone(),
    })
    .unwrap();
    let png = load_gray(&out).unwrap();
    assert_eq!((png.width(), png.height()), (48, 48));
}

#[test]
fn unknown_plane_via_binary_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_tiny_dataset(&data, 1);

    let out = bin()
        .args(["dump-plane", "--image"])
        .arg(data.join("phantom1.png"))
        .args(["--plane", "frangi", "--out"])
        .arg(tmp.path().join("x.png"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("valid names"));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["extract", "train", "segment", "loio", "dump-plane"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
