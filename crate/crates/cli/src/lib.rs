//! Command runners behind the `vesselgrow` binary.
//!
//! Each command is a plain function over a config struct so that tests can
//! drive the exact code path the binary uses. Every run writes a `run.json`
//! manifest echoing its effective parameters; data outputs are written to a
//! temporary sibling and renamed into place, and the manifest is written
//! last, so a complete manifest marks a complete run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use vesselgrow_core::element::{segment, ElementParams, SegmentStats};
use vesselgrow_core::eval::{
    roc_points, run_leave_one_image_out, LoioOptions, MetricsReport,
    ZERO_CONNECTIVITY_AUGMENTATION,
};
use vesselgrow_core::featureset::{
    build_training_rows, read_csv, write_csv, LabeledDataset, RowSampling, FEATURE_NAMES,
    GREY_FEATURE_COUNT,
};
use vesselgrow_core::forest::{train_with_report, ForestModel, ForestParams};
use vesselgrow_core::imaging::{load_dataset, load_gray, save_gray_u8, save_mask, save_proba_png};
use vesselgrow_core::featureset::extract_stack;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failures sorted by exit code: 1 usage, 2 data, 3 internal.
#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Data(_) => 2,
            RunError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Usage(m) | RunError::Data(m) | RunError::Internal(m) => m,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for RunError {}

impl From<vesselgrow_core::Error> for RunError {
    fn from(e: vesselgrow_core::Error) -> Self {
        RunError::Data(e.to_string())
    }
}

pub type RunResult<T> = Result<T, RunError>;

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Data(format!("i/o error on {}: {e}", path.display()))
}

/// Write through a temporary sibling and rename into place.
fn atomic_write<T>(
    path: &Path,
    write: impl FnOnce(&Path) -> vesselgrow_core::Result<T>,
) -> RunResult<T> {
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| RunError::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    let value = write(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(value)
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    artifact_version: &'a str,
    timestamp_unix: u64,
    parameters: &'a T,
}

fn write_manifest<T: Serialize>(path: &Path, command: &str, parameters: &T) -> RunResult<()> {
    let manifest = Manifest {
        command,
        artifact_version: ARTIFACT_VERSION,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        parameters,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError::Internal(format!("manifest serialization: {e}")))?;
    fs::write(path, json + "\n").map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct ForestFlags {
    pub n_trees: usize,
    pub mtry: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestFlags {
    fn default() -> Self {
        let p = ForestParams::default();
        ForestFlags {
            n_trees: p.n_trees,
            mtry: p.mtry,
            max_depth: 0,
            min_leaf: p.min_leaf,
            seed: p.seed,
        }
    }
}

impl ForestFlags {
    pub fn to_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            mtry: self.mtry,
            max_depth: (self.max_depth > 0).then_some(self.max_depth),
            min_leaf: self.min_leaf,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ElementFlags {
    pub seed_threshold: f64,
    pub grow_threshold: f64,
    pub radial_radius: usize,
}

impl Default for ElementFlags {
    fn default() -> Self {
        let p = ElementParams::default();
        ElementFlags {
            seed_threshold: p.seed_threshold,
            grow_threshold: p.grow_threshold,
            radial_radius: p.radial_radius,
        }
    }
}

impl ElementFlags {
    pub fn to_params(&self) -> ElementParams {
        ElementParams {
            seed_threshold: self.seed_threshold,
            grow_threshold: self.grow_threshold,
            radial_radius: self.radial_radius,
        }
    }
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ExtractConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub subsample: f64,
    pub seed: u64,
    pub balanced: bool,
}

/// Write one feature CSV per dataset image.
pub fn run_extract(cfg: &ExtractConfig) -> RunResult<()> {
    let entries = load_dataset(&cfg.dataset_dir)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    if entries.is_empty() {
        eprintln!(
            "warning: no image pairs found in {}",
            cfg.dataset_dir.display()
        );
    }

    let sampling = RowSampling {
        rate: cfg.subsample,
        seed: cfg.seed,
        balanced: cfg.balanced,
    };
    for entry in &entries {
        let rows = build_training_rows(entry, &sampling)?;
        let out = cfg.out_dir.join(format!("{}.csv", entry.image_id));
        atomic_write(&out, |tmp| write_csv(&rows, tmp))?;
        println!("{}: {} rows -> {}", entry.image_id, rows.len(), out.display());
    }
    write_manifest(&cfg.out_dir.join("run.json"), "extract", cfg)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub enum TrainInput {
    /// Pre-extracted feature tables, concatenated in the given order.
    Csv(Vec<PathBuf>),
    /// Extract in-process from a dataset directory, optionally holding one
    /// image out.
    Dataset {
        dir: PathBuf,
        hold_out: Option<String>,
        subsample: f64,
        balanced: bool,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub input: TrainInput,
    pub model_out: PathBuf,
    pub forest: ForestFlags,
}

pub fn run_train(cfg: &TrainConfig) -> RunResult<()> {
    let dataset = match &cfg.input {
        TrainInput::Csv(paths) => {
            if paths.is_empty() {
                return Err(RunError::Usage("no training CSVs given".into()));
            }
            let mut all = LabeledDataset::new();
            for path in paths {
                let part = read_csv(path)?;
                all.extend_from(&part);
            }
            all
        }
        TrainInput::Dataset {
            dir,
            hold_out,
            subsample,
            balanced,
        } => {
            let entries = load_dataset(dir)?;
            let sampling = RowSampling {
                rate: *subsample,
                seed: cfg.forest.seed,
                balanced: *balanced,
            };
            let mut all = LabeledDataset::new();
            for entry in &entries {
                if hold_out.as_deref() == Some(entry.image_id.as_str()) {
                    continue;
                }
                let rows = build_training_rows(entry, &sampling)?;
                all.extend_from(&rows);
            }
            all
        }
    };

    // Mix in zero-connectivity rows so the model can drive the seeding
    // phase; see LabeledDataset::with_zero_connectivity_augmentation.
    let dataset =
        dataset.with_zero_connectivity_augmentation(ZERO_CONNECTIVITY_AUGMENTATION, cfg.forest.seed);

    let (model, report) = train_with_report(&dataset, &cfg.forest.to_params())?;
    if report.single_class {
        eprintln!("warning: training data carries a single class");
    }
    if report.forced_impure_leaves > 0 {
        eprintln!(
            "note: {} leaves closed impure with no improving split",
            report.forced_impure_leaves
        );
    }
    match report.oob_error {
        Some(err) => println!(
            "trained {} trees on {} rows; out-of-bag error {:.4}",
            model.trees().len(),
            dataset.len(),
            err
        ),
        None => println!(
            "trained {} trees on {} rows; out-of-bag error unavailable",
            model.trees().len(),
            dataset.len()
        ),
    }

    atomic_write(&cfg.model_out, |tmp| model.save(tmp))?;
    write_manifest(
        &manifest_path_for(&cfg.model_out),
        "train",
        cfg,
    )
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("output");
    output.with_file_name(format!("{name}.run.json"))
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SegmentConfig {
    pub image: PathBuf,
    pub model: PathBuf,
    pub mask_out: PathBuf,
    pub proba_out: Option<PathBuf>,
    pub element: ElementFlags,
}

pub fn run_segment(cfg: &SegmentConfig) -> RunResult<()> {
    let image = load_gray(&cfg.image)?;
    let model = ForestModel::load(&cfg.model)?;
    if model.n_features() != FEATURE_NAMES.len() {
        eprintln!(
            "warning: model was trained on {} features",
            model.n_features()
        );
    }

    let out = segment(&image, &model, &cfg.element.to_params())?;
    atomic_write(&cfg.mask_out, |tmp| save_mask(&out.mask, tmp))?;
    if let Some(proba_out) = &cfg.proba_out {
        atomic_write(proba_out, |tmp| save_proba_png(&out.proba, tmp))?;
    }
    println!(
        "{}: {} vessel pixels of {} ({} seeds, {} classifier calls)",
        cfg.mask_out.display(),
        out.mask.count_true(),
        image.width() * image.height(),
        out.stats.seeds,
        out.stats.classifier_calls
    );
    write_manifest(&manifest_path_for(&cfg.mask_out), "segment", cfg)
}

// ---------------------------------------------------------------------------
// loio
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LoioConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub forest: ForestFlags,
    pub element: ElementFlags,
    pub subsample: f64,
    pub balanced: bool,
    pub ablate_connectivity: bool,
}

/// Everything a cross-validation run leaves behind in memory.
pub struct LoioOutcome {
    pub report: MetricsReport,
    pub fold_stats: Vec<(String, SegmentStats)>,
}

/// Leave-one-image-out over a dataset directory. Writes per-fold masks,
/// probability planes, and models, the metrics report in machine and human
/// form, the pooled ROC curve, and the manifest.
pub fn run_loio(cfg: &LoioConfig) -> RunResult<LoioOutcome> {
    let entries = load_dataset(&cfg.dataset_dir)?;
    if entries.len() < 2 {
        return Err(RunError::Data(format!(
            "leave-one-image-out needs at least 2 images, found {} in {}",
            entries.len(),
            cfg.dataset_dir.display()
        )));
    }
    let folds_dir = cfg.out_dir.join("folds");
    fs::create_dir_all(&folds_dir).map_err(|e| io_err(&folds_dir, e))?;

    let options = LoioOptions {
        subsample: cfg.subsample,
        balanced: cfg.balanced,
        ablate_connectivity: cfg.ablate_connectivity,
        ..LoioOptions::default()
    };

    let mut pooled_scores: Vec<f64> = Vec::new();
    let mut pooled_labels: Vec<bool> = Vec::new();
    let truths: Vec<&vesselgrow_core::BinaryMask> =
        entries.iter().map(|e| &e.truth).collect();

    let (report, fold_stats) = run_leave_one_image_out(
        &entries,
        &cfg.forest.to_params(),
        &cfg.element.to_params(),
        &options,
        |fold| {
            let dir = folds_dir.join(fold.image_id);
            fs::create_dir_all(&dir).map_err(|e| vesselgrow_core::Error::io(&dir, e))?;
            let write = |name: &str, f: &dyn Fn(&Path) -> vesselgrow_core::Result<()>| {
                let path = dir.join(name);
                let tmp = dir.join(format!("{name}.tmp"));
                f(&tmp)?;
                fs::rename(&tmp, &path).map_err(|e| vesselgrow_core::Error::io(&path, e))
            };
            write("mask.png", &|p| save_mask(&fold.segmentation.mask, p))?;
            write("proba.png", &|p| save_proba_png(&fold.segmentation.proba, p))?;
            write("model.vgf", &|p| fold.model.save(p))?;

            pooled_scores.extend_from_slice(fold.segmentation.proba.data());
            pooled_labels.extend_from_slice(truths[fold.fold_index].data());
            println!(
                "fold {} ({}): acc {} tpr {} tnr {} auc {}",
                fold.fold_index + 1,
                fold.image_id,
                fmt_opt(fold.metrics.accuracy),
                fmt_opt(fold.metrics.tpr),
                fmt_opt(fold.metrics.tnr),
                fmt_opt(fold.metrics.auc),
            );
            Ok(())
        },
    )?;

    let metrics_json = serde_json::to_string_pretty(&report)
        .map_err(|e| RunError::Internal(format!("report serialization: {e}")))?;
    atomic_write(&cfg.out_dir.join("metrics.json"), |tmp| {
        fs::write(tmp, metrics_json.as_bytes() )
            .map_err(|e| vesselgrow_core::Error::io(tmp, e))
    })?;
    atomic_write(&cfg.out_dir.join("metrics.txt"), |tmp| {
        fs::write(tmp, report.render_table().as_bytes())
            .map_err(|e| vesselgrow_core::Error::io(tmp, e))
    })?;

    if let Ok(points) = roc_points(&pooled_scores, &pooled_labels) {
        let mut csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in points {
            csv.push_str(&format!("{fpr},{tpr}\n"));
        }
        atomic_write(&cfg.out_dir.join("roc.csv"), |tmp| {
            fs::write(tmp, csv.as_bytes()).map_err(|e| vesselgrow_core::Error::io(tmp, e))
        })?;
    } else {
        eprintln!("warning: pooled ROC undefined (single class), roc.csv skipped");
    }

    print!("{}", report.render_table());
    println!("{}", report.summary_line());
    if cfg.ablate_connectivity {
        println!("note: connectivity features were ablated for this run");
    }

    write_manifest(&cfg.out_dir.join("run.json"), "loio", cfg)?;
    Ok(LoioOutcome { report, fold_stats })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

// ---------------------------------------------------------------------------
// dump-plane
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DumpPlaneConfig {
    pub image: PathBuf,
    pub plane: String,
    pub out: PathBuf,
}

/// Render one grey-level feature plane min-max normalized to 8-bit PNG.
pub fn run_dump_plane(cfg: &DumpPlaneConfig) -> RunResult<()> {
    let valid = &FEATURE_NAMES[..GREY_FEATURE_COUNT];
    if !valid.contains(&cfg.plane.as_str()) {
        return Err(RunError::Usage(format!(
            "unknown plane {:?}; valid names: {}",
            cfg.plane,
            valid.join(", ")
        )));
    }
    let image = load_gray(&cfg.image)?;
    let stack = extract_stack(&image)?;
    let plane = stack
        .plane_by_name(&cfg.plane)
        .expect("name validated above");
    let pixels = plane.to_normalized_u8();
    atomic_write(&cfg.out, |tmp| {
        save_gray_u8(&pixels, plane.width(), plane.height(), tmp)
    })?;
    println!("{} -> {}", cfg.plane, cfg.out.display());
    write_manifest(&manifest_path_for(&cfg.out), "dump-plane", cfg)
}

/// Apply the `VESSELGROW_THREADS` cap to the global thread pool. Call once
/// at startup.
pub fn configure_threads() -> RunResult<()> {
    match std::env::var("VESSELGROW_THREADS") {
        Ok(raw) => {
            let threads: usize = raw.parse().map_err(|_| {
                RunError::Usage(format!(
                    "VESSELGROW_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if threads == 0 {
                return Err(RunError::Usage(
                    "VESSELGROW_THREADS must be a positive integer".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| RunError::Internal(format!("thread pool: {e}")))
        }
        Err(_) => Ok(()),
    }
}
