use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vesselgrow_cli::{
    configure_threads, run_dump_plane, run_extract, run_loio, run_segment, run_train,
    DumpPlaneConfig, ElementFlags, ExtractConfig, ForestFlags, LoioConfig, RunError,
    SegmentConfig, TrainConfig, TrainInput,
};

/// Vessel segmentation for X-ray angiograms: pixel classification with a
/// random forest driven by region growing.
#[derive(Parser)]
#[command(name = "vesselgrow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ForestArgs {
    /// Trees in the ensemble.
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    /// Features drawn per split.
    #[arg(long, default_value_t = 5)]
    mtry: usize,
    /// Depth limit; 0 grows to purity.
    #[arg(long, default_value_t = 0)]
    max_depth: usize,
    /// Minimum rows per leaf.
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Seed for every random draw of the run.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl ForestArgs {
    fn to_flags(&self) -> ForestFlags {
        ForestFlags {
            n_trees: self.n_trees,
            mtry: self.mtry,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct ElementArgs {
    /// Seeding-phase vessel threshold.
    #[arg(long, default_value_t = 0.9)]
    seed_threshold: f64,
    /// Growth-phase vessel threshold.
    #[arg(long, default_value_t = 0.5)]
    grow_threshold: f64,
    /// Radius of the radial connectivity disc.
    #[arg(long, default_value_t = 7)]
    radial_radius: usize,
}

impl ElementArgs {
    fn to_flags(&self) -> ElementFlags {
        ElementFlags {
            seed_threshold: self.seed_threshold,
            grow_threshold: self.grow_threshold,
            radial_radius: self.radial_radius,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-pixel feature tables from a dataset directory.
    Extract {
        /// Directory of `<id>.png` + `<id>_gt.png` pairs.
        #[arg(long)]
        dataset_dir: PathBuf,
        /// Output directory for one CSV per image.
        #[arg(long)]
        out_dir: PathBuf,
        /// Pixel retention rate in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        subsample: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Equalize vessel/background row counts.
        #[arg(long)]
        balanced: bool,
    },
    /// Train a random forest from CSVs or straight from a dataset.
    Train {
        /// Pre-extracted feature CSVs (repeatable).
        #[arg(long = "from-csv", num_args = 1.., conflicts_with = "dataset_dir")]
        from_csv: Vec<PathBuf>,
        /// Extract features from this dataset directory instead.
        #[arg(long, required_unless_present = "from_csv")]
        dataset_dir: Option<PathBuf>,
        /// Image id to exclude (with --dataset-dir).
        #[arg(long)]
        hold_out: Option<String>,
        /// Pixel retention rate (with --dataset-dir).
        #[arg(long, default_value_t = 0.1)]
        subsample: f64,
        /// Equalize vessel/background row counts (with --dataset-dir).
        #[arg(long)]
        balanced: bool,
        /// Output model path.
        #[arg(long)]
        model_out: PathBuf,
        #[command(flatten)]
        forest: ForestArgs,
    },
    /// Segment one image with a trained model.
    Segment {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output 0/255 mask PNG.
        #[arg(long)]
        mask_out: PathBuf,
        /// Optional 16-bit probability PNG.
        #[arg(long)]
        proba_out: Option<PathBuf>,
        #[command(flatten)]
        element: ElementArgs,
    },
    /// Leave-one-image-out evaluation over a dataset directory.
    Loio {
        #[arg(long)]
        dataset_dir: PathBuf,
        /// Output directory for fold artifacts and reports.
        #[arg(long)]
        out_dir: PathBuf,
        /// Training-pixel retention rate per image.
        #[arg(long, default_value_t = 0.1)]
        subsample: f64,
        /// Equalize vessel/background row counts.
        #[arg(long)]
        balanced: bool,
        /// Zero the connectivity features at training and inference.
        #[arg(long)]
        ablate_connectivity: bool,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        element: ElementArgs,
    },
    /// Render one feature plane as a normalized 8-bit PNG.
    DumpPlane {
        #[arg(long)]
        image: PathBuf,
        /// Feature plane name, e.g. hess_tr or kuw_11.
        #[arg(long)]
        plane: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Extract {
            dataset_dir,
            out_dir,
            subsample,
            seed,
            balanced,
        } => run_extract(&ExtractConfig {
            dataset_dir,
            out_dir,
            subsample,
            seed,
            balanced,
        }),
        Command::Train {
            from_csv,
            dataset_dir,
            hold_out,
            subsample,
            balanced,
            model_out,
            forest,
        } => {
            let input = match dataset_dir {
                Some(dir) => TrainInput::Dataset {
                    dir,
                    hold_out,
                    subsample,
                    balanced,
                },
                None => TrainInput::Csv(from_csv),
            };
            run_train(&TrainConfig {
                input,
                model_out,
                forest: forest.to_flags(),
            })
        }
        Command::Segment {
            image,
            model,
            mask_out,
            proba_out,
            element,
        } => run_segment(&SegmentConfig {
            image,
            model,
            mask_out,
            proba_out,
            element: element.to_flags(),
        }),
        Command::Loio {
            dataset_dir,
            out_dir,
            subsample,
            balanced,
            ablate_connectivity,
            forest,
            element,
        } => run_loio(&LoioConfig {
            dataset_dir,
            out_dir,
            forest: forest.to_flags(),
            element: element.to_flags(),
            subsample,
            balanced,
            ablate_connectivity,
        })
        .map(|_| ()),
        Command::DumpPlane { image, plane, out } => {
            run_dump_plane(&DumpPlaneConfig { image, plane, out })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successful exits.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
