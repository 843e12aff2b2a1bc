use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use setree::cv::{cross_validate_kernels, CvConfig, KernelCandidate, DEFAULT_C_GRID};
use setree::kernel::FeatureScaling;
use setree::pipeline::{build_trees, default_label_mode, initial_labels, TreeSet};
use setree::tree::TreeRecord;
use setree::{
    parse_tudataset, Dataset64, InitialLabeling, KernelMode, LabelDictionary, LabelMode,
};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: setree::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core { source, .. } if !source.is_input_error() => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> Stage<T> for setree::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}

#[derive(Parser, Debug)]
#[command(name = "setree", version, about = "Encoding-tree graph kernels and SVM classification")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize every graph into a height-k encoding tree and write the trees.
    Optimize {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        height: usize,
        /// Tree file (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the WL-ET Gram matrix at one tree height.
    Gram {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value = "linear")]
        kernel: KernelArg,
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write sparse feature vectors (`height:label:count` per graph).
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// 10-fold cross-validation over tree heights, kernels and C.
    Classify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        heights: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "linear")]
        kernel: Vec<KernelArg>,
        #[arg(long, value_delimiter = ',')]
        c_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        normalize: bool,
        /// CV report path (default: `<name>.cv.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write trees plus the per-vertex feature sidecar used for tree learning.
    Export {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar path (default: `<out>.features`).
        #[arg(long)]
        features: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Directory holding `<NAME>_A.txt` and friends.
    dataset_dir: PathBuf,
    name: String,
    #[arg(long, default_value = "auto")]
    labels: LabelArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KernelArg {
    Linear,
    RbfAuto,
    RbfScale,
}

impl From<KernelArg> for KernelMode {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => KernelMode::Linear,
            KernelArg::RbfAuto => KernelMode::RbfAuto,
            KernelArg::RbfScale => KernelMode::RbfScale,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LabelArg {
    Auto,
    Degree,
    DegreeCategory,
}

fn scaling(normalize: bool) -> FeatureScaling {
    if normalize {
        FeatureScaling::L2
    } else {
        FeatureScaling::Raw
    }
}

#[derive(Serialize, Default)]
struct Timings {
    parse: u64,
    optimize: u64,
    kernel: u64,
    train: u64,
}

#[derive(Serialize, Default)]
struct ConfigEcho {
    heights: Vec<usize>,
    kernel_modes: Vec<KernelMode>,
    c_grid: Vec<f64>,
    seed: Option<u64>,
    folds: Option<usize>,
    label_mode: Option<LabelMode>,
    scaling: Option<FeatureScaling>,
    threads: Option<usize>,
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    command: String,
    argv: Vec<String>,
    dataset_dir: PathBuf,
    dataset: String,
    graphs: usize,
    config: ConfigEcho,
    timings_ms: Timings,
    outputs: Vec<PathBuf>,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

struct Loaded {
    dataset: Dataset64,
    labels: Vec<InitialLabeling>,
    mode: LabelMode,
    parse_ms: u64,
}

fn load(data: &DataArgs) -> CliResult<Loaded> {
    let t = Instant::now();
    let dataset: Dataset64 = parse_tudataset(&data.dataset_dir, &data.name).stage("parse")?;
    let mode = match data.labels {
        LabelArg::Auto => default_label_mode(&dataset),
        LabelArg::Degree => LabelMode::Degree,
        LabelArg::DegreeCategory => LabelMode::DegreeAndCategory,
    };
    let labels = initial_labels(&dataset, mode).stage("labels")?;
    log::info!(
        "{}: {} graphs, {} classes, mean {:.1} vertices",
        dataset.name,
        dataset.len(),
        dataset.class_count(),
        dataset.mean_vertex_count()
    );
    Ok(Loaded {
        dataset,
        labels,
        mode,
        parse_ms: ms(t),
    })
}

fn check_height(k: usize) -> CliResult<()> {
    if k < 1 {
        return Err(CliError::Usage("--height must be at least 1".into()));
    }
    Ok(())
}

fn trees_jsonl(dataset: &Dataset64, trees: &TreeSet<f64>) -> CliResult<String> {
    let mut out = String::new();
    for (i, (g, t)) in dataset.graphs().iter().zip(&trees.trees).enumerate() {
        let rec = TreeRecord::new(i, g, t).stage("export")?;
        out.push_str(&serde_json::to_string(&rec).expect("tree record serializes"));
        out.push('\n');
    }
    Ok(out)
}

fn features_sidecar(dataset: &Dataset64) -> String {
    let mut out = String::new();
    for g in dataset.graphs() {
        let cats = g.categories();
        let line: Vec<String> = (0..g.vertex_count())
            .map(|v| match cats {
                Some(c) => format!("{v}:{}:{}", g.degree(v), c[v]),
                None => format!("{v}:{}", g.degree(v)),
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> CliResult<()> {
    let argv: Vec<String> = std::env::args().collect();
    let threads = cli.threads;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let manifest = |command: &str, data: &DataArgs, loaded: &Loaded, config, timings, outputs| RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        argv: argv.clone(),
        dataset_dir: data.dataset_dir.clone(),
        dataset: data.name.clone(),
        graphs: loaded.dataset.len(),
        config,
        timings_ms: timings,
        outputs,
    };
    let save_manifest = |out: &Path, m: &RunManifest| {
        write(
            &manifest_path(out),
            &(serde_json::to_string_pretty(m).expect("manifest serializes") + "\n"),
        )
    };

    match cli.command {
        Command::Optimize { data, height, out } => {
            check_height(height)?;
            let loaded = load(&data)?;
            let t = Instant::now();
            let trees = build_trees(&loaded.dataset, height).stage("optimize")?;
            let optimize_ms = ms(t);
            let (before, after) = trees.mean_entropies(&loaded.dataset).stage("optimize")?;
            write(&out, &trees_jsonl(&loaded.dataset, &trees)?)?;
            println!(
                "{}: {} trees of height {height}; mean entropy {before:.4} -> {after:.4} bits",
                data.name,
                trees.trees.len()
            );
            let m = manifest(
                "optimize",
                &data,
                &loaded,
                ConfigEcho {
                    heights: vec![height],
                    label_mode: Some(loaded.mode),
                    threads,
                    ..ConfigEcho::default()
                },
                Timings {
                    parse: loaded.parse_ms,
                    optimize: optimize_ms,
                    ..Timings::default()
                },
                vec![out.clone()],
            );
            save_manifest(&out, &m)
        }
        Command::Gram {
            data,
            height,
            kernel,
            normalize,
            out,
            features,
        } => {
            check_height(height)?;
            let loaded = load(&data)?;
            let t = Instant::now();
            let trees = build_trees(&loaded.dataset, height).stage("optimize")?;
            let optimize_ms = ms(t);
            let t = Instant::now();
            let mut dict = LabelDictionary::new();
            let fvs = setree::kernel::feature_vectors(&trees.trees, &loaded.labels, &mut dict)
                .stage("kernel")?;
            let mode = KernelMode::from(kernel);
            let gram = setree::kernel::kernel_gram::<f64>(&fvs, dict.len(), mode, scaling(normalize))
                .stage("kernel")?;
            let kernel_ms = ms(t);
            write(&out, &gram.to_text(&data.name, mode.as_str()))?;
            let mut outputs = vec![out.clone()];
            if let Some(fpath) = features {
                let body: String = fvs.iter().map(|f| f.to_sparse_string() + "\n").collect();
                write(&fpath, &body)?;
                outputs.push(fpath);
            }
            println!(
                "{}: {n}x{n} {mode} Gram matrix at height {height}, {} labels",
                data.name,
                dict.len(),
                n = gram.size()
            );
            let m = manifest(
                "gram",
                &data,
                &loaded,
                ConfigEcho {
                    heights: vec![height],
                    kernel_modes: vec![mode],
                    label_mode: Some(loaded.mode),
                    scaling: Some(scaling(normalize)),
                    threads,
                    ..ConfigEcho::default()
                },
                Timings {
                    parse: loaded.parse_ms,
                    optimize: optimize_ms,
                    kernel: kernel_ms,
                    ..Timings::default()
                },
                outputs,
            );
            save_manifest(&out, &m)
        }
        Command::Classify {
            data,
            heights,
            kernel,
            c_grid,
            seed,
            folds,
            normalize,
            out,
        } => {
            let config = CvConfig {
                heights,
                c_grid: c_grid.unwrap_or_else(|| DEFAULT_C_GRID.to_vec()),
                kernel_modes: kernel.into_iter().map(KernelMode::from).collect(),
                scaling: scaling(normalize),
                folds,
                seed,
                ..CvConfig::default()
            };
            config.validate().stage("config")?;
            let loaded = load(&data)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.cv.json", data.name)));
            let (mut optimize_ms, mut kernel_ms) = (0, 0);
            let mut candidates = Vec::new();
            for &k in &config.heights {
                let t = Instant::now();
                let trees = build_trees(&loaded.dataset, k).stage("optimize")?;
                optimize_ms += ms(t);
                let t = Instant::now();
                let mut dict = LabelDictionary::new();
                let fvs = setree::kernel::feature_vectors(&trees.trees, &loaded.labels, &mut dict)
                    .stage("kernel")?;
                for &mode in &config.kernel_modes {
                    let kernel = setree::kernel::kernel_gram::<f64>(&fvs, dict.len(), mode, config.scaling)
                        .stage("kernel")?;
                    candidates.push(KernelCandidate {
                        height: k,
                        mode,
                        kernel,
                    });
                }
                kernel_ms += ms(t);
            }
            let t = Instant::now();
            let report = cross_validate_kernels(
                &loaded.dataset.name,
                &candidates,
                &loaded.dataset.classes(),
                &config,
            )
            .stage("train")?;
            let train_ms = ms(t);
            write(&out, &report.to_json())?;
            let h = report.chosen_hyperparameters;
            println!(
                "{:<12} {:>10}   (height {}, C = {}, {})",
                report.dataset,
                report.table_cell(),
                h.height,
                h.c,
                h.kernel_mode
            );
            let m = manifest(
                "classify",
                &data,
                &loaded,
                ConfigEcho {
                    heights: config.heights.clone(),
                    kernel_modes: config.kernel_modes.clone(),
                    c_grid: config.c_grid.clone(),
                    seed: Some(seed),
                    folds: Some(folds),
                    label_mode: Some(loaded.mode),
                    scaling: Some(config.scaling),
                    threads,
                },
                Timings {
                    parse: loaded.parse_ms,
                    optimize: optimize_ms,
                    kernel: kernel_ms,
                    train: train_ms,
                },
                vec![out.clone()],
            );
            save_manifest(&out, &m)
        }
        Command::Export {
            data,
            height,
            out,
            features,
        } => {
            check_height(height)?;
            let loaded = load(&data)?;
            let t = Instant::now();
            let trees = build_trees(&loaded.dataset, height).stage("optimize")?;
            let optimize_ms = ms(t);
            let fpath = features.unwrap_or_else(|| {
                let mut s = out.as_os_str().to_owned();
                s.push(".features");
                PathBuf::from(s)
            });
            write(&out, &trees_jsonl(&loaded.dataset, &trees)?)?;
            write(&fpath, &features_sidecar(&loaded.dataset))?;
            println!(
                "{}: exported {} trees of height {height}",
                data.name,
                trees.trees.len()
            );
            let m = manifest(
                "export",
                &data,
                &loaded,
                ConfigEcho {
                    heights: vec![height],
                    label_mode: Some(loaded.mode),
                    threads,
                    ..ConfigEcho::default()
                },
                Timings {
                    parse: loaded.parse_ms,
                    optimize: optimize_ms,
                    ..Timings::default()
                },
                vec![out.clone(), fpath],
            );
            save_manifest(&out, &m)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
