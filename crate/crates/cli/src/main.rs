use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nask::eval::RangeMode;
use nask::gram::GramConfig;
use nask::svm::predict_block;
use nask::{
    check_psd, compute_gram, compute_ranges, cross_validate, export_gram, import_gram, load_tu_dataset,
    train_ovr, validate_dataset, CvConfig, Dataset, EdgeElements, Grid, KernelBlock, SimilarityParams,
    SmoParams,
};

mod manifest;
mod runfile;

use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "nask", version, about = "Neighborhood-aware star kernel for attributed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a dataset, then print its statistics.
    Info(InfoArgs),
    /// Compute a Gram matrix and write it in NASK-GRAM v1 format.
    Gram(GramArgs),
    /// Check a Gram file for positive semidefiniteness (exit 1 if not).
    Psd(PsdArgs),
    /// Repeated stratified cross-validation with nested grid selection.
    Cv(CvArgs),
    /// Train on one index set of a Gram file and predict another.
    Classify(ClassifyArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
    /// Run a command described by a TOML run file.
    Run(RunArgs),
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// Directory holding the `NAME_*.txt` files.
    #[arg(long)]
    data: PathBuf,
    /// Dataset name; defaults to the directory name.
    #[arg(long)]
    name: Option<String>,
}

impl DataArgs {
    fn name(&self) -> anyhow::Result<String> {
        dataset_name(&self.data, self.name.as_deref())
    }

    fn load(&self) -> anyhow::Result<Dataset> {
        let name = self.name()?;
        load_tu_dataset(&self.data, &name).with_context(|| format!("loading {name} from {}", self.data.display()))
    }
}

fn dataset_name(dir: &Path, name: Option<&str>) -> anyhow::Result<String> {
    match name {
        Some(n) => Ok(n.to_string()),
        None => dir
            .file_name()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .context("cannot infer dataset name; pass --name"),
    }
}

#[derive(Args, Debug, Serialize)]
struct ThreadArgs {
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "NASK_THREADS")]
    threads: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct InfoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Serialize)]
struct GramArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = nask::expansion::DEFAULT_DEPTH)]
    depth: usize,
    /// Cosine-normalize the result.
    #[arg(long)]
    normalize: bool,
    /// Skip star pairs whose center similarity is below this value.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Whether edges are star elements: auto, on or off.
    #[arg(long, default_value_t = EdgeElements::Auto)]
    edge_elements: EdgeElements,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug, Serialize)]
struct PsdArgs {
    #[arg(long)]
    gram: PathBuf,
    #[arg(long, default_value_t = nask::gram::DEFAULT_PSD_TOL)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct CvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// e.g. `gamma=0.1,1,10;depth=1,2,3,4;normalize=on,off;C=0.001,1,1000`.
    /// Axes left out keep their defaults.
    #[arg(long, alias = "grid-spec", default_value = "")]
    grid: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    inner_folds: usize,
    /// Compute attribute ranges on each outer training portion.
    #[arg(long)]
    per_fold_ranges: bool,
    #[arg(long, default_value_t = EdgeElements::Auto)]
    edge_elements: EdgeElements,
    /// SMO stopping tolerance on the maximal KKT violation.
    #[arg(long, default_value_t = SmoParams::default().tol)]
    tol: f64,
    /// JSON report path; a text summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    #[arg(long)]
    gram: PathBuf,
    /// Dataset directory providing the class labels.
    #[arg(long)]
    labels_from: PathBuf,
    #[arg(long)]
    name: Option<String>,
    /// File of 0-based training indices (whitespace or comma separated).
    #[arg(long)]
    train_idx: PathBuf,
    #[arg(long)]
    test_idx: PathBuf,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    /// SMO stopping tolerance on the maximal KKT violation.
    #[arg(long, default_value_t = SmoParams::default().tol)]
    tol: f64,
    /// Write predictions as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug, Serialize)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write the primary artifact here instead of the recorded path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RunArgs {
    /// TOML file with `command = "..."` and an `[args]` table of flags.
    #[arg(long)]
    file: PathBuf,
}

/// A command's outcome: 0 for success, 1 for a negative verdict.
type Outcome = anyhow::Result<u8>;

fn thread_pool(threads: &ThreadArgs) -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn cmd_info(args: &InfoArgs) -> Outcome {
    let ds = compute_ranges(args.data.load()?);
    let report = validate_dataset(&ds)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
        println!("digest: {}", ds.digest);
    }
    Ok(0)
}

fn cmd_gram(args: &GramArgs, argv: &[String]) -> Outcome {
    let start = Instant::now();
    let ds = compute_ranges(args.data.load()?);
    let cfg = GramConfig {
        params: SimilarityParams::new(args.gamma)?,
        depth: args.depth,
        tau: args.tau,
        edge_elements: args.edge_elements,
        normalize: args.normalize,
        ..GramConfig::default()
    };
    let gram = thread_pool(&args.threads)?.install(|| compute_gram(&ds, &cfg))?;
    export_gram(&gram, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Manifest::new("gram", argv, args, &ds.digest, start, vec![args.out.clone()]).write_next_to(&args.out)?;
    println!(
        "wrote {}x{} Gram to {} in {:.2}s",
        gram.n(),
        gram.n(),
        args.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn cmd_psd(args: &PsdArgs) -> Outcome {
    let gram = import_gram(&args.gram).with_context(|| format!("reading {}", args.gram.display()))?;
    let verdict = check_psd(&gram, args.tol)?;
    println!("min eigenvalue: {:.6e}", verdict.min_eigenvalue);
    println!("max eigenvalue: {:.6e}", verdict.max_eigenvalue);
    if verdict.is_psd() {
        println!("verdict: psd (tol {:e})", args.tol);
        Ok(0)
    } else {
        println!("verdict: NOT psd (tol {:e})", args.tol);
        Ok(1)
    }
}

fn cmd_cv(args: &CvArgs, argv: &[String]) -> Outcome {
    let start = Instant::now();
    let ds = args.data.load()?;
    let cfg = CvConfig {
        folds: args.folds,
        repeats: args.repeats,
        seed: args.seed,
        inner_folds: args.inner_folds,
        grid: args.grid.parse::<Grid>()?,
        edge_elements: args.edge_elements,
        range_mode: if args.per_fold_ranges {
            RangeMode::PerFold
        } else {
            RangeMode::Transductive
        },
        smo: SmoParams {
            tol: args.tol,
            ..SmoParams::default()
        },
    };
    let report = thread_pool(&args.threads)?.install(|| cross_validate(&ds, &cfg))?;
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &args.out {
        let text_path = out.with_extension("txt");
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
        std::fs::write(&text_path, &text)?;
        Manifest::new("cv", argv, args, &ds.digest, start, vec![out.clone(), text_path]).write_next_to(out)?;
    }
    Ok(0)
}

fn read_indices(path: &Path) -> anyhow::Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().with_context(|| format!("bad index `{t}` in {}", path.display())))
        .collect()
}

#[derive(Serialize)]
struct Prediction {
    index: usize,
    predicted: i64,
    actual: i64,
}

#[derive(Serialize)]
struct ClassifyReport {
    accuracy: f64,
    majority_baseline: f64,
    train_size: usize,
    test_size: usize,
    c: f64,
    predictions: Vec<Prediction>,
}

fn cmd_classify(args: &ClassifyArgs, argv: &[String]) -> Outcome {
    let start = Instant::now();
    let gram = import_gram(&args.gram).with_context(|| format!("reading {}", args.gram.display()))?;
    let name = dataset_name(&args.labels_from, args.name.as_deref())?;
    let ds = load_tu_dataset(&args.labels_from, &name)?;
    if gram.meta.dataset_digest != ds.digest {
        bail!(nask::Error::DigestMismatch {
            expected: ds.digest.clone(),
            found: gram.meta.dataset_digest.clone(),
        });
    }
    let train = read_indices(&args.train_idx)?;
    let test = read_indices(&args.test_idx)?;
    let train_set: BTreeSet<usize> = train.iter().copied().collect();
    if let Some(&i) = test.iter().find(|i| train_set.contains(i)) {
        bail!(nask::Error::IndexOverlap(i));
    }
    if let Some(&i) = train.iter().chain(&test).find(|&&i| i >= gram.n()) {
        bail!("index {i} out of range for a {}-graph Gram", gram.n());
    }
    if train.is_empty() || test.is_empty() {
        bail!("training and test index sets must be non-empty");
    }
    let train_labels: Vec<usize> = train.iter().map(|&i| ds.labels[i]).collect();
    let classes: Vec<usize> = train_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let predicted = thread_pool(&args.threads)?.install(|| -> anyhow::Result<Vec<usize>> {
        let mut model = train_ovr(
            &KernelBlock::from_gram(&gram, &train, &train),
            &train_labels,
            &classes,
            &SmoParams {
                tol: args.tol,
                ..SmoParams::with_c(args.c)
            },
        )?;
        model.gram_digest = gram.digest();
        Ok(predict_block(&model, &KernelBlock::from_gram(&gram, &test, &train))?)
    })?;

    let mut counts = vec![0usize; ds.num_classes()];
    for &l in &train_labels {
        counts[l] += 1;
    }
    let majority = (0..counts.len()).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    let predictions: Vec<Prediction> = test
        .iter()
        .zip(&predicted)
        .map(|(&i, &p)| Prediction {
            index: i,
            predicted: ds.class_values[p],
            actual: ds.class_values[ds.labels[i]],
        })
        .collect();
    let hits = test.iter().zip(&predicted).filter(|(&i, &p)| ds.labels[i] == p).count();
    let baseline = test.iter().filter(|&&i| ds.labels[i] == majority).count();
    let report = ClassifyReport {
        accuracy: hits as f64 / test.len() as f64,
        majority_baseline: baseline as f64 / test.len() as f64,
        train_size: train.len(),
        test_size: test.len(),
        c: args.c,
        predictions,
    };
    for p in &report.predictions {
        println!("{}\t{}\t{}", p.index, p.predicted, p.actual);
    }
    println!("accuracy: {:.4} ({hits}/{})", report.accuracy, test.len());
    println!("majority baseline: {:.4}", report.majority_baseline);
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
        Manifest::new("classify", argv, args, &ds.digest, start, vec![out.clone()]).write_next_to(out)?;
    }
    Ok(0)
}

fn cmd_replay(args: &ReplayArgs) -> Outcome {
    let manifest = Manifest::read(&args.manifest)?;
    let mut argv = manifest.argv.clone();
    if let Some(out) = &args.out {
        manifest::replace_flag(&mut argv, "--out", &out.to_string_lossy())?;
    }
    if matches!(argv.first().map(String::as_str), Some("replay" | "run")) {
        bail!("manifest records `{}`, which cannot be replayed", argv[0]);
    }
    dispatch(&argv)
}

fn cmd_run(args: &RunArgs) -> Outcome {
    let argv = runfile::argv_from_file(&args.file)?;
    if matches!(argv.first().map(String::as_str), Some("replay" | "run")) {
        bail!("run files cannot invoke `{}`", argv[0]);
    }
    dispatch(&argv)
}

/// Parses and runs `argv` (without the program name).
fn dispatch(argv: &[String]) -> Outcome {
    let cli = Cli::try_parse_from(std::iter::once("nask".to_string()).chain(argv.iter().cloned()))?;
    match &cli.command {
        Command::Info(a) => cmd_info(a),
        Command::Gram(a) => cmd_gram(a, argv),
        Command::Psd(a) => cmd_psd(a),
        Command::Cv(a) => cmd_cv(a, argv),
        Command::Classify(a) => cmd_classify(a, argv),
        Command::Replay(a) => cmd_replay(a),
        Command::Run(a) => cmd_run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&argv) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                // Help and version go to stdout with exit 0.
                let _ = clap_err.print();
                return ExitCode::from(if clap_err.use_stderr() { 2 } else { 0 });
            }
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
