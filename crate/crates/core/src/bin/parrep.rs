//! Command-line front end: synthesize datasets, fit embeddings, project
//! unseen data, evaluate, run the false-negative analysis, plot, and
//! compare runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use parrep::data::{load_csv, synth_circle, synth_hierarchy, synth_lineage, write_embedding_csv, Dataset, LabelColumn};
use parrep::losses::Method;
use parrep::metrics::{
    centroid_distance_correlation, knn_accuracy, neighbor_kept, svm_accuracy,
    triplet_preservation, MetricReport, DEFAULT_KNN_K, DEFAULT_NEIGHBOR_KEPT_K,
    DEFAULT_SVM_FOLDS, DEFAULT_TRIPLETS_PER_POINT,
};
use parrep::plot::write_scatter_svg;
use parrep::trainer::{
    fit_with_preprocessing, load_model, save_model, transform, TrainConfig,
};
use parrep::{fnanalysis, Error};

#[derive(Parser)]
#[command(name = "parrep", version, about = "Parametric dimensionality reduction with hard-negative mining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a bundled synthetic dataset as CSV.
    Synth {
        /// circle | lineage | hierarchy
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an embedding from a JSON run configuration.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config repeat count.
        #[arg(long)]
        repeat: Option<usize>,
    },
    /// Project new rows through a saved model.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an embedding against its source data.
    Evaluate {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
        /// Comma-separated: knn,svm,nnkept,triplet,centroid.
        #[arg(long, default_value = "knn,svm,nnkept,triplet,centroid")]
        metrics: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional JSON report path; the text table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate mid-near vs uniform false-negative rates over pool sizes.
    Fnrate {
        #[arg(long, default_value_t = 16)]
        n_min: u64,
        #[arg(long, default_value_t = 100_000)]
        n_max: u64,
        #[arg(long, default_value_t = 1)]
        n_mn: u64,
        #[arg(long, default_value_t = 1)]
        n_fp: u64,
        #[arg(long, default_value_t = 50)]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a 2-D embedding CSV as an SVG scatter plot.
    Plot {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Welch's t between one metric of two aggregate reports.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        metric: String,
    },
}

fn default_method() -> String {
    "paramrepulsor".into()
}
fn default_n_nb() -> usize {
    parrep::trainer::DEFAULT_N_NB
}
fn default_n_mn() -> usize {
    parrep::trainer::DEFAULT_N_MN
}
fn default_n_fp() -> usize {
    parrep::trainer::DEFAULT_N_FP
}
fn default_n_epochs() -> usize {
    parrep::trainer::DEFAULT_N_EPOCHS
}
fn default_batch_size() -> usize {
    parrep::trainer::DEFAULT_BATCH_SIZE
}
fn default_learning_rate() -> f64 {
    parrep::trainer::DEFAULT_LEARNING_RATE
}
fn default_weight() -> f64 {
    1.0
}
fn default_hidden_dims() -> Vec<usize> {
    parrep::trainer::DEFAULT_HIDDEN_DIMS.to_vec()
}
fn default_embedding_dim() -> usize {
    parrep::trainer::DEFAULT_EMBEDDING_DIM
}
fn default_repeat() -> usize {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("parrep-out")
}
fn default_metrics() -> Vec<String> {
    vec!["knn".into()]
}

/// JSON run configuration for `fit`: training hyperparameters plus data
/// source, preprocessing switches, outputs and the repeat count.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    data: PathBuf,
    #[serde(default)]
    label_column: Option<String>,
    #[serde(default = "default_method")]
    method: String,
    #[serde(default = "default_n_nb")]
    n_nb: usize,
    #[serde(default = "default_n_mn")]
    n_mn: usize,
    #[serde(default = "default_n_fp")]
    n_fp: usize,
    #[serde(default = "default_n_epochs")]
    n_epochs: usize,
    #[serde(default = "default_batch_size")]
    batch_size: usize,
    #[serde(default = "default_learning_rate")]
    learning_rate: f64,
    #[serde(default = "default_weight")]
    w_nb: f64,
    #[serde(default = "default_weight")]
    w_mn: f64,
    #[serde(default = "default_weight")]
    w_fp: f64,
    #[serde(default = "default_hidden_dims")]
    hidden_dims: Vec<usize>,
    #[serde(default = "default_embedding_dim")]
    embedding_dim: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    lookup: bool,
    #[serde(default)]
    standardize: bool,
    #[serde(default)]
    pca_dims: Option<usize>,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default = "default_repeat")]
    repeat: usize,
    #[serde(default = "default_metrics")]
    metrics: Vec<String>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PARREP_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("parrep: error: PARREP_THREADS must be a positive integer");
                return ExitCode::FAILURE;
            }
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("parrep: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> parrep::Result<()> {
    match command {
        Command::Synth { kind, seed, out } => cmd_synth(&kind, seed, &out),
        Command::Fit { config, seed, out, repeat } => cmd_fit(&config, seed, out, repeat),
        Command::Transform { model, input, label_column, out } => {
            cmd_transform(&model, &input, label_column.as_deref(), &out)
        }
        Command::Evaluate { embedding, data, label_column, metrics, seed, out } => {
            cmd_evaluate(&embedding, &data, label_column.as_deref(), &metrics, seed, out.as_deref())
        }
        Command::Fnrate { n_min, n_max, n_mn, n_fp, rows, out } => {
            cmd_fnrate(n_min, n_max, n_mn, n_fp, rows, &out)
        }
        Command::Plot { embedding, out } => cmd_plot(&embedding, &out),
        Command::Compare { a, b, metric } => cmd_compare(&a, &b, &metric),
    }
}

fn cmd_synth(kind: &str, seed: u64, out: &Path) -> parrep::Result<()> {
    let ds = match kind {
        "circle" => synth_circle(seed),
        "lineage" => synth_lineage(seed),
        "hierarchy" => synth_hierarchy(seed),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown synthetic dataset {other:?} (expected circle, lineage or hierarchy)"
            )))
        }
    };
    write_dataset_csv(out, &ds)
}

fn write_dataset_csv(path: &Path, ds: &Dataset) -> parrep::Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e: std::io::Error| Error::io(path, e);
    for c in 0..ds.dim() {
        write!(out, "x{c},").map_err(io)?;
    }
    writeln!(out, "label").map_err(io)?;
    let labels = ds.labels.as_ref();
    for i in 0..ds.n() {
        for c in 0..ds.dim() {
            write!(out, "{:.17e},", ds.x[(i, c)]).map_err(io)?;
        }
        writeln!(out, "{}", labels.map_or(0, |l| l[i])).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

fn parse_label_column(arg: Option<&str>) -> Option<LabelColumn> {
    arg.map(LabelColumn::parse)
}

fn cmd_fit(
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
    repeat_override: Option<usize>,
) -> parrep::Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let mut rc: RunConfig = serde_json::from_str(&text)?;
    if let Some(s) = seed_override {
        rc.seed = s;
    }
    if let Some(o) = out_override {
        rc.out_dir = o;
    }
    if let Some(r) = repeat_override {
        rc.repeat = r;
    }
    if rc.repeat < 1 {
        return Err(Error::InvalidArgument("repeat must be >= 1".into()));
    }
    let method = Method::parse(&rc.method)?;
    let ds = load_csv(&rc.data, parse_label_column(rc.label_column.as_deref()).as_ref())?;
    std::fs::create_dir_all(&rc.out_dir).map_err(|e| Error::io(&rc.out_dir, e))?;

    let mut per_seed_metrics: Vec<BTreeMap<String, f64>> = Vec::new();
    for run in 0..rc.repeat {
        let seed = rc.seed + run as u64;
        let config = TrainConfig {
            method,
            n_nb: rc.n_nb,
            n_mn: rc.n_mn,
            n_fp: rc.n_fp,
            n_epochs: rc.n_epochs,
            batch_size: rc.batch_size,
            learning_rate: rc.learning_rate,
            w_nb: rc.w_nb,
            w_mn: rc.w_mn,
            w_fp: rc.w_fp,
            hidden_dims: rc.hidden_dims.clone(),
            embedding_dim: rc.embedding_dim,
            seed,
            lookup: rc.lookup,
        };
        let dir = if rc.repeat == 1 {
            rc.out_dir.clone()
        } else {
            let d = rc.out_dir.join(format!("seed_{seed}"));
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            d
        };
        let result = fit_with_preprocessing(&ds, &config, rc.standardize, rc.pca_dims)?;
        write_embedding_csv(&dir.join("embedding.csv"), result.embedding.view(), ds.labels.as_deref())?;
        let trace_path = dir.join("loss_trace.csv");
        let mut trace = std::io::BufWriter::new(
            File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?,
        );
        writeln!(trace, "epoch,loss").map_err(|e| Error::io(&trace_path, e))?;
        for (e, l) in result.loss_trace.iter().enumerate() {
            writeln!(trace, "{e},{l:.17e}").map_err(|e2| Error::io(&trace_path, e2))?;
        }
        trace.flush().map_err(|e| Error::io(&trace_path, e))?;
        if !rc.lookup {
            save_model(&result.model, &dir.join("model.bin"))?;
        }
        if !rc.metrics.is_empty() {
            let report = compute_metrics(
                Some(ds.x.view()),
                result.embedding.view(),
                ds.labels.as_deref(),
                &rc.metrics,
                seed,
            )?;
            std::fs::write(dir.join("metrics.json"), report.to_json())
                .map_err(|e| Error::io(dir.join("metrics.json"), e))?;
            per_seed_metrics.push(report.values);
        }
        eprintln!("fit: seed {seed} done ({} epochs)", rc.n_epochs);
    }
    if rc.repeat > 1 && !per_seed_metrics.is_empty() {
        let aggregate = aggregate_metrics(&per_seed_metrics);
        let path = rc.out_dir.join("aggregate.json");
        std::fs::write(&path, serde_json::to_string_pretty(&aggregate)?)
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AggregateMetric {
    values: Vec<f64>,
    mean: f64,
    std: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AggregateReport {
    runs: usize,
    metrics: BTreeMap<String, AggregateMetric>,
}

fn aggregate_metrics(per_seed: &[BTreeMap<String, f64>]) -> AggregateReport {
    let mut metrics = BTreeMap::new();
    if let Some(first) = per_seed.first() {
        for name in first.keys() {
            let values: Vec<f64> = per_seed.iter().filter_map(|m| m.get(name).copied()).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            metrics.insert(name.clone(), AggregateMetric { values, mean, std: var.sqrt() });
        }
    }
    AggregateReport { runs: per_seed.len(), metrics }
}

fn compute_metrics(
    x: Option<ArrayView2<f64>>,
    y: ArrayView2<f64>,
    labels: Option<&[i64]>,
    names: &[String],
    seed: u64,
) -> parrep::Result<MetricReport> {
    let mut report = MetricReport::default();
    for name in names {
        match name.as_str() {
            "knn" => match labels {
                Some(l) => {
                    let (acc, warn) = knn_accuracy(y, l, DEFAULT_KNN_K)?;
                    report.insert("knn", acc);
                    report.params.insert("knn_k".into(), DEFAULT_KNN_K as f64);
                    if warn {
                        report.notes.push("knn: single class, accuracy trivially 1.0".into());
                    }
                }
                None => report.notes.push("knn skipped: no labels".into()),
            },
            "svm" => match labels {
                Some(l) => {
                    report.insert("svm", svm_accuracy(y, l, DEFAULT_SVM_FOLDS, seed)?);
                    report.params.insert("svm_folds".into(), DEFAULT_SVM_FOLDS as f64);
                }
                None => report.notes.push("svm skipped: no labels".into()),
            },
            "nnkept" => match x {
                Some(x) => {
                    report.insert("nnkept", neighbor_kept(x, y, DEFAULT_NEIGHBOR_KEPT_K)?);
                    report.params.insert("nnkept_k".into(), DEFAULT_NEIGHBOR_KEPT_K as f64);
                }
                None => report.notes.push("nnkept skipped: no source data".into()),
            },
            "triplet" => match x {
                Some(x) => {
                    let (r, degenerate) =
                        triplet_preservation(x, y, DEFAULT_TRIPLETS_PER_POINT, seed)?;
                    report.insert("triplet", r);
                    report
                        .params
                        .insert("triplets_per_point".into(), DEFAULT_TRIPLETS_PER_POINT as f64);
                    if degenerate {
                        report.notes.push("triplet: embedding is a single point".into());
                    }
                }
                None => report.notes.push("triplet skipped: no source data".into()),
            },
            "centroid" => match (x, labels) {
                (Some(x), Some(l)) => {
                    report.insert("centroid", centroid_distance_correlation(x, y, l)?);
                }
                _ => report.notes.push("centroid skipped: needs source data and labels".into()),
            },
            other => return Err(Error::UnknownMetric(other.to_string())),
        }
    }
    report.params.insert("seed".into(), seed as f64);
    Ok(report)
}

fn cmd_transform(
    model_path: &Path,
    input: &Path,
    label_column: Option<&str>,
    out: &Path,
) -> parrep::Result<()> {
    let model = load_model(model_path)?;
    let ds = load_csv(input, parse_label_column(label_column).as_ref())?;
    let y = transform(&model, ds.x.view())?;
    write_embedding_csv(out, y.view(), ds.labels.as_deref())
}

/// Reads an embedding CSV written by `fit`/`transform` back into (Y, labels).
fn load_embedding_csv(path: &Path) -> parrep::Result<Dataset> {
    let header = {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines().next().unwrap_or_default().to_string()
    };
    let label = header
        .split(',')
        .any(|h| h.trim() == "label")
        .then(|| LabelColumn::Name("label".into()));
    load_csv(path, label.as_ref())
}

fn cmd_evaluate(
    embedding: &Path,
    data: &Path,
    label_column: Option<&str>,
    metric_list: &str,
    seed: u64,
    out: Option<&Path>,
) -> parrep::Result<()> {
    let emb = load_embedding_csv(embedding)?;
    let ds = load_csv(data, parse_label_column(label_column).as_ref())?;
    if ds.n() != emb.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            got: emb.n(),
            context: "embedding rows vs data rows".into(),
        });
    }
    let labels = ds.labels.as_deref().or(emb.labels.as_deref());
    let names: Vec<String> = metric_list
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let report = compute_metrics(Some(ds.x.view()), emb.x.view(), labels, &names, seed)?;
    print!("{report}");
    if let Some(path) = out {
        std::fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn cmd_fnrate(n_min: u64, n_max: u64, n_mn: u64, n_fp: u64, rows: usize, out: &Path) -> parrep::Result<()> {
    let table = fnanalysis::fnrate_table(n_min, n_max, n_mn, n_fp, rows)?;
    let mut w = std::io::BufWriter::new(File::create(out).map_err(|e| Error::io(out, e))?);
    let io = |e: std::io::Error| Error::io(out, e);
    writeln!(w, "n,p_mn,p_uniform,expected_mn,expected_uniform").map_err(io)?;
    for row in &table {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            row.n, row.p_mn, row.p_uniform, row.expected_mn, row.expected_uniform
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    match fnanalysis::crossover_size(n_mn, n_fp)? {
        Some(n) => println!("crossover n = {n}"),
        None => println!("crossover n = none (no crossover up to the search cap)"),
    }
    Ok(())
}

fn cmd_plot(embedding: &Path, out: &Path) -> parrep::Result<()> {
    let emb = load_embedding_csv(embedding)?;
    write_scatter_svg(out, emb.x.view(), emb.labels.as_deref())
}

fn cmd_compare(a: &Path, b: &Path, metric: &str) -> parrep::Result<()> {
    let load = |p: &Path| -> parrep::Result<AggregateReport> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Ok(serde_json::from_str(&text)?)
    };
    let (ra, rb) = (load(a)?, load(b)?);
    let ma = ra
        .metrics
        .get(metric)
        .ok_or_else(|| Error::UnknownMetric(metric.to_string()))?;
    let mb = rb
        .metrics
        .get(metric)
        .ok_or_else(|| Error::UnknownMetric(metric.to_string()))?;
    let (n1, n2) = (ma.values.len() as f64, mb.values.len() as f64);
    if n1 < 2.0 || n2 < 2.0 {
        return Err(Error::InvalidArgument(
            "compare needs at least 2 runs per side".into(),
        ));
    }
    let (v1, v2) = (ma.std * ma.std, mb.std * mb.std);
    let se2 = v1 / n1 + v2 / n2;
    let t = if se2 == 0.0 {
        if ma.mean == mb.mean {
            0.0
        } else {
            f64::INFINITY * (ma.mean - mb.mean).signum()
        }
    } else {
        (ma.mean - mb.mean) / se2.sqrt()
    };
    // Welch-Satterthwaite degrees of freedom.
    let df = if se2 == 0.0 {
        n1 + n2 - 2.0
    } else {
        se2 * se2 / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0))
    };
    println!("metric\t{metric}");
    println!("mean_a\t{:.6}", ma.mean);
    println!("mean_b\t{:.6}", mb.mean);
    println!("welch_t\t{t:.6}");
    println!("df\t{df:.3}");
    Ok(())
}
