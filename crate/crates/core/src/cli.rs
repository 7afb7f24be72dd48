//! `spectemp` command line: fit, report, transform, eval, grid, synth and
//! sensitivity. Every artifact is a deterministic function of the flags.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evalhar::{
    generate_synthetic, grid_search_gamma, run_matrix, tail_sensitivity, EvalConfig,
    EvalSettings, Method, Metric, RetrievalTask, Similarity, SynthSpec,
};
use crate::matio::{load_embeddings, load_model, load_qrels, save_embeddings, save_model};
use crate::tempering::{
    build_plan, transform, validate_tail_fraction, FitConfig, SpectralModel, DEFAULT_SAMPLE_CAP,
    DEFAULT_SEED, DEFAULT_TAIL_FRACTION,
};

/// Environment variable capping worker threads (0 or unset = one per core).
pub const THREADS_ENV: &str = "SPECTEMP_THREADS";

pub const SENSITIVITY_FRACTIONS: [f64; 4] = [0.05, 0.10, 0.15, 0.20];

#[derive(Debug, Parser)]
#[command(name = "spectemp", version, about = "Spectral tempering for embedding compression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a spectral model on a corpus sample.
    Fit(FitArgs),
    /// Print the spectrum, SNR profile, knee and gamma(k).
    Report(ReportArgs),
    /// Compress an embedding file with a fitted model.
    Transform(TransformArgs),
    /// Score methods x dimensions x seeds on a retrieval task.
    Eval(EvalArgs),
    /// Oracle grid search over gamma.
    Grid(GridArgs),
    /// Write a synthetic spiked-covariance retrieval task.
    Synth(SynthArgs),
    /// Sweep the noise-floor tail fraction.
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct FormatArgs {
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
    pub tail_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_CAP)]
    pub sample_cap: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Target dimensions; defaults to d, d/2, ... down to 8.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Override the predicted exponent.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// One id per line; defaults to d0, d1, ...
    #[arg(long)]
    pub doc_ids: Option<PathBuf>,
    /// One id per line; defaults to q0, q1, ...
    #[arg(long)]
    pub query_ids: Option<PathBuf>,
    #[arg(long, default_value = "cosine")]
    pub similarity: Similarity,
    #[arg(long, default_value_t = crate::evalhar::DEFAULT_CUTOFF)]
    pub cutoff: usize,
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Use a fitted model instead of fitting on the documents.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
    pub tail_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_CAP)]
    pub sample_cap: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Comma-separated; defaults to every method.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1999")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "ndcg_at_10")]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
    pub tail_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_CAP)]
    pub sample_cap: usize,
    /// Exponent for the fixed_gamma baseline.
    #[arg(long, default_value_t = crate::baselines::DEFAULT_FIXED_GAMMA)]
    pub gamma_fixed: f64,
    #[command(flatten)]
    pub format: FormatArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value = "ndcg_at_10")]
    pub metric: Metric,
    #[command(flatten)]
    pub format: FormatArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory receiving docs.embf, queries.embf and qrels.txt.
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub n_docs: usize,
    #[arg(long, default_value_t = 1_000)]
    pub n_queries: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Spike tiers as `count:variance` pairs.
    #[arg(long, default_value = "16:50,16:20,16:8")]
    pub spikes: String,
    #[arg(long, default_value_t = 1.0)]
    pub noise_variance: f64,
    /// Query perturbation standard deviation.
    #[arg(long, default_value_t = 4.0)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = SENSITIVITY_FRACTIONS)]
    pub fractions: Vec<f64>,
    #[arg(long, default_value = "ndcg_at_10")]
    pub metric: Metric,
    #[command(flatten)]
    pub format: FormatArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Process exit code for an error class.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Shape(_) => 2,
        Error::Io { .. }
        | Error::Format(_)
        | Error::SizeMismatch { .. }
        | Error::NonFinite { .. }
        | Error::Parse { .. }
        | Error::Duplicate { .. }
        | Error::Corrupt(_) => 3,
        Error::Numerical(_) | Error::Degenerate(_) => 4,
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match configure_threads().and_then(|()| run(cli, &mut out)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spectemp: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        // a pool may already exist when embedded; that is not an error
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let text = match cli.command {
        Command::Fit(a) => cmd_fit(&a)?,
        Command::Report(a) => cmd_report(&a)?,
        Command::Transform(a) => cmd_transform(&a)?,
        Command::Eval(a) => cmd_eval(&a)?,
        Command::Grid(a) => cmd_grid(&a)?,
        Command::Synth(a) => cmd_synth(&a)?,
        Command::Sensitivity(a) => cmd_sensitivity(&a)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn fit_config(tail_fraction: f64, sample_cap: usize, seed: u64) -> Result<FitConfig> {
    validate_tail_fraction(tail_fraction)?;
    if sample_cap < 2 {
        return Err(Error::Config(format!("sample cap must be at least 2, got {sample_cap}")));
    }
    Ok(FitConfig {
        tail_fraction,
        sample_cap,
        seed,
    })
}

fn knee_text(knee: Option<usize>) -> String {
    knee.map_or_else(|| "none".to_string(), |k| k.to_string())
}

pub fn cmd_fit(a: &FitArgs) -> Result<String> {
    let config = fit_config(a.tail_fraction, a.sample_cap, a.seed)?;
    let corpus = load_embeddings(&a.input)?;
    let model = SpectralModel::fit(&corpus, &config)?;
    save_model(&model, &a.output)?;
    let p = &model.profile;
    let mut s = String::new();
    let _ = writeln!(s, "dimension      {}", model.dim());
    let _ = writeln!(s, "rows used      {} of {}", model.spectrum.sample_count, corpus.rows());
    let _ = writeln!(s, "noise floor    {}", p.noise_floor);
    let _ = writeln!(s, "knee           {}", knee_text(p.knee_index));
    let _ = writeln!(s, "reference snr  {}", p.reference_snr);
    Ok(s)
}

fn check_dims(dims: &[usize], d: usize) -> Result<()> {
    let bad: Vec<String> = dims
        .iter()
        .filter(|&&k| k == 0 || k > d)
        .map(|k| k.to_string())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "target dimension(s) {} outside [1, {d}]",
            bad.join(",")
        )))
    }
}

fn default_dims(d: usize) -> Vec<usize> {
    let mut dims = vec![d];
    let mut k = d / 2;
    while k >= 8 {
        dims.push(k);
        k /= 2;
    }
    dims
}

#[derive(Serialize)]
struct SpectrumReport {
    dimension: usize,
    tail_fraction: f64,
    noise_floor: f64,
    knee: Option<usize>,
    reference_snr: f64,
    spectrum: Vec<RankRow>,
    gamma: Vec<GammaRow>,
}

#[derive(Serialize)]
struct RankRow {
    rank: usize,
    eigenvalue: f64,
    snr: f64,
}

#[derive(Serialize)]
struct GammaRow {
    k: usize,
    gamma: f64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn cmd_report(a: &ReportArgs) -> Result<String> {
    let model = load_model(&a.model)?;
    let d = model.dim();
    let dims = if a.dims.is_empty() { default_dims(d) } else { a.dims.clone() };
    check_dims(&dims, d)?;
    let p = &model.profile;
    let report = SpectrumReport {
        dimension: d,
        tail_fraction: p.tail_fraction,
        noise_floor: p.noise_floor,
        knee: p.knee_index,
        reference_snr: p.reference_snr,
        spectrum: model
            .spectrum
            .eigenvalues
            .iter()
            .zip(&p.snr)
            .enumerate()
            .map(|(i, (&eigenvalue, &snr))| RankRow {
                rank: i + 1,
                eigenvalue,
                snr,
            })
            .collect(),
        gamma: dims
            .iter()
            .map(|&k| Ok(GammaRow { k, gamma: model.gamma(k)? }))
            .collect::<Result<_>>()?,
    };
    if a.format.json {
        return to_json(&report);
    }
    if a.format.csv {
        let mut s = csv_string(
            &["rank", "eigenvalue", "snr"],
            report
                .spectrum
                .iter()
                .map(|r| vec![r.rank.to_string(), r.eigenvalue.to_string(), r.snr.to_string()]),
        )?;
        s.push('\n');
        s.push_str(&csv_string(
            &["k", "gamma"],
            report.gamma.iter().map(|g| vec![g.k.to_string(), g.gamma.to_string()]),
        )?);
        return Ok(s);
    }
    let mut s = String::new();
    let _ = writeln!(s, "dimension {d}, tail fraction {}", report.tail_fraction);
    let _ = writeln!(s, "noise floor {:.6e}", report.noise_floor);
    let _ = writeln!(s, "knee {}, reference snr {:.4}", knee_text(report.knee), report.reference_snr);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>6} {:>14} {:>12}", "rank", "eigenvalue", "snr");
    for r in &report.spectrum {
        let _ = writeln!(s, "{:>6} {:>14.6e} {:>12.4}", r.rank, r.eigenvalue, r.snr);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>6} {:>8}", "k", "gamma");
    for g in &report.gamma {
        let _ = writeln!(s, "{:>6} {:>8.4}", g.k, g.gamma);
    }
    Ok(s)
}

pub fn cmd_transform(a: &TransformArgs) -> Result<String> {
    if let Some(g) = a.gamma {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::Config(format!("--gamma must lie in [0, 1], got {g}")));
        }
    }
    let model = load_model(&a.model)?;
    check_dims(&[a.k], model.dim())?;
    let input = load_embeddings(&a.input)?;
    let plan = build_plan(&model, a.k, a.gamma, !a.no_normalize)?;
    let output = transform(&plan, &input)?;
    save_embeddings(&output, &a.output)?;
    Ok(format!(
        "wrote {} x {} (gamma {}) to {}\n",
        output.rows(),
        output.dim(),
        plan.gamma,
        a.output.display()
    ))
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn load_task(a: &TaskArgs) -> Result<RetrievalTask> {
    if a.cutoff == 0 {
        return Err(Error::Config("cutoff must be positive".into()));
    }
    let docs = load_embeddings(&a.docs)?;
    let queries = load_embeddings(&a.queries)?;
    let qrels = load_qrels(&a.qrels)?;
    let doc_ids = match &a.doc_ids {
        Some(p) => read_ids(p)?,
        None => crate::evalhar::default_ids("d", docs.rows()),
    };
    let query_ids = match &a.query_ids {
        Some(p) => read_ids(p)?,
        None => crate::evalhar::default_ids("q", queries.rows()),
    };
    RetrievalTask::with_ids(docs, doc_ids, queries, query_ids, qrels)
}

fn settings(a: &TaskArgs, metric: Metric) -> EvalSettings {
    EvalSettings {
        similarity: a.similarity,
        cutoff: a.cutoff,
        metric,
    }
}

fn obtain_model(a: &ModelArgs, task: &RetrievalTask) -> Result<SpectralModel> {
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => SpectralModel::fit(&task.docs, &fit_config(a.tail_fraction, a.sample_cap, a.seed)?)?,
    };
    if model.dim() != task.dim() {
        return Err(Error::Shape(format!(
            "model dimension {} does not match task dimension {}",
            model.dim(),
            task.dim()
        )));
    }
    Ok(model)
}

fn emit(text: String, output: &Option<PathBuf>) -> Result<String> {
    match output {
        Some(p) => {
            fs::write(p, &text).map_err(|e| Error::io(p, e))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let methods: Vec<Method> = if a.methods.is_empty() {
        Method::all()
    } else {
        a.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?
    };
    validate_tail_fraction(a.tail_fraction)?;
    let task = load_task(&a.task)?;
    check_dims(&a.dims, task.dim())?;
    let config = EvalConfig {
        tail_fraction: a.tail_fraction,
        sample_cap: a.sample_cap,
        similarity: a.task.similarity,
        l2_normalize: !a.task.no_normalize,
        cutoff: a.task.cutoff,
        metrics: a.metrics.clone(),
        gamma_fixed: a.gamma_fixed,
    };
    let report = run_matrix(&methods, &a.dims, &task, &a.seeds, &config)?;
    let text = if a.format.json {
        let mut s = report.to_json()?;
        s.push('\n');
        s
    } else if a.format.csv {
        report.to_csv()?
    } else {
        report.to_table()
    };
    emit(text, &a.output)
}

#[derive(Serialize)]
struct GridJson {
    k: usize,
    best_gamma: f64,
    best_score: f64,
    predicted_gamma: f64,
    curve: Vec<(f64, f64)>,
}

pub fn cmd_grid(a: &GridArgs) -> Result<String> {
    let task = load_task(&a.task)?;
    check_dims(&a.dims, task.dim())?;
    crate::evalhar::grid_values(a.step)?;
    let model = obtain_model(&a.model, &task)?;
    let settings = settings(&a.task, a.metric);
    let mut results = Vec::with_capacity(a.dims.len());
    for &k in &a.dims {
        let g = grid_search_gamma(&model, &task, k, a.step, !a.task.no_normalize, &settings)?;
        results.push(GridJson {
            k,
            best_gamma: g.best_gamma,
            best_score: g.best_score,
            predicted_gamma: model.gamma(k)?,
            curve: g.curve,
        });
    }
    let text = if a.format.json {
        to_json(&results)?
    } else if a.format.csv {
        csv_string(
            &["k", "gamma", "score"],
            results.iter().flat_map(|r| {
                r.curve
                    .iter()
                    .map(move |(g, s)| vec![r.k.to_string(), g.to_string(), s.to_string()])
            }),
        )?
    } else {
        let mut s = String::new();
        let _ = writeln!(s, "{} (x100)", a.metric);
        let _ = writeln!(s, "{:>6} {:>10} {:>10} {:>10}", "k", "gamma*", "score*", "predicted");
        for r in &results {
            let _ = writeln!(
                s,
                "{:>6} {:>10.2} {:>10.2} {:>10.4}",
                r.k,
                r.best_gamma,
                r.best_score * 100.0,
                r.predicted_gamma
            );
        }
        s
    };
    emit(text, &a.output)
}

/// Parses `count:variance[,count:variance...]`.
pub fn parse_spikes(text: &str) -> Result<Vec<(usize, f64)>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|part| {
            let bad = || Error::Config(format!("spike tier {part:?} is not count:variance"));
            let (c, v) = part.trim().split_once(':').ok_or_else(bad)?;
            Ok((c.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String> {
    let spec = SynthSpec {
        n_docs: a.n_docs,
        n_queries: a.n_queries,
        dim: a.dim,
        spikes: parse_spikes(&a.spikes)?,
        noise_variance: a.noise_variance,
        query_perturbation: a.tau,
        seed: a.seed,
    };
    let task = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;
    save_embeddings(&task.docs, a.output_dir.join("docs.embf"))?;
    save_embeddings(&task.queries, a.output_dir.join("queries.embf"))?;
    let qrels_path = a.output_dir.join("qrels.txt");
    fs::write(&qrels_path, task.qrels.to_trec_string()).map_err(|e| Error::io(&qrels_path, e))?;
    Ok(format!(
        "wrote {} docs and {} queries (d = {}) to {}\n",
        spec.n_docs,
        spec.n_queries,
        spec.dim,
        a.output_dir.display()
    ))
}

pub fn cmd_sensitivity(a: &SensitivityArgs) -> Result<String> {
    if a.fractions.is_empty() {
        return Err(Error::Config("no tail fractions given".into()));
    }
    for &f in &a.fractions {
        validate_tail_fraction(f)?;
    }
    let task = load_task(&a.task)?;
    check_dims(&a.dims, task.dim())?;
    let model = obtain_model(&a.model, &task)?;
    let settings = settings(&a.task, a.metric);
    let report = tail_sensitivity(&model, &task, &a.fractions, &a.dims, !a.task.no_normalize, &settings)?;
    let text = if a.format.json {
        to_json(&report)?
    } else if a.format.csv {
        report.to_csv()?
    } else {
        let mut s = String::new();
        let _ = writeln!(s, "{} (x100)", a.metric);
        let _ = writeln!(s, "{:>8} {:>6} {:>6} {:>8} {:>8}", "fraction", "k", "knee", "gamma", "score");
        for r in &report.rows {
            let _ = writeln!(
                s,
                "{:>8.2} {:>6} {:>6} {:>8.4} {:>8.2}",
                r.tail_fraction,
                r.k,
                knee_text(r.knee),
                r.gamma,
                r.score * 100.0
            );
        }
        for (k, spread) in report.spread() {
            let _ = writeln!(s, "spread k={k}: {:.3}", spread * 100.0);
        }
        let _ = writeln!(s, "max spread: {:.3}", report.max_spread() * 100.0);
        s
    };
    emit(text, &a.output)
}
